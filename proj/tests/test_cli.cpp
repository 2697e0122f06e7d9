// Exercises the installed command-line binary end to end: subcommand
// behavior, artifact files, and the exit-code contract (0 ok, 2 config,
// 3 data, 4 solver).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "drr/io.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               fs::path("drr_cli_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

int run_cli(const std::string& args) {
    const std::string command =
        std::string(DRR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("help exits cleanly, parse errors exit with the config code") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("sweep --help") == 0);
    CHECK(run_cli("--definitely-not-a-flag") == 2);
    CHECK(run_cli("sweep") == 2);              // missing required options
    CHECK(run_cli("no-such-subcommand") == 2);
}

TEST_CASE("synth, fit, sweep, and target-coverage cooperate on disk") {
    TempDir dir;
    const std::string prefix = dir.file("demo");
    CHECK(run_cli("synth --style leveled --classes 5 --support 40 --noise 0.1 "
                  "--n-fit 2000 --n-eval 2000 --seed 3 --out-prefix " + prefix) == 0);
    CHECK(fs::exists(prefix + "_task.json"));
    CHECK(fs::exists(prefix + "_fit.csv"));
    CHECK(fs::exists(prefix + "_eval.csv"));

    const std::string rejector_path = dir.file("rejector.json");
    CHECK(run_cli("fit --input " + prefix + "_fit.csv --kind chi2 --lambda 2 "
                  "--out " + rejector_path) == 0);
    const auto artifact = drr::load_rejector(rejector_path);
    CHECK(artifact.rejector.spec.kind == drr::RejectorKind::chi_square);
    CHECK(artifact.fit_support_size == 2000);

    CHECK(run_cli("sweep --fit-input " + prefix + "_fit.csv --eval-input " +
                  prefix + "_eval.csv --kind kl --lambda 1 --out-dir " +
                  dir.file("out") + " --out-prefix kl") == 0);
    CHECK(fs::exists(dir.file("out") + "/kl_sweep.csv"));
    CHECK(fs::exists(dir.file("out") + "/kl_run.json"));

    CHECK(run_cli("target-coverage --fit-input " + prefix + "_fit.csv "
                  "--eval-input " + prefix + "_eval.csv --kind kl --lambda 1 "
                  "--target 0.5 --out-dir " + dir.file("out") +
                  " --out-prefix tc") == 0);
}

TEST_CASE("the dual search and bound checks run from the command line") {
    TempDir dir;
    const std::string prefix = dir.file("demo");
    REQUIRE(run_cli("synth --style dirichlet --classes 3 --support 10 "
                    "--n-fit 500 --n-eval 500 --seed 5 --out-prefix " + prefix) == 0);

    CHECK(run_cli("check-bounds --task " + prefix + "_task.json --which kl "
                  "--n 500 --m 5 --delta 0.05 --lambda 1 --trials 30 "
                  "--no-rate-check --out " + dir.file("report.json")) == 0);
    CHECK(fs::exists(dir.file("report.json")));

    // The linear-clip bound needs lambda above twice the risk range.
    CHECK(run_cli("check-bounds --task " + prefix + "_task.json --which chi2 "
                  "--n 500 --m 5 --delta 0.05 --lambda 1 --trials 5 "
                  "--no-rate-check") == 4);

    CHECK(run_cli("dro --input " + prefix + "_fit.csv --kind kl --lambda 1 "
                  "--out " + dir.file("adv.csv")) == 0);
    std::ifstream adv(dir.file("adv.csv"));
    std::string header;
    std::getline(adv, header);
    CHECK(header == "id,weight");

    CHECK(run_cli("dro --input " + prefix + "_fit.csv --epsilon 0.05 "
                  "--lambda-lo 0.01 --lambda-hi 100") == 0);
}

TEST_CASE("calibration runs on labeled logit files") {
    TempDir dir;
    write_text(dir.file("logits.csv"),
               "id,label,s0,s1\n"
               "a,0,2.0,0.0\nb,1,-1.0,1.5\nc,0,1.0,0.5\nd,1,0.0,2.5\n");
    CHECK(run_cli("calibrate --input " + dir.file("logits.csv") + " --out " +
                  dir.file("calib.json")) == 0);
    const auto model = drr::load_calibration(dir.file("calib.json"));
    CHECK(model.temperature > 0.0);

    write_text(dir.file("unlabeled.csv"), "id,s0,s1\na,2.0,0.0\n");
    CHECK(run_cli("calibrate --input " + dir.file("unlabeled.csv")) == 3);
}

TEST_CASE("failures map to the documented exit codes") {
    TempDir dir;
    write_text(dir.file("fit.csv"),
               "id,label,s0,s1\na,0,0.9,0.1\nb,1,0.3,0.7\nc,0,0.6,0.4\n");

    // alpha outside the supported families: config error.
    CHECK(run_cli("fit --input " + dir.file("fit.csv") +
                  " --kind alpha --alpha 0.5 --out " + dir.file("r.json")) == 2);
    CHECK(run_cli("fit --input " + dir.file("fit.csv") +
                  " --kind alpha --alpha -3 --out " + dir.file("r.json")) == 2);

    // Unreadable input: data error.
    CHECK(run_cli("sweep --fit-input " + dir.file("nope.csv") + " --out-dir " +
                  dir.file("out")) == 3);

    // Infeasible regularization for the linear clip: solver error.
    CHECK(run_cli("fit --input " + dir.file("fit.csv") +
                  " --kind chi2 --lambda 0.01 --out " + dir.file("r.json")) == 4);

    // Unattainable coverage target: data error naming the best achievable.
    write_text(dir.file("spread.csv"),
               "id,label,s0,s1\na,0,0.999,0.001\nb,1,0.5,0.5\n");
    CHECK(run_cli("target-coverage --fit-input " + dir.file("spread.csv") +
                  " --kind kl --lambda 0.05 --target 1.0 --out-dir " +
                  dir.file("out2")) == 3);
}
