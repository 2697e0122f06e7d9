#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drr/errors.hpp"
#include "drr/io.hpp"
#include "drr/pipeline.hpp"

namespace fs = std::filesystem;

using drr::Dataset;
using drr::FileFormat;
using drr::ingest;
using drr::PredictionRecord;
using drr::ScoreType;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               fs::path("drr_test_" + std::to_string(::getpid()) + "_" +
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

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<PredictionRecord> sample_records() {
    std::vector<PredictionRecord> records(3);
    records[0] = {"a", 0, {0.9, 0.1}};
    records[1] = {"b", 1, {0.25, 0.75}};
    records[2] = {"c", std::nullopt, {0.5, 0.5}};
    return records;
}

}  // namespace

TEST_CASE("csv predictions survive a write-read round trip") {
    TempDir dir;
    const auto records = sample_records();
    drr::write_predictions_csv(dir.file("p.csv"), records);
    const Dataset data = ingest(dir.file("p.csv"), FileFormat::csv, ScoreType::probs);
    REQUIRE(data.records.size() == 3);
    CHECK(data.classes == 2);
    CHECK(!data.all_labeled);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(data.records[i].id == records[i].id);
        CHECK(data.records[i].label == records[i].label);
        REQUIRE(data.records[i].scores.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(data.records[i].scores[k] == records[i].scores[k]);
        }
    }
}

TEST_CASE("csv ingestion accepts the label-free schema and CRLF endings") {
    TempDir dir;
    write_text(dir.file("nolabel.csv"), "id,s0,s1\r\na,0.9,0.1\r\nb,0.2,0.8\r\n");
    const Dataset data =
        ingest(dir.file("nolabel.csv"), FileFormat::csv, ScoreType::probs);
    REQUIRE(data.records.size() == 2);
    CHECK(!data.all_labeled);
    CHECK(!data.records[0].label.has_value());
    CHECK(data.records[1].scores[1] == 0.8);
}

TEST_CASE("csv ingestion diagnostics name the offending row") {
    TempDir dir;

    write_text(dir.file("badhead.csv"), "id,label,score0,score1\na,0,0.9,0.1\n");
    CHECK_THROWS_AS(ingest(dir.file("badhead.csv"), FileFormat::csv, ScoreType::probs),
                    drr::DataError);

    write_text(dir.file("badfloat.csv"), "id,label,s0,s1\na,0,0.9,0.1\nb,1,oops,0.5\n");
    CHECK_THROWS_WITH_AS(
        ingest(dir.file("badfloat.csv"), FileFormat::csv, ScoreType::probs),
        doctest::Contains("row 2"), drr::DataError);

    write_text(dir.file("dup.csv"), "id,label,s0,s1\na,0,0.9,0.1\na,1,0.5,0.5\n");
    CHECK_THROWS_WITH_AS(ingest(dir.file("dup.csv"), FileFormat::csv, ScoreType::probs),
                         doctest::Contains("duplicate"), drr::DataError);

    write_text(dir.file("badsum.csv"), "id,label,s0,s1\na,0,0.9,0.3\n");
    CHECK_THROWS_AS(ingest(dir.file("badsum.csv"), FileFormat::csv, ScoreType::probs),
                    drr::DataError);
    // The same numbers pass as logits, where no simplex constraint applies.
    CHECK_NOTHROW(ingest(dir.file("badsum.csv"), FileFormat::csv, ScoreType::logits));

    write_text(dir.file("ragged.csv"), "id,label,s0,s1\na,0,0.9,0.1\nb,1,0.5\n");
    CHECK_THROWS_AS(ingest(dir.file("ragged.csv"), FileFormat::csv, ScoreType::probs),
                    drr::DataError);

    CHECK_THROWS_AS(ingest(dir.file("missing.csv"), FileFormat::csv, ScoreType::probs),
                    drr::DataError);

    write_text(dir.file("oneclass.csv"), "id,label,s0\na,0,1.0\n");
    CHECK_THROWS_AS(ingest(dir.file("oneclass.csv"), FileFormat::csv, ScoreType::probs),
                    drr::DataError);
}

TEST_CASE("jsonl ingestion mirrors the csv reader") {
    TempDir dir;
    write_text(dir.file("p.jsonl"),
               "{\"id\": \"a\", \"label\": 0, \"scores\": [0.9, 0.1]}\n"
               "{\"id\": 7, \"label\": null, \"scores\": [0.25, 0.75]}\n"
               "{\"id\": \"c\", \"scores\": [0.5, 0.5]}\n");
    const Dataset data =
        ingest(dir.file("p.jsonl"), FileFormat::jsonl, ScoreType::probs);
    REQUIRE(data.records.size() == 3);
    CHECK(data.records[0].label == 0);
    CHECK(data.records[1].id == "7");  // integer ids become strings
    CHECK(!data.records[1].label.has_value());
    CHECK(!data.records[2].label.has_value());

    write_text(dir.file("noscores.jsonl"), "{\"id\": \"a\", \"label\": 0}\n");
    CHECK_THROWS_AS(
        ingest(dir.file("noscores.jsonl"), FileFormat::jsonl, ScoreType::probs),
        drr::DataError);

    write_text(dir.file("badjson.jsonl"), "{nope\n");
    CHECK_THROWS_WITH_AS(
        ingest(dir.file("badjson.jsonl"), FileFormat::jsonl, ScoreType::probs),
        doctest::Contains("row 1"), drr::DataError);
}

TEST_CASE("significant-digit formatting is stable and trim-free") {
    CHECK(drr::format_significant(1.0) == "1");
    CHECK(drr::format_significant(0.02) == "0.02");
    CHECK(drr::format_significant(1.0 / 3.0) == "0.333333333333");
    CHECK(drr::format_significant(0.0) == "0");
}

TEST_CASE("sweep csv leaves optional cells empty at zero coverage") {
    TempDir dir;
    std::vector<drr::SweepRow> rows(2);
    rows[0] = {0.5, 1.0, 0.75, 0.25, 4};
    rows[1] = {1.0, 0.0, std::nullopt, std::nullopt, 0};
    drr::write_sweep_csv(dir.file("s.csv"), rows);
    CHECK(read_text(dir.file("s.csv")) ==
          "tau,coverage,accuracy,selective_risk,n_accepted\n"
          "0.5,1,0.75,0.25,4\n"
          "1,0,,,0\n");
}

TEST_CASE("rejector artifacts reload to the same evaluations") {
    TempDir dir;
    const auto p = drr::DiscreteDistribution::uniform({"a", "b", "c"});
    const auto risk = drr::pointwise_risk_direct({"a", "b", "c"}, {0.1, 0.5, 0.9});

    drr::RejectorArtifact artifact;
    artifact.rejector = drr::fit_kl(p, risk, 0.7);
    artifact.loss = drr::LossKind::brier;
    artifact.prob_floor = 1e-9;
    artifact.temperature = 1.7;
    artifact.fit_support_size = 3;
    artifact.seed = 99;
    drr::save_rejector(dir.file("r.json"), artifact);
    const auto loaded = drr::load_rejector(dir.file("r.json"));

    CHECK(loaded.rejector.spec.kind == artifact.rejector.spec.kind);
    CHECK(loaded.rejector.spec.lambda == artifact.rejector.spec.lambda);
    CHECK(loaded.loss == artifact.loss);
    CHECK(loaded.prob_floor == artifact.prob_floor);
    CHECK(loaded.temperature == artifact.temperature);
    CHECK(loaded.fit_support_size == 3);
    CHECK(loaded.seed == 99);
    // Shortest-round-trip doubles make reloaded evaluations bit-identical.
    for (double v : {0.0, 0.1, 0.5, 0.9, 2.0}) {
        CHECK(drr::evaluate_ratio(loaded.rejector, v) ==
              drr::evaluate_ratio(artifact.rejector, v));
    }

    drr::RejectorArtifact chi;
    chi.rejector = drr::fit_chi_square(p, risk, 2.0);
    drr::save_rejector(dir.file("chi.json"), chi);
    const auto chi_loaded = drr::load_rejector(dir.file("chi.json"));
    CHECK(!chi_loaded.temperature.has_value());
    CHECK(chi_loaded.rejector.mean_risk == chi.rejector.mean_risk);
    CHECK(drr::evaluate_ratio(chi_loaded.rejector, 0.4) ==
          drr::evaluate_ratio(chi.rejector, 0.4));
}

TEST_CASE("calibration and task artifacts survive the round trip") {
    TempDir dir;
    drr::CalibrationModel model;
    model.temperature = 1.37;
    model.final_nll = 0.42;
    model.at_boundary = false;
    drr::save_calibration(dir.file("c.json"), model);
    const auto loaded = drr::load_calibration(dir.file("c.json"));
    CHECK(loaded.temperature == model.temperature);
    CHECK(loaded.final_nll == model.final_nll);
    CHECK(loaded.at_boundary == model.at_boundary);

    const auto task = drr::make_dirichlet_task(8, 3, 1.0, 5, 0.1);
    drr::save_task(dir.file("t.json"), task);
    const auto task_loaded = drr::load_task(dir.file("t.json"));
    CHECK(task_loaded.marginal.size() == task.marginal.size());
    CHECK(task_loaded.label_noise_rate == task.label_noise_rate);
    for (std::size_t i = 0; i < task.marginal.size(); ++i) {
        CHECK(task_loaded.marginal.id(i) == task.marginal.id(i));
        CHECK(task_loaded.marginal.weight(i) == task.marginal.weight(i));
        for (std::size_t k = 0; k < task.classes(); ++k) {
            CHECK(task_loaded.posterior[i][k] == task.posterior[i][k]);
        }
    }
}

TEST_CASE("pipeline outputs are byte-identical across reruns and formats") {
    TempDir dir;
    // Same content in both serialization formats.
    write_text(dir.file("fit.csv"),
               "id,label,s0,s1\n"
               "a,0,0.95,0.05\nb,1,0.2,0.8\nc,0,0.6,0.4\nd,1,0.45,0.55\n");
    write_text(dir.file("fit.jsonl"),
               "{\"id\":\"a\",\"label\":0,\"scores\":[0.95,0.05]}\n"
               "{\"id\":\"b\",\"label\":1,\"scores\":[0.2,0.8]}\n"
               "{\"id\":\"c\",\"label\":0,\"scores\":[0.6,0.4]}\n"
               "{\"id\":\"d\",\"label\":1,\"scores\":[0.45,0.55]}\n");

    drr::RunConfig config;
    config.fit_path = dir.file("fit.csv");
    config.spec = {drr::RejectorKind::kl, 1.0, 0.5};
    config.out_dir = dir.file("out1");
    const auto first = drr::run_pipeline(config);

    config.out_dir = dir.file("out2");
    const auto second = drr::run_pipeline(config);

    config.out_dir = dir.file("out3");
    config.fit_path = dir.file("fit.jsonl");
    config.fit_format = drr::FileFormat::jsonl;
    const auto third = drr::run_pipeline(config);

    const auto csv1 = read_text(first.sweep_csv_path);
    CHECK(csv1 == read_text(second.sweep_csv_path));
    CHECK(csv1 == read_text(third.sweep_csv_path));
    CHECK(read_text(first.sidecar_json_path) == read_text(second.sidecar_json_path));
    REQUIRE(first.rows.size() == 50);
    CHECK(first.rows.front().coverage >= first.rows.back().coverage);
}

TEST_CASE("pipeline selects a threshold when asked for coverage") {
    TempDir dir;
    write_text(dir.file("fit.csv"),
               "id,label,s0,s1\n"
               "a,0,0.95,0.05\nb,1,0.2,0.8\nc,0,0.6,0.4\nd,1,0.45,0.55\n");
    drr::RunConfig config;
    config.fit_path = dir.file("fit.csv");
    config.spec = {drr::RejectorKind::kl, 1.0, 0.5};
    config.coverage_target = 0.5;
    config.out_dir = dir.file("out");
    const auto result = drr::run_pipeline(config);
    REQUIRE(result.selection.has_value());
    CHECK(result.selection->achieved_coverage >= 0.5);
    // The sidecar records the selection.
    CHECK(read_text(result.sidecar_json_path).find("\"selection\"") != std::string::npos);
}

TEST_CASE("pipeline validates its configuration and inputs") {
    TempDir dir;
    write_text(dir.file("fit.csv"), "id,label,s0,s1\na,0,0.9,0.1\nb,1,0.3,0.7\n");
    write_text(dir.file("unlabeled.csv"), "id,s0,s1\na,0.9,0.1\nb,0.3,0.7\n");

    drr::RunConfig config;
    config.fit_path = dir.file("fit.csv");
    config.out_dir = dir.file("out");

    {
        auto bad = config;
        bad.fit_path.clear();
        CHECK_THROWS_AS(drr::run_pipeline(bad), drr::ConfigError);
    }
    {
        auto bad = config;
        bad.out_dir.clear();
        CHECK_THROWS_AS(drr::run_pipeline(bad), drr::ConfigError);
    }
    {
        auto bad = config;
        bad.tau_count = 0;
        CHECK_THROWS_AS(drr::run_pipeline(bad), drr::ConfigError);
    }
    {
        auto bad = config;
        bad.calibration_path = bad.fit_path;
        CHECK_THROWS_WITH_AS(drr::run_pipeline(bad), doctest::Contains("distinct"),
                             drr::ConfigError);
    }
    {
        // Calibration requires logit scores on the fit split.
        auto bad = config;
        bad.calibration_path = dir.file("unlabeled.csv");
        CHECK_THROWS_WITH_AS(drr::run_pipeline(bad), doctest::Contains("logit"),
                             drr::ConfigError);
    }
    {
        auto bad = config;
        bad.eval_path = dir.file("unlabeled.csv");
        CHECK_THROWS_WITH_AS(drr::run_pipeline(bad),
                             doctest::Contains("fully labeled"), drr::DataError);
    }
}

TEST_CASE("file format and score type names round trip") {
    CHECK(drr::file_format_from_string("csv") == FileFormat::csv);
    CHECK(drr::file_format_from_string("jsonl") == FileFormat::jsonl);
    CHECK(drr::score_type_from_string("probs") == ScoreType::probs);
    CHECK(drr::score_type_from_string("logits") == ScoreType::logits);
    CHECK(drr::to_string(FileFormat::jsonl) == "jsonl");
    CHECK(drr::to_string(ScoreType::logits) == "logits");
    CHECK_THROWS_AS(drr::file_format_from_string("xml"), drr::ConfigError);
    CHECK_THROWS_AS(drr::score_type_from_string("margins"), drr::ConfigError);
}
