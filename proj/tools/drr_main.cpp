// Command-line front end for the density-ratio rejection toolkit.
//
// Subcommands: calibrate, fit, sweep, target-coverage, synth, check-bounds,
// dro. Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric-solver error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "drr/calibration.hpp"
#include "drr/errors.hpp"
#include "drr/evaluation.hpp"
#include "drr/io.hpp"
#include "drr/losses.hpp"
#include "drr/pipeline.hpp"
#include "drr/random.hpp"
#include "drr/rejectors.hpp"

namespace {

using nlohmann::json;

struct IoFlags {
    std::string path;
    std::string format = "csv";
    std::string score_type = "probs";
};

void add_input_flags(CLI::App* cmd, IoFlags& flags, const std::string& name,
                     bool with_score_type = true) {
    cmd->add_option("--" + name, flags.path, name + " file")->required();
    cmd->add_option("--" + name + "-format", flags.format,
                    name + " file format (csv|jsonl)");
    if (with_score_type) {
        cmd->add_option("--" + name + "-scores", flags.score_type,
                        name + " score type (probs|logits)");
    }
}

drr::Dataset read_dataset(const IoFlags& flags) {
    return drr::ingest(flags.path, drr::file_format_from_string(flags.format),
                       drr::score_type_from_string(flags.score_type));
}

std::vector<std::vector<double>> dataset_probabilities(
    const drr::Dataset& data, const std::string& score_type,
    const std::optional<drr::CalibrationModel>& calibration) {
    std::vector<std::vector<double>> probs;
    probs.reserve(data.records.size());
    if (drr::score_type_from_string(score_type) == drr::ScoreType::probs) {
        for (const auto& rec : data.records) probs.push_back(rec.scores);
        return probs;
    }
    drr::CalibrationModel model;
    if (calibration.has_value()) model = *calibration;
    for (const auto& rec : data.records) {
        probs.push_back(drr::apply_temperature(model, rec.scores));
    }
    return probs;
}

int run_calibrate(const IoFlags& input, const std::string& out_path) {
    const drr::Dataset data = drr::ingest(
        input.path, drr::file_format_from_string(input.format),
        drr::ScoreType::logits);
    if (!data.all_labeled) {
        throw drr::DataError("calibration input must be fully labeled");
    }
    std::vector<std::vector<double>> logits;
    std::vector<int> labels;
    for (const auto& rec : data.records) {
        logits.push_back(rec.scores);
        labels.push_back(*rec.label);
    }
    const drr::CalibrationModel model = drr::fit_temperature(logits, labels);
    if (!out_path.empty()) drr::save_calibration(out_path, model);
    std::cout << "temperature " << drr::format_significant(model.temperature)
              << "\nfinal_nll " << drr::format_significant(model.final_nll)
              << "\nat_boundary " << (model.at_boundary ? "true" : "false")
              << "\n";
    if (model.at_boundary) {
        std::cerr << "warning: fitted temperature sits at the search boundary\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Density-ratio rejection toolkit"};
    app.require_subcommand(1);

    // calibrate
    auto* cal = app.add_subcommand("calibrate",
                                   "Fit a softmax temperature on labeled logits");
    IoFlags cal_input;
    add_input_flags(cal, cal_input, "input", /*with_score_type=*/false);
    std::string cal_out;
    cal->add_option("--out", cal_out, "calibration json output path");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a density-ratio rejector");
    IoFlags fit_input;
    add_input_flags(fit, fit_input, "input");
    std::string fit_calib_path, fit_calib_format = "csv";
    fit->add_option("--calibration-input", fit_calib_path,
                    "labeled logits file for temperature calibration");
    fit->add_option("--calibration-format", fit_calib_format, "csv|jsonl");
    std::string fit_kind = "kl", fit_loss = "zero-one";
    double fit_alpha = 1.0, fit_lambda = 1.0, fit_floor = drr::kProbFloor;
    std::uint64_t fit_seed = 0;
    fit->add_option("--kind", fit_kind, "rejector family (kl|alpha|chi2)");
    fit->add_option("--alpha", fit_alpha, "alpha for the alpha family");
    fit->add_option("--lambda", fit_lambda, "regularization strength");
    fit->add_option("--loss", fit_loss, "loss kind (zero-one|log|brier)");
    fit->add_option("--prob-floor", fit_floor, "probability floor before logs");
    fit->add_option("--seed", fit_seed, "seed echoed into artifacts");
    std::string fit_out;
    fit->add_option("--out", fit_out, "rejector json output path")->required();

    // sweep / target-coverage share a pipeline config
    auto add_pipeline_flags = [&](CLI::App* cmd, drr::RunConfig& config,
                                  std::string& fit_format, std::string& fit_scores,
                                  std::string& eval_format, std::string& eval_scores,
                                  std::string& calib_format, std::string& kind,
                                  std::string& loss) {
        cmd->add_option("--fit-input", config.fit_path, "fit split file")->required();
        cmd->add_option("--fit-format", fit_format, "csv|jsonl");
        cmd->add_option("--fit-scores", fit_scores, "probs|logits");
        cmd->add_option("--eval-input", config.eval_path,
                        "evaluation split file (defaults to the fit split)");
        cmd->add_option("--eval-format", eval_format, "csv|jsonl");
        cmd->add_option("--eval-scores", eval_scores, "probs|logits");
        cmd->add_option("--calibration-input", config.calibration_path,
                        "labeled logits file for temperature calibration");
        cmd->add_option("--calibration-format", calib_format, "csv|jsonl");
        cmd->add_option("--kind", kind, "rejector family (kl|alpha|chi2)");
        cmd->add_option("--alpha", config.spec.alpha, "alpha for the alpha family");
        cmd->add_option("--lambda", config.spec.lambda, "regularization strength");
        cmd->add_option("--loss", loss, "loss kind (zero-one|log|brier)");
        cmd->add_option("--prob-floor", config.prob_floor, "probability floor");
        cmd->add_option("--taus", config.tau_count, "tau grid size");
        cmd->add_option("--out-dir", config.out_dir, "output directory")->required();
        cmd->add_option("--out-prefix", config.out_prefix, "artifact name prefix");
        cmd->add_option("--seed", config.seed, "seed echoed into artifacts");
    };

    auto* sweep_cmd =
        app.add_subcommand("sweep", "Fit a rejector and sweep thresholds");
    drr::RunConfig sweep_config;
    std::string sw_fit_format = "csv", sw_fit_scores = "probs";
    std::string sw_eval_format = "csv", sw_eval_scores = "probs";
    std::string sw_calib_format = "csv", sw_kind = "kl", sw_loss = "zero-one";
    add_pipeline_flags(sweep_cmd, sweep_config, sw_fit_format, sw_fit_scores,
                       sw_eval_format, sw_eval_scores, sw_calib_format, sw_kind,
                       sw_loss);

    auto* target_cmd = app.add_subcommand(
        "target-coverage", "Sweep thresholds and pick tau for a coverage target");
    drr::RunConfig target_config;
    std::string tg_fit_format = "csv", tg_fit_scores = "probs";
    std::string tg_eval_format = "csv", tg_eval_scores = "probs";
    std::string tg_calib_format = "csv", tg_kind = "kl", tg_loss = "zero-one";
    add_pipeline_flags(target_cmd, target_config, tg_fit_format, tg_fit_scores,
                       tg_eval_format, tg_eval_scores, tg_calib_format, tg_kind,
                       tg_loss);
    double target_value = 0.8;
    target_cmd->add_option("--target", target_value, "coverage target in (0, 1]")
        ->required();

    // synth
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic known-posterior task and samples");
    std::size_t sy_support = 50, sy_classes = 2, sy_n_fit = 1000, sy_n_eval = 1000;
    double sy_concentration = 1.0, sy_noise = 0.0;
    std::string sy_style = "dirichlet", sy_levels = "0.99:0.3,0.9:0.3,0.55:0.2,0.3:0.2";
    std::uint64_t sy_seed = 0;
    std::string sy_prefix;
    synth->add_option("--support", sy_support, "support size M");
    synth->add_option("--classes", sy_classes, "class count K");
    synth->add_option("--style", sy_style, "posterior style (dirichlet|leveled)");
    synth->add_option("--concentration", sy_concentration,
                      "Dirichlet concentration (dirichlet style)");
    synth->add_option("--levels", sy_levels,
                      "top_prob:mass pairs, comma separated (leveled style)");
    synth->add_option("--noise", sy_noise, "symmetric label-noise rate on the fit split");
    synth->add_option("--n-fit", sy_n_fit, "fit sample size");
    synth->add_option("--n-eval", sy_n_eval, "clean eval sample size");
    synth->add_option("--seed", sy_seed, "generation seed");
    synth->add_option("--out-prefix", sy_prefix, "output path prefix")->required();

    // check-bounds
    auto* bounds = app.add_subcommand(
        "check-bounds", "Monte-Carlo check of the deviation bounds");
    std::string bd_task, bd_which = "kl", bd_loss = "zero-one", bd_out;
    std::size_t bd_n = 10000, bd_m = 10, bd_trials = 400;
    double bd_delta = 0.05, bd_lambda = 1.0;
    std::uint64_t bd_seed = 0;
    bool bd_no_rate = false;
    bounds->add_option("--task", bd_task, "task json path")->required();
    bounds->add_option("--which", bd_which, "bound family (kl|chi2)");
    bounds->add_option("--loss", bd_loss, "plugin loss for the pointwise risk");
    bounds->add_option("--n", bd_n, "resample size");
    bounds->add_option("--m", bd_m, "test-point count");
    bounds->add_option("--delta", bd_delta, "confidence level");
    bounds->add_option("--lambda", bd_lambda, "regularization strength");
    bounds->add_option("--trials", bd_trials, "Monte-Carlo trials");
    bounds->add_option("--seed", bd_seed, "resampling seed");
    bounds->add_flag("--no-rate-check", bd_no_rate, "skip the 100n rate pair");
    bounds->add_option("--out", bd_out, "report json output path");

    // dro
    auto* dro = app.add_subcommand(
        "dro", "Worst-case reweighting and the dual radius search");
    IoFlags dro_input;
    add_input_flags(dro, dro_input, "input");
    std::string dro_kind = "kl", dro_loss = "zero-one", dro_out;
    double dro_alpha = 1.0, dro_lambda = 1.0;
    std::optional<double> dro_epsilon;
    double dro_lo = 1e-2, dro_hi = 1e2;
    dro->add_option("--kind", dro_kind, "rejector family (kl|alpha|chi2)");
    dro->add_option("--alpha", dro_alpha, "alpha for the alpha family");
    dro->add_option("--lambda", dro_lambda, "regularization strength");
    dro->add_option("--loss", dro_loss, "loss kind");
    dro->add_option("--epsilon", dro_epsilon,
                    "robustness radius; triggers the dual lambda search");
    dro->add_option("--lambda-lo", dro_lo, "dual search lower lambda");
    dro->add_option("--lambda-hi", dro_hi, "dual search upper lambda");
    dro->add_option("--out", dro_out, "adversarial weights csv output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return drr::ConfigError::exit_code;
    }

    try {
        if (cal->parsed()) {
            return run_calibrate(cal_input, cal_out);
        }
        if (fit->parsed()) {
            std::optional<drr::CalibrationModel> calibration;
            if (!fit_calib_path.empty()) {
                if (fit_calib_path == fit_input.path) {
                    throw drr::ConfigError(
                        "calibration split must be distinct from the fit split");
                }
                if (drr::score_type_from_string(fit_input.score_type) !=
                    drr::ScoreType::logits) {
                    throw drr::ConfigError(
                        "temperature calibration needs logit scores on the fit split");
                }
                const drr::Dataset calib = drr::ingest(
                    fit_calib_path, drr::file_format_from_string(fit_calib_format),
                    drr::ScoreType::logits);
                if (!calib.all_labeled) {
                    throw drr::DataError("calibration input must be fully labeled");
                }
                std::vector<std::vector<double>> logits;
                std::vector<int> labels;
                for (const auto& rec : calib.records) {
                    logits.push_back(rec.scores);
                    labels.push_back(*rec.label);
                }
                calibration = drr::fit_temperature(logits, labels);
            }
            const drr::Dataset data = read_dataset(fit_input);
            const auto probs =
                dataset_probabilities(data, fit_input.score_type, calibration);
            std::vector<std::string> ids;
            for (const auto& rec : data.records) ids.push_back(rec.id);
            const drr::LossKind loss = drr::loss_kind_from_string(fit_loss);
            const drr::PointwiseRisk risk =
                drr::pointwise_risk_plugin(ids, probs, loss, fit_floor);
            const drr::DiscreteDistribution p_hat =
                drr::DiscreteDistribution::uniform(std::move(ids));
            drr::RejectorSpec spec{drr::rejector_kind_from_string(fit_kind),
                                   fit_alpha, fit_lambda};
            drr::RejectorArtifact artifact;
            artifact.rejector = drr::fit_rejector(spec, p_hat, risk);
            artifact.loss = loss;
            artifact.prob_floor = fit_floor;
            if (calibration.has_value()) {
                artifact.temperature = calibration->temperature;
            }
            artifact.fit_support_size = data.records.size();
            artifact.seed = fit_seed;
            drr::save_rejector(fit_out, artifact);
            std::cout << "kind " << drr::to_string(artifact.rejector.spec.kind)
                      << "\nnormalizer "
                      << drr::format_significant(artifact.rejector.normalizer)
                      << "\nwrote " << fit_out << "\n";
            return 0;
        }
        if (sweep_cmd->parsed() || target_cmd->parsed()) {
            drr::RunConfig& config =
                sweep_cmd->parsed() ? sweep_config : target_config;
            const std::string& kind = sweep_cmd->parsed() ? sw_kind : tg_kind;
            const std::string& loss = sweep_cmd->parsed() ? sw_loss : tg_loss;
            config.fit_format = drr::file_format_from_string(
                sweep_cmd->parsed() ? sw_fit_format : tg_fit_format);
            config.fit_score_type = drr::score_type_from_string(
                sweep_cmd->parsed() ? sw_fit_scores : tg_fit_scores);
            config.eval_format = drr::file_format_from_string(
                sweep_cmd->parsed() ? sw_eval_format : tg_eval_format);
            config.eval_score_type = drr::score_type_from_string(
                sweep_cmd->parsed() ? sw_eval_scores : tg_eval_scores);
            config.calibration_format = drr::file_format_from_string(
                sweep_cmd->parsed() ? sw_calib_format : tg_calib_format);
            config.spec.kind = drr::rejector_kind_from_string(kind);
            config.loss = drr::loss_kind_from_string(loss);
            if (target_cmd->parsed()) config.coverage_target = target_value;
            const drr::PipelineResult result = drr::run_pipeline(config);
            std::cout << "wrote " << result.sweep_csv_path << "\nwrote "
                      << result.sidecar_json_path << "\n";
            if (result.selection.has_value()) {
                std::cout << "tau " << drr::format_significant(result.selection->tau)
                          << "\nachieved_coverage "
                          << drr::format_significant(
                                 result.selection->achieved_coverage)
                          << "\n";
            }
            return 0;
        }
        if (synth->parsed()) {
            drr::SyntheticTask task;
            if (sy_style == "dirichlet") {
                task = drr::make_dirichlet_task(sy_support, sy_classes,
                                                sy_concentration, sy_seed, sy_noise);
            } else if (sy_style == "leveled") {
                std::vector<drr::ConfidenceLevel> levels;
                std::stringstream ss(sy_levels);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos) {
                        throw drr::ConfigError("levels must be top_prob:mass pairs");
                    }
                    levels.push_back(
                        drr::ConfidenceLevel{std::stod(item.substr(0, colon)),
                                             std::stod(item.substr(colon + 1))});
                }
                task = drr::make_leveled_task(sy_support, sy_classes, levels,
                                              sy_seed, sy_noise);
            } else {
                throw drr::ConfigError("unknown task style: " + sy_style);
            }
            drr::save_task(sy_prefix + "_task.json", task);

            const auto to_records = [&](const drr::SyntheticSample& sample,
                                        bool noisy) {
                std::vector<drr::PredictionRecord> records(sample.labels.size());
                for (std::size_t i = 0; i < sample.labels.size(); ++i) {
                    records[i].id = "r" + std::to_string(i);
                    records[i].label =
                        noisy ? sample.labels[i] : sample.clean_labels[i];
                    records[i].scores = task.posterior[sample.point_index[i]];
                }
                return records;
            };
            const drr::SyntheticSample fit_sample = drr::generate_synthetic(
                task, sy_n_fit, drr::split_seed(sy_seed, 1));
            write_predictions_csv(sy_prefix + "_fit.csv",
                                  to_records(fit_sample, /*noisy=*/true));
            const drr::SyntheticSample eval_sample = drr::generate_synthetic(
                task, sy_n_eval, drr::split_seed(sy_seed, 2));
            write_predictions_csv(sy_prefix + "_eval.csv",
                                  to_records(eval_sample, /*noisy=*/false));
            std::cout << "wrote " << sy_prefix << "_task.json\nwrote " << sy_prefix
                      << "_fit.csv\nwrote " << sy_prefix << "_eval.csv\n";
            return 0;
        }
        if (bounds->parsed()) {
            const drr::SyntheticTask task = drr::load_task(bd_task);
            const drr::LossKind loss = drr::loss_kind_from_string(bd_loss);
            const drr::PointwiseRisk risk = drr::pointwise_risk_plugin(
                task.marginal.ids(), task.posterior, loss);
            const double range_bound = drr::loss_bound(loss);
            drr::BoundCheckReport report;
            if (bd_which == "kl") {
                report = drr::check_kl_bound(task, risk, range_bound, bd_n, bd_m,
                                             bd_delta, bd_lambda, bd_trials,
                                             bd_seed, !bd_no_rate);
            } else if (bd_which == "chi2") {
                report = drr::check_chi2_bound(task, risk, range_bound, bd_n, bd_m,
                                               bd_delta, bd_lambda, bd_trials,
                                               bd_seed, !bd_no_rate);
            } else {
                throw drr::ConfigError("unknown bound family: " + bd_which);
            }
            json j = {
                {"n", report.n},
                {"m_test", report.m_test},
                {"delta", report.delta},
                {"lambda", report.lambda},
                {"range_bound", report.range_bound},
                {"trials", report.trials},
                {"bound_value", report.bound_value},
                {"violation_count", report.violation_count},
                {"violation_frequency", report.violation_frequency},
                {"violation_threshold", report.violation_threshold},
                {"violated", report.violated},
                {"median_sup_error", report.median_sup_error},
            };
            if (!bd_no_rate) {
                j["median_sup_error_100n"] = report.median_sup_error_large;
            }
            const std::string text = j.dump(2);
            std::cout << text << "\n";
            if (!bd_out.empty()) {
                std::ofstream out(bd_out, std::ios::binary);
                if (!out) throw drr::DataError("cannot open output file: " + bd_out);
                out << text << "\n";
            }
            return report.violated ? drr::SolverError::exit_code : 0;
        }
        if (dro->parsed()) {
            const drr::Dataset data = read_dataset(dro_input);
            const auto probs =
                dataset_probabilities(data, dro_input.score_type, std::nullopt);
            std::vector<std::string> ids;
            for (const auto& rec : data.records) ids.push_back(rec.id);
            const drr::LossKind loss = drr::loss_kind_from_string(dro_loss);
            const drr::PointwiseRisk risk =
                drr::pointwise_risk_plugin(ids, probs, loss);
            const drr::DiscreteDistribution p_hat =
                drr::DiscreteDistribution::uniform(std::move(ids));
            drr::DiscreteDistribution adversarial;
            if (dro_epsilon.has_value()) {
                drr::DroConfig config;
                config.epsilon = *dro_epsilon;
                config.lambda_lo = dro_lo;
                config.lambda_hi = dro_hi;
                const drr::DroDualResult result =
                    drr::dro_dual_search(p_hat, risk, dro_alpha, config);
                adversarial = result.adversarial;
                std::cout << "lambda_star "
                          << drr::format_significant(result.lambda_star)
                          << "\ndivergence "
                          << drr::format_significant(result.divergence_value)
                          << "\ndual_value "
                          << drr::format_significant(result.dual_value) << "\n";
                if (result.boundary != drr::DroBoundary::interior) {
                    std::cerr << "warning: lambda_star sits at the "
                              << (result.boundary == drr::DroBoundary::lower
                                      ? "lower"
                                      : "upper")
                              << " end of the search range; widen it\n";
                }
            } else {
                drr::RejectorSpec spec{drr::rejector_kind_from_string(dro_kind),
                                       dro_alpha, dro_lambda};
                adversarial = drr::dro_adversarial(p_hat, risk, spec);
            }
            if (!dro_out.empty()) {
                std::ostringstream out;
                out << "id,weight\n";
                for (std::size_t i = 0; i < adversarial.size(); ++i) {
                    out << adversarial.id(i) << ','
                        << drr::format_significant(adversarial.weight(i)) << '\n';
                }
                std::ofstream file(dro_out, std::ios::binary);
                if (!file) throw drr::DataError("cannot open output file: " + dro_out);
                file << out.str();
                std::cout << "wrote " << dro_out << "\n";
            }
            return 0;
        }
    } catch (const drr::ConfigError& e) {
        std::cerr << "error[config]: " << e.what() << "\n";
        return drr::ConfigError::exit_code;
    } catch (const drr::DataError& e) {
        std::cerr << "error[data]: " << e.what() << "\n";
        return drr::DataError::exit_code;
    } catch (const drr::SolverError& e) {
        std::cerr << "error[solver]: " << e.what() << "\n";
        return drr::SolverError::exit_code;
    } catch (const std::domain_error& e) {
        std::cerr << "error[solver]: " << e.what() << "\n";
        return drr::SolverError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
