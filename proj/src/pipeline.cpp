#include "drr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>

#include <json.hpp>

#include "drr/errors.hpp"

namespace drr {

namespace {

using nlohmann::json;

// Per-record probabilities: pass probs through, push logits through the
// (possibly identity) temperature model.
std::vector<std::vector<double>> to_probabilities(
    const Dataset& data, ScoreType type,
    const std::optional<CalibrationModel>& calibration) {
    std::vector<std::vector<double>> probs;
    probs.reserve(data.records.size());
    if (type == ScoreType::probs) {
        for (const auto& rec : data.records) probs.push_back(rec.scores);
        return probs;
    }
    CalibrationModel model;  // identity temperature unless calibrated
    if (calibration.has_value()) model = *calibration;
    for (const auto& rec : data.records) {
        probs.push_back(apply_temperature(model, rec.scores));
    }
    return probs;
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    if (config.fit_path.empty()) {
        throw ConfigError("fit input path is required");
    }
    if (config.out_dir.empty()) {
        throw ConfigError("output directory is required");
    }
    if (config.tau_count == 0) {
        throw ConfigError("tau grid needs at least one point");
    }
    const bool calibrate = !config.calibration_path.empty();
    if (calibrate && config.calibration_path == config.fit_path) {
        throw ConfigError("calibration split must be distinct from the fit split");
    }
    if (calibrate && config.fit_score_type != ScoreType::logits) {
        throw ConfigError("temperature calibration needs logit scores on the fit split");
    }

    const Dataset fit_data = ingest(config.fit_path, config.fit_format,
                                    config.fit_score_type);

    std::optional<CalibrationModel> calibration;
    if (calibrate) {
        const Dataset calib_data = ingest(config.calibration_path,
                                          config.calibration_format,
                                          ScoreType::logits);
        if (!calib_data.all_labeled) {
            throw DataError("calibration split must be fully labeled");
        }
        std::vector<std::vector<double>> logits;
        std::vector<int> labels;
        logits.reserve(calib_data.records.size());
        labels.reserve(calib_data.records.size());
        for (const auto& rec : calib_data.records) {
            logits.push_back(rec.scores);
            labels.push_back(*rec.label);
        }
        calibration = fit_temperature(logits, labels);
    }

    // Fit split: risk per atom, empirical distribution uniform over atoms.
    const auto fit_probs =
        to_probabilities(fit_data, config.fit_score_type, calibration);
    std::vector<std::string> fit_ids;
    fit_ids.reserve(fit_data.records.size());
    for (const auto& rec : fit_data.records) fit_ids.push_back(rec.id);
    const PointwiseRisk fit_risk =
        pointwise_risk_plugin(fit_ids, fit_probs, config.loss, config.prob_floor);
    const DiscreteDistribution p_hat =
        DiscreteDistribution::uniform(std::vector<std::string>(fit_ids));

    PipelineResult result;
    result.rejector = fit_rejector(config.spec, p_hat, fit_risk);
    result.calibration = calibration;

    // Evaluation split (defaults to the fit split).
    const bool same_split = config.eval_path.empty();
    const Dataset eval_data =
        same_split ? fit_data
                   : ingest(config.eval_path, config.eval_format,
                            config.eval_score_type);
    const ScoreType eval_type =
        same_split ? config.fit_score_type : config.eval_score_type;
    if (!eval_data.all_labeled) {
        throw DataError("evaluation split must be fully labeled to sweep accuracy");
    }
    const auto eval_probs = to_probabilities(eval_data, eval_type, calibration);
    std::vector<std::string> eval_ids;
    eval_ids.reserve(eval_data.records.size());
    for (const auto& rec : eval_data.records) eval_ids.push_back(rec.id);
    const PointwiseRisk eval_risk =
        pointwise_risk_plugin(eval_ids, eval_probs, config.loss, config.prob_floor);

    std::vector<EvalPoint> points;
    points.reserve(eval_data.records.size());
    for (std::size_t i = 0; i < eval_data.records.size(); ++i) {
        points.push_back(EvalPoint{eval_ids[i], *eval_data.records[i].label,
                                   argmax(eval_probs[i])});
    }

    const auto taus = default_tau_grid(config.tau_count);
    result.rows = sweep(result.rejector, eval_risk, points, taus);
    if (config.coverage_target.has_value()) {
        result.selection =
            select_tau_for_coverage(result.rows, *config.coverage_target);
    }

    // Ratio summary: thresholds cap at 1, so points with ratio above 1 are
    // unrejectable at any tau; reports carry that coverage floor.
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = -std::numeric_limits<double>::infinity();
    std::size_t above_one = 0;
    for (const auto& pt : points) {
        const double rho = evaluate_ratio(result.rejector, eval_risk.at(pt.id));
        min_ratio = std::min(min_ratio, rho);
        max_ratio = std::max(max_ratio, rho);
        if (rho > 1.0) above_one++;
    }

    std::filesystem::create_directories(config.out_dir);
    const std::string base =
        (std::filesystem::path(config.out_dir) / config.out_prefix).string();
    result.sweep_csv_path = base + "_sweep.csv";
    result.sidecar_json_path = base + "_run.json";
    write_sweep_csv(result.sweep_csv_path, result.rows);

    json sidecar;
    sidecar["config"] = {
        {"kind", to_string(config.spec.kind)},
        {"alpha", config.spec.alpha},
        {"lambda", config.spec.lambda},
        {"loss", to_string(config.loss)},
        {"prob_floor", config.prob_floor},
        {"tau_count", config.tau_count},
        {"fit_path", config.fit_path},
        {"fit_format", to_string(config.fit_format)},
        {"fit_score_type", to_string(config.fit_score_type)},
        {"eval_path", same_split ? config.fit_path : config.eval_path},
        {"calibration_path", config.calibration_path},
        {"seed", config.seed},
    };
    if (config.coverage_target.has_value()) {
        sidecar["config"]["coverage_target"] = *config.coverage_target;
    } else {
        sidecar["config"]["coverage_target"] = nullptr;
    }
    sidecar["rejector"] = {
        {"normalizer", result.rejector.normalizer},
        {"mean_risk", result.rejector.mean_risk},
        {"fit_support_size", fit_data.records.size()},
    };
    if (calibration.has_value()) {
        sidecar["calibration"] = {
            {"temperature", calibration->temperature},
            {"final_nll", calibration->final_nll},
            {"at_boundary", calibration->at_boundary},
        };
    } else {
        sidecar["calibration"] = nullptr;
    }
    sidecar["ratio_summary"] = {
        {"min", min_ratio},
        {"max", max_ratio},
        {"unrejectable_fraction",
         static_cast<double>(above_one) / static_cast<double>(points.size())},
    };
    if (result.selection.has_value()) {
        sidecar["selection"] = {
            {"tau", result.selection->tau},
            {"achieved_coverage", result.selection->achieved_coverage},
        };
    } else {
        sidecar["selection"] = nullptr;
    }
    std::ofstream out(result.sidecar_json_path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open output file: " + result.sidecar_json_path);
    }
    out << sidecar.dump(2) << "\n";
    return result;
}

}  // namespace drr
