#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drr/calibration.hpp"
#include "drr/evaluation.hpp"
#include "drr/io.hpp"
#include "drr/rejectors.hpp"

namespace drr {

// End-to-end run: ingest, optional temperature calibration, pointwise risk,
// rejector fit, threshold sweep, optional coverage targeting, artifacts.
struct RunConfig {
    std::string fit_path;
    FileFormat fit_format = FileFormat::csv;
    ScoreType fit_score_type = ScoreType::probs;

    // Empty eval_path reuses the fit split (and its format/score type).
    std::string eval_path;
    FileFormat eval_format = FileFormat::csv;
    ScoreType eval_score_type = ScoreType::probs;

    // Empty disables calibration. Must be a labeled logits file distinct
    // from the fit input (held-out split guard).
    std::string calibration_path;
    FileFormat calibration_format = FileFormat::csv;

    RejectorSpec spec;
    LossKind loss = LossKind::zero_one;
    double prob_floor = kProbFloor;
    std::size_t tau_count = 50;
    std::optional<double> coverage_target;

    std::string out_dir;
    std::string out_prefix = "run";
    std::uint64_t seed = 0;
};

struct PipelineResult {
    DensityRatioRejector rejector;
    std::optional<CalibrationModel> calibration;
    std::vector<SweepRow> rows;
    std::optional<CoverageSelection> selection;
    std::string sweep_csv_path;
    std::string sidecar_json_path;
};

PipelineResult run_pipeline(const RunConfig& config);

}  // namespace drr
