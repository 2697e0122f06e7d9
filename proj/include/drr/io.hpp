#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drr/calibration.hpp"
#include "drr/evaluation.hpp"
#include "drr/losses.hpp"
#include "drr/rejectors.hpp"

namespace drr {

enum class FileFormat { csv, jsonl };
enum class ScoreType { probs, logits };

FileFormat file_format_from_string(const std::string& name);
ScoreType score_type_from_string(const std::string& name);
std::string to_string(FileFormat format);
std::string to_string(ScoreType type);

// One model output row: per-class scores plus an optional integer label.
struct PredictionRecord {
    std::string id;
    std::optional<int> label;
    std::vector<double> scores;
};

struct Dataset {
    std::vector<PredictionRecord> records;
    std::size_t classes = 0;
    bool all_labeled = false;
};

// Reads a prediction file.
//   csv   : header "id,label,s0,...,s{K-1}" or "id,s0,...,s{K-1}";
//           an empty label cell marks an unlabeled row.
//   jsonl : one object per line, {"id": ..., "label": ..., "scores": [...]},
//           label optional or null.
// Ids must be unique, scores finite and rectangular; probability inputs
// must be non-negative and sum to 1 within 1e-9. Errors name the offending
// row.
Dataset ingest(const std::string& path, FileFormat format, ScoreType type);

// Writes "tau,coverage,accuracy,selective_risk,n_accepted" rows with 12
// significant digits; accuracy and selective_risk cells are empty at zero
// coverage.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

// Writes records in the csv schema above (label column always present;
// unlabeled rows leave it empty).
void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRecord>& records);

std::string format_significant(double value);  // 12 significant digits

// Rejector artifact: everything needed to evaluate ratios on fresh points,
// including the loss and calibration settings that produced the risks.
struct RejectorArtifact {
    DensityRatioRejector rejector;
    LossKind loss = LossKind::zero_one;
    double prob_floor = kProbFloor;
    std::optional<double> temperature;
    std::size_t fit_support_size = 0;
    std::uint64_t seed = 0;
};

void save_rejector(const std::string& path, const RejectorArtifact& artifact);
RejectorArtifact load_rejector(const std::string& path);

void save_calibration(const std::string& path, const CalibrationModel& model);
CalibrationModel load_calibration(const std::string& path);

void save_task(const std::string& path, const SyntheticTask& task);
SyntheticTask load_task(const std::string& path);

}  // namespace drr
