#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace drr {

enum class LossKind { zero_one, log_loss, brier };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

// Probabilities are floored at this value before any logarithm; the log-loss
// range bound is -log(kProbFloor).
inline constexpr double kProbFloor = 1e-12;

// Upper bound B on the pointwise risk for a loss kind (enters the
// generalization-bound constants).
double loss_bound(LossKind kind, double prob_floor = kProbFloor);

// Pointwise risk L'(x) per point id, together with its range bound B.
// All values lie in [0, B].
struct PointwiseRisk {
    std::unordered_map<std::string, double> values;
    double bound = 0.0;

    double at(const std::string& id) const;
};

// Plugin risk of a single probability vector; validates the vector first.
double plugin_risk_value(const std::vector<double>& probabilities,
                         LossKind kind, double prob_floor = kProbFloor);

// Plugin estimate of the pointwise risk: the expected loss of predicting
// from h(x) when the label is drawn from h(x) itself.
//   zero_one : 1 - max_y h_y
//   log_loss : sum_y -h_y * log(max(h_y, floor))   (Shannon entropy, floored)
//   brier    : 1 - sum_y h_y^2
// Each probability vector must be non-negative and sum to 1 within 1e-9.
PointwiseRisk pointwise_risk_plugin(
    const std::vector<std::string>& ids,
    const std::vector<std::vector<double>>& probabilities, LossKind kind,
    double prob_floor = kProbFloor);

// Direct injection of externally computed pointwise risks (e.g. conditional
// variances in regression). Values must be finite and non-negative; the
// bound is their maximum.
PointwiseRisk pointwise_risk_direct(
    const std::vector<std::string>& ids, const std::vector<double>& values);

}  // namespace drr
