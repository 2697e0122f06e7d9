#include "drr/losses.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "drr/errors.hpp"

namespace drr {

namespace {

constexpr double kProbSumTol = 1e-9;

void validate_probability_vector(const std::vector<double>& h,
                                 std::size_t row) {
    if (h.empty()) {
        throw DataError("empty probability vector at row " + std::to_string(row));
    }
    double sum = 0.0;
    for (double v : h) {
        if (!std::isfinite(v)) {
            throw DataError("non-finite probability at row " + std::to_string(row));
        }
        if (v < -1e-12) {
            throw DataError("negative probability at row " + std::to_string(row));
        }
        sum += v;
    }
    if (std::fabs(sum - 1.0) > kProbSumTol) {
        throw DataError("probability vector at row " + std::to_string(row) +
                        " sums to " + std::to_string(sum) + ", expected 1");
    }
}

double compute_plugin(const std::vector<double>& h, LossKind kind,
                      double prob_floor) {
    double value = 0.0;
    switch (kind) {
        case LossKind::zero_one:
            value = 1.0 - *std::max_element(h.begin(), h.end());
            break;
        case LossKind::log_loss:
            for (double v : h) {
                value -= v * std::log(std::max(v, prob_floor));
            }
            break;
        case LossKind::brier: {
            double sq = 0.0;
            for (double v : h) sq += v * v;
            value = 1.0 - sq;
            break;
        }
    }
    return std::clamp(value, 0.0, loss_bound(kind, prob_floor));
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "zero-one" || name == "zero_one" || name == "01") return LossKind::zero_one;
    if (name == "log" || name == "log-loss" || name == "log_loss") return LossKind::log_loss;
    if (name == "brier") return LossKind::brier;
    throw ConfigError("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::zero_one: return "zero-one";
        case LossKind::log_loss: return "log";
        case LossKind::brier: return "brier";
    }
    return "unknown";
}

double loss_bound(LossKind kind, double prob_floor) {
    switch (kind) {
        case LossKind::zero_one: return 1.0;
        case LossKind::log_loss: return -std::log(prob_floor);
        case LossKind::brier: return 1.0;
    }
    return 1.0;
}

double PointwiseRisk::at(const std::string& id) const {
    auto it = values.find(id);
    if (it == values.end()) {
        throw DataError("no pointwise risk recorded for id: " + id);
    }
    return it->second;
}

double plugin_risk_value(const std::vector<double>& probabilities,
                         LossKind kind, double prob_floor) {
    if (prob_floor <= 0.0 || prob_floor >= 1.0) {
        throw ConfigError("probability floor must lie in (0, 1)");
    }
    validate_probability_vector(probabilities, 0);
    return compute_plugin(probabilities, kind, prob_floor);
}

PointwiseRisk pointwise_risk_plugin(
    const std::vector<std::string>& ids,
    const std::vector<std::vector<double>>& probabilities, LossKind kind,
    double prob_floor) {
    if (ids.size() != probabilities.size()) {
        throw DataError("ids and probability rows differ in length");
    }
    if (prob_floor <= 0.0 || prob_floor >= 1.0) {
        throw ConfigError("probability floor must lie in (0, 1)");
    }
    PointwiseRisk risk;
    risk.bound = loss_bound(kind, prob_floor);
    risk.values.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        validate_probability_vector(probabilities[i], i);
        const double value = compute_plugin(probabilities[i], kind, prob_floor);
        if (!risk.values.emplace(ids[i], value).second) {
            throw DataError("duplicate id in risk computation: " + ids[i]);
        }
    }
    return risk;
}

PointwiseRisk pointwise_risk_direct(
    const std::vector<std::string>& ids, const std::vector<double>& values) {
    if (ids.size() != values.size()) {
        throw DataError("ids and risk values differ in length");
    }
    PointwiseRisk risk;
    risk.bound = 0.0;
    risk.values.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0) {
            throw DataError("pointwise risk for id " + ids[i] +
                            " must be finite and non-negative");
        }
        if (!risk.values.emplace(ids[i], values[i]).second) {
            throw DataError("duplicate id in risk values: " + ids[i]);
        }
        risk.bound = std::max(risk.bound, values[i]);
    }
    return risk;
}

}  // namespace drr
