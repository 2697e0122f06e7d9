#include "drr/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "drr/errors.hpp"

namespace drr {

namespace {

constexpr double kTempLo = 0.05;
constexpr double kTempHi = 20.0;
constexpr int kGridSize = 64;
constexpr double kRefineTol = 1e-4;
constexpr double kTieTol = 1e-12;

void validate_inputs(const std::vector<std::vector<double>>& logits,
                     const std::vector<int>& labels) {
    if (logits.empty() || logits.size() != labels.size()) {
        throw DataError("calibration needs equally many logit rows and labels");
    }
    const std::size_t classes = logits.front().size();
    if (classes < 2) {
        throw DataError("calibration needs at least two classes");
    }
    std::set<int> distinct;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (logits[i].size() != classes) {
            throw DataError("ragged logit rows (row " + std::to_string(i) + ")");
        }
        for (double v : logits[i]) {
            if (!std::isfinite(v)) {
                throw DataError("non-finite logit at row " + std::to_string(i));
            }
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw DataError("label out of range at row " + std::to_string(i));
        }
        distinct.insert(labels[i]);
    }
    if (distinct.size() < 2) {
        throw DataError("calibration refused: labels cover a single class");
    }
}

}  // namespace

double mean_nll(const std::vector<std::vector<double>>& logits,
                const std::vector<int>& labels, double temperature) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const auto& row = logits[i];
        double mx = row[0] / temperature;
        for (double v : row) mx = std::max(mx, v / temperature);
        double lse = 0.0;
        for (double v : row) lse += std::exp(v / temperature - mx);
        lse = mx + std::log(lse);
        total += lse - row[static_cast<std::size_t>(labels[i])] / temperature;
    }
    return total / static_cast<double>(logits.size());
}

CalibrationModel fit_temperature(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels) {
    validate_inputs(logits, labels);
    const auto nll = [&](double t) { return mean_nll(logits, labels, t); };

    // Coarse pass: log-spaced grid over the temperature box.
    const double log_lo = std::log(kTempLo), log_hi = std::log(kTempHi);
    std::vector<double> grid(kGridSize);
    for (int i = 0; i < kGridSize; ++i) {
        grid[static_cast<std::size_t>(i)] =
            std::exp(log_lo + (log_hi - log_lo) * i / (kGridSize - 1));
    }
    std::size_t best = 0;
    double best_nll = nll(grid[0]);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double v = nll(grid[i]);
        if (v < best_nll) {
            best_nll = v;
            best = i;
        }
    }

    // Refine inside the bracket around the best grid point.
    double lo = grid[best > 0 ? best - 1 : 0];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    constexpr double invphi = 0.6180339887498949;
    double c = hi - invphi * (hi - lo);
    double d = lo + invphi * (hi - lo);
    double fc = nll(c), fd = nll(d);
    while (hi - lo > kRefineTol) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - invphi * (hi - lo);
            fc = nll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + invphi * (hi - lo);
            fd = nll(d);
        }
    }
    double t_star = 0.5 * (lo + hi);
    double nll_star = nll(t_star);

    // T = 1 is always a candidate; ties resolve toward it.
    const double nll_one = nll(1.0);
    if (nll_one <= nll_star + kTieTol) {
        t_star = 1.0;
        nll_star = nll_one;
    }

    CalibrationModel model;
    model.temperature = t_star;
    model.final_nll = nll_star;
    model.at_boundary =
        (t_star - kTempLo <= 2.0 * kRefineTol) || (kTempHi - t_star <= 2.0 * kRefineTol);
    return model;
}

std::vector<double> apply_temperature(const CalibrationModel& model,
                                      const std::vector<double>& logits) {
    if (logits.empty()) {
        throw DataError("cannot apply temperature to an empty logit vector");
    }
    if (!std::isfinite(model.temperature) || model.temperature <= 0.0) {
        throw ConfigError("temperature must be finite and positive");
    }
    std::vector<double> out(logits.size());
    double mx = logits[0] / model.temperature;
    for (double v : logits) mx = std::max(mx, v / model.temperature);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] / model.temperature - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

}  // namespace drr
