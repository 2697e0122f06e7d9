#pragma once

#include <vector>

namespace drr {

// Single-parameter temperature scaling fitted on a held-out labeled split.
// temperature is clamped to [0.05, 20]; at_boundary reports a fit that ran
// into either end of that box.
struct CalibrationModel {
    double temperature = 1.0;
    double final_nll = 0.0;
    bool at_boundary = false;
};

// Minimizes the mean negative log-likelihood of labels under
// softmax(logits / T): coarse log-spaced grid (64 points in [0.05, 20])
// followed by golden-section refinement to |dT| <= 1e-4. T = 1 is always a
// candidate, so the fitted NLL never exceeds the uncalibrated NLL, and ties
// within 1e-12 resolve to T = 1.
CalibrationModel fit_temperature(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels);

// softmax(logits / T) with max subtraction; output sums to 1 within 1e-12.
// Argmax is invariant for any positive temperature.
std::vector<double> apply_temperature(const CalibrationModel& model,
                                      const std::vector<double>& logits);

// Mean negative log-likelihood of labels under softmax(logits / T).
double mean_nll(const std::vector<std::vector<double>>& logits,
                const std::vector<int>& labels, double temperature);

}  // namespace drr
