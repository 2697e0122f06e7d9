#pragma once

#include <string>
#include <vector>

#include "drr/divergences.hpp"
#include "drr/losses.hpp"

namespace drr {

enum class RejectorKind { kl, alpha_pos, chi_square };

RejectorKind rejector_kind_from_string(const std::string& name);
std::string to_string(RejectorKind kind);

// Which density-ratio family to fit and at what regularization strength.
// alpha is only meaningful for alpha_pos: alpha = 1 is served by the KL
// family, alpha in (1, 1.01) is rejected (the exponent 2/(alpha-1) would
// exceed 200), alpha <= -1 and alpha in (-1, 1) are unsupported.
struct RejectorSpec {
    RejectorKind kind = RejectorKind::kl;
    double alpha = 1.0;
    double lambda = 1.0;
};

// A fitted density-ratio rejector. The normalizer is frozen at fit time;
// evaluating fresh points reuses it without re-normalization. Instances are
// immutable after fitting and safe to share across threads.
//
//   kl         : rho(v) = exp(-v/lambda) / Z
//   alpha_pos  : rho(v) = max(0, (alpha-1)/2 * (b - v/lambda))^(2/(alpha-1))
//   chi_square : rho(v) = max(0, 1 + (mean_risk - v)/lambda)
//
// normalizer is Z for kl and b for the others (chi_square implies
// b = 1 + mean_risk/lambda).
struct DensityRatioRejector {
    RejectorSpec spec;
    double normalizer = 1.0;
    double mean_risk = 0.0;        // chi_square only
    double kl_shift = 0.0;         // kl only: min risk/lambda, for stable exp
    double kl_scale = 1.0;         // kl only: normalizer in shifted space
    DiscreteDistribution fit_distribution;
};

DensityRatioRejector fit_kl(const DiscreteDistribution& p,
                            const PointwiseRisk& risk, double lambda);

// Solves the scalar normalization equation for b by bisection (geometric
// bracket expansion above b_lo = min risk/lambda, residual tolerance 1e-8,
// at most 200 iterations). Requires alpha = 1 (routed to fit_kl) or
// alpha >= 1.01.
DensityRatioRejector fit_alpha_pos(const DiscreteDistribution& p,
                                   const PointwiseRisk& risk, double alpha,
                                   double lambda);

// Closed form for the alpha = 3 family. Requires
// lambda > max risk - mean risk; the error message names the bound.
DensityRatioRejector fit_chi_square(const DiscreteDistribution& p,
                                    const PointwiseRisk& risk, double lambda);

// Dispatch on spec.kind (alpha_pos with alpha = 1 routes to fit_kl).
DensityRatioRejector fit_rejector(const RejectorSpec& spec,
                                  const DiscreteDistribution& p,
                                  const PointwiseRisk& risk);

// Density ratio at a fresh point with the given pointwise risk. Pureformula
// application with the stored normalizer.
double evaluate_ratio(const DensityRatioRejector& rejector, double risk_value);

// Threshold rule: reject exactly when evaluate_ratio(...) <= tau.
// tau must lie in (0, 1].
struct RatioRejectionRule {
    DensityRatioRejector rejector;
    double tau = 1.0;
};

RatioRejectionRule make_rule(DensityRatioRejector rejector, double tau);
bool reject(const RatioRejectionRule& rule, double risk_value);

// Classical fixed-cost rejection baseline on known class posteriors:
// predict the posterior mode, reject exactly when the pointwise Bayes risk
// reaches the rejection cost. cost must lie in (0, 0.5).
struct ChowResult {
    std::vector<bool> rejects;
    std::vector<int> bayes_labels;
    std::vector<double> bayes_risks;
};

ChowResult chow_oracle(const std::vector<std::vector<double>>& posteriors,
                       double cost, LossKind kind = LossKind::zero_one);

// Worst-case reweighting: the idealized distribution of the same family
// fitted on the negated risk, returned as Q = P * rho.
DiscreteDistribution dro_adversarial(const DiscreteDistribution& p,
                                     const PointwiseRisk& risk,
                                     const RejectorSpec& spec);

// Search configuration for the dual robustness radius <-> regularization
// strength correspondence.
struct DroConfig {
    double epsilon = 0.1;
    double lambda_lo = 1e-2;
    double lambda_hi = 1e2;
    double tol_log = 1e-4;  // termination width in log(lambda)
};

enum class DroBoundary { interior, lower, upper };

struct DroDualResult {
    double lambda_star = 0.0;
    DroBoundary boundary = DroBoundary::interior;
    DiscreteDistribution adversarial;
    double dual_value = 0.0;        // -L(Q) + lambda * (D(P||Q) - epsilon)
    double divergence_value = 0.0;  // D_alpha(P || Q) at lambda_star
};

// Maximizes the concave dual -L(Q_lambda) + lambda*(D_alpha(P||Q_lambda) -
// epsilon) by golden-section over log(lambda). A maximizer at the range edge
// is reported through the boundary field; callers widen the range.
DroDualResult dro_dual_search(const DiscreteDistribution& p,
                              const PointwiseRisk& risk, double alpha,
                              const DroConfig& config);

}  // namespace drr
