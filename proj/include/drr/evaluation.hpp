#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drr/divergences.hpp"
#include "drr/losses.hpp"
#include "drr/rejectors.hpp"

namespace drr {

// One labeled evaluation point with its hard prediction.
struct EvalPoint {
    std::string id;
    int label = 0;
    int prediction = 0;
};

struct SweepRow {
    double tau = 0.0;
    double coverage = 0.0;
    std::optional<double> accuracy;        // absent when nothing is accepted
    std::optional<double> selective_risk;  // 0-1 risk over accepted, likewise
    std::size_t n_accepted = 0;
};

// k/count for k = 1..count; count = 50 is the reporting default.
std::vector<double> default_tau_grid(std::size_t count = 50);

// One row per threshold: accept exactly the points whose density ratio
// exceeds tau. Coverage is the accepted fraction of points; accuracy and
// the 0-1 selective risk average over accepted points only. Rows are sorted
// by coverage descending.
std::vector<SweepRow> sweep(const DensityRatioRejector& rejector,
                            const PointwiseRisk& risk,
                            const std::vector<EvalPoint>& points,
                            const std::vector<double>& taus);

struct CoverageSelection {
    double tau = 0.0;
    double achieved_coverage = 0.0;
};

// Largest tau whose coverage still meets the target. DataError when no row
// does; the message names the best achievable coverage.
CoverageSelection select_tau_for_coverage(const std::vector<SweepRow>& rows,
                                          double target);

// Finite-support classification task with known class posteriors.
// posterior rows align with marginal ids; label_noise_rate in [0, 0.5).
struct SyntheticTask {
    DiscreteDistribution marginal;
    std::vector<std::vector<double>> posterior;
    double label_noise_rate = 0.0;

    std::size_t classes() const {
        return posterior.empty() ? 0 : posterior.front().size();
    }
};

void validate_task(const SyntheticTask& task);

// Random task: marginal weights jittered around uniform, posteriors drawn
// from a symmetric Dirichlet with the given concentration.
SyntheticTask make_dirichlet_task(std::size_t support, std::size_t classes,
                                  double concentration, std::uint64_t seed,
                                  double label_noise_rate = 0.0);

// Task whose points sit at a few fixed confidence tiers: each level pins the
// posterior mode probability (top_prob) and carries a marginal mass share.
struct ConfidenceLevel {
    double top_prob = 0.9;
    double mass = 1.0;
};

SyntheticTask make_leveled_task(std::size_t support, std::size_t classes,
                                const std::vector<ConfidenceLevel>& levels,
                                std::uint64_t seed,
                                double label_noise_rate = 0.0);

// I.i.d. draws: point from the marginal, label from the point's posterior,
// then symmetric noise (with probability label_noise_rate the label is
// replaced by a uniform draw over the other classes).
struct SyntheticSample {
    std::vector<std::size_t> point_index;
    std::vector<int> clean_labels;
    std::vector<int> labels;
};

SyntheticSample generate_synthetic(const SyntheticTask& task, std::size_t n,
                                   std::uint64_t seed);

// Q = P * rho over the support of p, renormalized exactly.
DiscreteDistribution reweighted_distribution(const DensityRatioRejector& rejector,
                                             const DiscreteDistribution& p,
                                             const PointwiseRisk& risk);

// Total variation over the union of supports; missing ids carry zero mass.
double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q);

// Monte-Carlo check of a finite-sample uniform deviation bound for fitted
// ratios: resample P, refit, and compare sup_x |rho - rho_hat| on a fixed
// test subset against the bound. The rate pair (errors at n and 100*n)
// supports convergence-rate checks.
struct BoundCheckReport {
    std::size_t n = 0;
    std::size_t m_test = 0;
    double delta = 0.0;
    double lambda = 0.0;
    double range_bound = 0.0;  // assumed risk range B
    std::size_t trials = 0;
    double bound_value = 0.0;
    std::size_t violation_count = 0;
    double violation_frequency = 0.0;
    double violation_threshold = 0.0;  // delta + 3*sqrt(delta*(1-delta)/trials)
    bool violated = false;
    double median_sup_error = 0.0;
    double median_sup_error_large = 0.0;  // at 100*n; NaN when skipped
};

// Deviation bound for the exponential-tilt family:
//   exp(3B/lambda) * sinh(B/lambda) * sqrt(2/n * log(2m/delta)).
BoundCheckReport check_kl_bound(const SyntheticTask& task,
                                const PointwiseRisk& risk, double range_bound,
                                std::size_t n, std::size_t m_test, double delta,
                                double lambda, std::size_t trials,
                                std::uint64_t seed, bool with_rate_check = true);

// Deviation bound for the chi-square family (requires lambda > 2B):
//   (B/lambda) * sqrt(2/n * log(2m/delta)).
BoundCheckReport check_chi2_bound(const SyntheticTask& task,
                                  const PointwiseRisk& risk, double range_bound,
                                  std::size_t n, std::size_t m_test,
                                  double delta, double lambda,
                                  std::size_t trials, std::uint64_t seed,
                                  bool with_rate_check = true);

// Paired-sample check that the reweighted empirical distribution approaches
// the exact one: counts trials where TV at n_large is no worse than at
// n_small.
struct TvConvergenceReport {
    std::size_t trials = 0;
    std::size_t improved = 0;
    double improved_fraction = 0.0;
};

TvConvergenceReport tv_convergence_trials(const SyntheticTask& task,
                                          const PointwiseRisk& risk,
                                          const RejectorSpec& spec,
                                          std::size_t n_small,
                                          std::size_t n_large,
                                          std::size_t trials,
                                          std::uint64_t seed);

}  // namespace drr
