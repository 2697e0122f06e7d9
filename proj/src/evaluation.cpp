#include "drr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "drr/errors.hpp"
#include "drr/random.hpp"

namespace drr {

namespace {

std::string point_id(std::size_t i) { return "p" + std::to_string(i); }

double gamma_draw(Rng& rng, double shape) {
    // Marsaglia-Tsang; shapes below 1 are boosted via the u^(1/shape) trick.
    if (shape < 1.0) {
        const double u = std::max(rng.uniform(), 1e-300);
        return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

double median_of(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

// Empirical marginal over the observed subset of the task support.
DiscreteDistribution empirical_marginal(const SyntheticTask& task, Rng& rng,
                                        std::size_t n,
                                        const std::vector<double>& cumulative) {
    std::vector<std::size_t> counts(task.marginal.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        counts[rng.index(cumulative)]++;
    }
    std::vector<std::string> ids;
    std::vector<double> weights;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        ids.push_back(task.marginal.id(i));
        weights.push_back(static_cast<double>(counts[i]));
    }
    return DiscreteDistribution::from_unnormalized(std::move(ids), std::move(weights));
}

using FitFn = DensityRatioRejector (*)(const DiscreteDistribution&,
                                       const PointwiseRisk&, double);

BoundCheckReport run_bound_check(const SyntheticTask& task,
                                 const PointwiseRisk& risk, double range_bound,
                                 std::size_t n, std::size_t m_test, double delta,
                                 double lambda, std::size_t trials,
                                 std::uint64_t seed, bool with_rate_check,
                                 FitFn fit, double bound_constant) {
    validate_task(task);
    if (m_test == 0 || m_test > task.marginal.size()) {
        throw ConfigError("test-point count must lie in [1, support size]");
    }
    if (delta <= 0.0 || delta >= 1.0) {
        throw ConfigError("delta must lie in (0, 1)");
    }
    if (n == 0 || trials == 0) {
        throw ConfigError("sample size and trial count must be positive");
    }
    for (std::size_t i = 0; i < task.marginal.size(); ++i) {
        const double v = risk.at(task.marginal.id(i));
        if (v < 0.0 || v > range_bound) {
            throw ConfigError("risk at " + task.marginal.id(i) +
                              " falls outside the assumed range [0, B]");
        }
    }

    BoundCheckReport report;
    report.n = n;
    report.m_test = m_test;
    report.delta = delta;
    report.lambda = lambda;
    report.range_bound = range_bound;
    report.trials = trials;
    report.bound_value =
        bound_constant *
        std::sqrt(2.0 / static_cast<double>(n) *
                  std::log(2.0 * static_cast<double>(m_test) / delta));

    const DensityRatioRejector exact = fit(task.marginal, risk, lambda);
    std::vector<double> test_risks(m_test);
    for (std::size_t i = 0; i < m_test; ++i) {
        test_risks[i] = risk.at(task.marginal.id(i));
    }
    std::vector<double> exact_ratios(m_test);
    for (std::size_t i = 0; i < m_test; ++i) {
        exact_ratios[i] = evaluate_ratio(exact, test_risks[i]);
    }

    const auto cumulative = cumulative_weights(task.marginal.weights());
    const auto sup_error_at = [&](std::size_t samples, std::uint64_t stream) {
        Rng rng(split_seed(seed, stream));
        const DiscreteDistribution emp =
            empirical_marginal(task, rng, samples, cumulative);
        const DensityRatioRejector fitted = fit(emp, risk, lambda);
        double sup = 0.0;
        for (std::size_t i = 0; i < m_test; ++i) {
            sup = std::max(
                sup, std::fabs(exact_ratios[i] - evaluate_ratio(fitted, test_risks[i])));
        }
        return sup;
    };

    std::vector<double> sups(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        sups[t] = sup_error_at(n, t);
        if (sups[t] > report.bound_value) report.violation_count++;
    }
    report.violation_frequency =
        static_cast<double>(report.violation_count) / static_cast<double>(trials);
    report.violation_threshold =
        delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
    report.violated = report.violation_frequency > report.violation_threshold;
    report.median_sup_error = median_of(sups);

    if (with_rate_check) {
        std::vector<double> sups_large(trials);
        for (std::size_t t = 0; t < trials; ++t) {
            sups_large[t] = sup_error_at(100 * n, trials + t);
        }
        report.median_sup_error_large = median_of(sups_large);
    } else {
        report.median_sup_error_large = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

}  // namespace

std::vector<double> default_tau_grid(std::size_t count) {
    if (count == 0) {
        throw ConfigError("tau grid needs at least one point");
    }
    std::vector<double> taus(count);
    for (std::size_t k = 1; k <= count; ++k) {
        taus[k - 1] = static_cast<double>(k) / static_cast<double>(count);
    }
    return taus;
}

std::vector<SweepRow> sweep(const DensityRatioRejector& rejector,
                            const PointwiseRisk& risk,
                            const std::vector<EvalPoint>& points,
                            const std::vector<double>& taus) {
    if (points.empty()) {
        throw DataError("sweep needs at least one evaluation point");
    }
    if (taus.empty()) {
        throw ConfigError("sweep needs at least one tau");
    }
    for (double tau : taus) {
        if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0) {
            throw ConfigError("tau grid values must lie in (0, 1]");
        }
    }
    std::vector<double> ratios(points.size());
    std::vector<bool> correct(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        ratios[i] = evaluate_ratio(rejector, risk.at(points[i].id));
        correct[i] = points[i].label == points[i].prediction;
    }

    std::vector<SweepRow> rows;
    rows.reserve(taus.size());
    const double total = static_cast<double>(points.size());
    for (double tau : taus) {
        SweepRow row;
        row.tau = tau;
        std::size_t accepted = 0, hits = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (ratios[i] > tau) {
                accepted++;
                if (correct[i]) hits++;
            }
        }
        row.n_accepted = accepted;
        row.coverage = static_cast<double>(accepted) / total;
        if (accepted > 0) {
            const double acc = static_cast<double>(hits) / static_cast<double>(accepted);
            row.accuracy = acc;
            row.selective_risk = 1.0 - acc;
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SweepRow& a, const SweepRow& b) {
                         return a.coverage > b.coverage;
                     });
    return rows;
}

CoverageSelection select_tau_for_coverage(const std::vector<SweepRow>& rows,
                                          double target) {
    if (rows.empty()) {
        throw DataError("coverage selection needs sweep rows");
    }
    if (!std::isfinite(target) || target <= 0.0 || target > 1.0) {
        throw ConfigError("coverage target must lie in (0, 1]");
    }
    bool found = false;
    CoverageSelection best{};
    double best_possible = 0.0;
    for (const auto& row : rows) {
        best_possible = std::max(best_possible, row.coverage);
        if (row.coverage >= target &&
            (!found || row.tau > best.tau)) {
            best.tau = row.tau;
            best.achieved_coverage = row.coverage;
            found = true;
        }
    }
    if (!found) {
        throw DataError("coverage target " + std::to_string(target) +
                        " is unattainable on this grid; best achievable is " +
                        std::to_string(best_possible));
    }
    return best;
}

void validate_task(const SyntheticTask& task) {
    if (task.marginal.size() == 0 ||
        task.marginal.size() != task.posterior.size()) {
        throw DataError("task posterior rows must align with the marginal support");
    }
    const std::size_t classes = task.classes();
    if (classes < 2) {
        throw DataError("task needs at least two classes");
    }
    for (const auto& row : task.posterior) {
        if (row.size() != classes) {
            throw DataError("ragged posterior rows in task");
        }
        double sum = 0.0;
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) {
                throw DataError("posterior entries must be finite and non-negative");
            }
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            throw DataError("posterior rows must sum to 1 within 1e-9");
        }
    }
    if (!std::isfinite(task.label_noise_rate) || task.label_noise_rate < 0.0 ||
        task.label_noise_rate >= 0.5) {
        throw DataError("label noise rate must lie in [0, 0.5)");
    }
}

SyntheticTask make_dirichlet_task(std::size_t support, std::size_t classes,
                                  double concentration, std::uint64_t seed,
                                  double label_noise_rate) {
    if (support == 0 || classes < 2) {
        throw ConfigError("task needs support >= 1 and classes >= 2");
    }
    if (!std::isfinite(concentration) || concentration <= 0.0) {
        throw ConfigError("Dirichlet concentration must be positive");
    }
    Rng rng(seed);
    std::vector<std::string> ids(support);
    std::vector<double> weights(support);
    for (std::size_t i = 0; i < support; ++i) {
        ids[i] = point_id(i);
        weights[i] = rng.uniform(0.5, 1.5);
    }
    SyntheticTask task;
    task.marginal =
        DiscreteDistribution::from_unnormalized(std::move(ids), std::move(weights));
    task.posterior.resize(support, std::vector<double>(classes));
    for (auto& row : task.posterior) {
        double sum = 0.0;
        for (double& v : row) {
            v = gamma_draw(rng, concentration);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    task.label_noise_rate = label_noise_rate;
    validate_task(task);
    return task;
}

SyntheticTask make_leveled_task(std::size_t support, std::size_t classes,
                                const std::vector<ConfidenceLevel>& levels,
                                std::uint64_t seed, double label_noise_rate) {
    if (support == 0 || classes < 2 || levels.empty()) {
        throw ConfigError("leveled task needs support, classes and levels");
    }
    double mass_total = 0.0;
    for (const auto& level : levels) {
        if (level.top_prob <= 1.0 / static_cast<double>(classes) ||
            level.top_prob >= 1.0 || level.mass <= 0.0) {
            throw ConfigError("confidence levels need top_prob in (1/K, 1) and positive mass");
        }
        mass_total += level.mass;
    }
    if (support < levels.size()) {
        throw ConfigError("leveled task needs at least one point per level");
    }
    // Levels tile the support by index share; count points per level first
    // so each level's mass is spread over its actual point count.
    std::vector<std::size_t> level_of(support);
    std::vector<std::size_t> level_count(levels.size(), 0);
    for (std::size_t i = 0; i < support; ++i) {
        level_of[i] =
            std::min<std::size_t>(levels.size() - 1, i * levels.size() / support);
        level_count[level_of[i]]++;
    }
    Rng rng(seed);
    std::vector<std::string> ids(support);
    std::vector<double> weights(support);
    SyntheticTask task;
    task.posterior.resize(support, std::vector<double>(classes));
    for (std::size_t i = 0; i < support; ++i) {
        ids[i] = point_id(i);
        const auto& level = levels[level_of[i]];
        weights[i] =
            level.mass / mass_total / static_cast<double>(level_count[level_of[i]]);
        const std::size_t top =
            static_cast<std::size_t>(rng.uniform() * static_cast<double>(classes)) %
            classes;
        const double rest =
            (1.0 - level.top_prob) / static_cast<double>(classes - 1);
        for (std::size_t k = 0; k < classes; ++k) {
            task.posterior[i][k] = (k == top) ? level.top_prob : rest;
        }
    }
    task.marginal =
        DiscreteDistribution::from_unnormalized(std::move(ids), std::move(weights));
    task.label_noise_rate = label_noise_rate;
    validate_task(task);
    return task;
}

SyntheticSample generate_synthetic(const SyntheticTask& task, std::size_t n,
                                   std::uint64_t seed) {
    validate_task(task);
    if (n == 0) {
        throw ConfigError("sample size must be positive");
    }
    const std::size_t classes = task.classes();
    const auto marginal_cum = cumulative_weights(task.marginal.weights());
    std::vector<std::vector<double>> posterior_cum(task.posterior.size());
    for (std::size_t i = 0; i < task.posterior.size(); ++i) {
        posterior_cum[i] = cumulative_weights(task.posterior[i]);
    }
    Rng rng(seed);
    SyntheticSample sample;
    sample.point_index.resize(n);
    sample.clean_labels.resize(n);
    sample.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t x = rng.index(marginal_cum);
        const int y = static_cast<int>(rng.index(posterior_cum[x]));
        int noisy = y;
        if (task.label_noise_rate > 0.0 && rng.uniform() < task.label_noise_rate) {
            // Uniform draw over the other classes.
            const std::size_t j = static_cast<std::size_t>(
                rng.uniform() * static_cast<double>(classes - 1));
            const std::size_t other = std::min(j, classes - 2);
            noisy = static_cast<int>(other >= static_cast<std::size_t>(y) ? other + 1
                                                                          : other);
        }
        sample.point_index[i] = x;
        sample.clean_labels[i] = y;
        sample.labels[i] = noisy;
    }
    return sample;
}

DiscreteDistribution reweighted_distribution(const DensityRatioRejector& rejector,
                                             const DiscreteDistribution& p,
                                             const PointwiseRisk& risk) {
    std::vector<double> weights(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        weights[i] = p.weight(i) * evaluate_ratio(rejector, risk.at(p.id(i)));
    }
    return DiscreteDistribution::from_unnormalized(
        std::vector<std::string>(p.ids()), std::move(weights));
}

double tv_distance(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t j = q.index_of(p.id(i));
        const double qw = (j == DiscreteDistribution::npos) ? 0.0 : q.weight(j);
        total += std::fabs(p.weight(i) - qw);
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (p.index_of(q.id(i)) == DiscreteDistribution::npos) {
            total += q.weight(i);
        }
    }
    return 0.5 * total;
}

BoundCheckReport check_kl_bound(const SyntheticTask& task,
                                const PointwiseRisk& risk, double range_bound,
                                std::size_t n, std::size_t m_test, double delta,
                                double lambda, std::size_t trials,
                                std::uint64_t seed, bool with_rate_check) {
    if (!std::isfinite(lambda) || lambda <= 0.0) {
        throw ConfigError("lambda must be positive");
    }
    const double ratio = range_bound / lambda;
    const double constant = std::exp(3.0 * ratio) * std::sinh(ratio);
    return run_bound_check(task, risk, range_bound, n, m_test, delta, lambda,
                           trials, seed, with_rate_check, &fit_kl, constant);
}

BoundCheckReport check_chi2_bound(const SyntheticTask& task,
                                  const PointwiseRisk& risk, double range_bound,
                                  std::size_t n, std::size_t m_test,
                                  double delta, double lambda,
                                  std::size_t trials, std::uint64_t seed,
                                  bool with_rate_check) {
    if (!std::isfinite(lambda) || lambda <= 2.0 * range_bound) {
        throw SolverError("chi-square bound check requires lambda > " +
                          std::to_string(2.0 * range_bound) + " (twice the risk range)");
    }
    const double constant = range_bound / lambda;
    return run_bound_check(task, risk, range_bound, n, m_test, delta, lambda,
                           trials, seed, with_rate_check, &fit_chi_square,
                           constant);
}

TvConvergenceReport tv_convergence_trials(const SyntheticTask& task,
                                          const PointwiseRisk& risk,
                                          const RejectorSpec& spec,
                                          std::size_t n_small,
                                          std::size_t n_large,
                                          std::size_t trials,
                                          std::uint64_t seed) {
    validate_task(task);
    if (n_small == 0 || n_large <= n_small || trials == 0) {
        throw ConfigError("need 0 < n_small < n_large and positive trials");
    }
    const DensityRatioRejector exact = fit_rejector(spec, task.marginal, risk);
    const DiscreteDistribution q_exact =
        reweighted_distribution(exact, task.marginal, risk);
    const auto cumulative = cumulative_weights(task.marginal.weights());

    const auto tv_at = [&](std::size_t samples, std::uint64_t stream) {
        Rng rng(split_seed(seed, stream));
        const DiscreteDistribution emp =
            empirical_marginal(task, rng, samples, cumulative);
        const DensityRatioRejector fitted = fit_rejector(spec, emp, risk);
        return tv_distance(reweighted_distribution(fitted, emp, risk), q_exact);
    };

    TvConvergenceReport report;
    report.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        const double tv_small = tv_at(n_small, 2 * t);
        const double tv_large = tv_at(n_large, 2 * t + 1);
        if (tv_large <= tv_small) report.improved++;
    }
    report.improved_fraction =
        static_cast<double>(report.improved) / static_cast<double>(trials);
    return report;
}

}  // namespace drr
