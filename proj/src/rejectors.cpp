#include "drr/rejectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "drr/errors.hpp"

namespace drr {

namespace {

constexpr double kAlphaOneGuard = 1e-6;
constexpr double kAlphaMinAbove = 1.01;
constexpr double kBisectResidualTol = 1e-8;
constexpr int kBisectMaxIter = 200;
constexpr double kBisectMaxStep = 1e15;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

void require_lambda(double lambda) {
    if (!std::isfinite(lambda) || lambda <= 0.0) {
        throw ConfigError("lambda must be finite and positive (got " + fmt(lambda) + ")");
    }
}

// True when alpha must be served by the KL family; throws on unsupported
// alpha. Valid outcomes: KL (alpha near 1) or a genuine alpha > 1 fit.
bool alpha_routes_to_kl(double alpha) {
    if (!std::isfinite(alpha)) {
        throw ConfigError("alpha must be finite");
    }
    if (std::fabs(alpha - 1.0) < kAlphaOneGuard) return true;
    if (alpha <= -1.0) {
        throw ConfigError("alpha <= -1 is unsupported: no normalizable ratio family here");
    }
    if (alpha < 1.0) {
        throw ConfigError("alpha in (-1, 1) is unsupported: use alpha = 1 or alpha >= 1.01");
    }
    if (alpha < kAlphaMinAbove) {
        throw ConfigError("alpha in (1, 1.01) is rejected: exponent 2/(alpha-1) exceeds 200");
    }
    return false;
}

std::vector<double> aligned_values(const DiscreteDistribution& p,
                                   const PointwiseRisk& risk) {
    std::vector<double> values(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        values[i] = risk.at(p.id(i));
    }
    return values;
}

// Fit on raw aligned values. Values may be negative (worst-case reweighting
// fits on negated risks), so no sign validation here.
DensityRatioRejector fit_kl_values(const DiscreteDistribution& p,
                                   const std::vector<double>& values,
                                   double lambda) {
    DensityRatioRejector r;
    r.spec = {RejectorKind::kl, 1.0, lambda};
    r.fit_distribution = p;
    double shift = std::numeric_limits<double>::infinity();
    for (double v : values) shift = std::min(shift, v / lambda);
    double scale = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        scale += p.weight(i) * std::exp(-(values[i] / lambda - shift));
    }
    r.kl_shift = shift;
    r.kl_scale = scale;
    r.normalizer = std::exp(-shift) * scale;
    return r;
}

DensityRatioRejector fit_alpha_pos_values(const DiscreteDistribution& p,
                                          const std::vector<double>& values,
                                          double alpha, double lambda) {
    DensityRatioRejector r;
    r.spec = {RejectorKind::alpha_pos, alpha, lambda};
    r.fit_distribution = p;

    const double half = 0.5 * (alpha - 1.0);
    const double expo = 2.0 / (alpha - 1.0);
    std::vector<double> v(values.size());
    double b_lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        v[i] = values[i] / lambda;
        b_lo = std::min(b_lo, v[i]);
    }
    const auto residual = [&](double b) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double t = half * (b - v[i]);
            if (t > 0.0) s += p.weight(i) * std::pow(t, expo);
        }
        return s - 1.0;
    };

    // Expand the upper bracket geometrically until the mean ratio reaches 1.
    double step = 1.0;
    double hi = b_lo + step;
    while (residual(hi) < 0.0) {
        step *= 2.0;
        if (step > kBisectMaxStep) {
            throw SolverError("bisection bracket expansion failed: residual still negative on [" +
                              fmt(b_lo) + ", " + fmt(hi) + "]");
        }
        hi = b_lo + step;
    }

    double lo = b_lo;
    double b = hi;
    bool converged = false;
    for (int iter = 0; iter < kBisectMaxIter; ++iter) {
        b = 0.5 * (lo + hi);
        const double res = residual(b);
        if (std::fabs(res) <= kBisectResidualTol) {
            converged = true;
            break;
        }
        if (res < 0.0) {
            lo = b;
        } else {
            hi = b;
        }
    }
    if (!converged) {
        throw SolverError("bisection did not reach residual tolerance " +
                          fmt(kBisectResidualTol) + "; final bracket [" + fmt(lo) +
                          ", " + fmt(hi) + "]");
    }
    r.normalizer = b;
    return r;
}

DensityRatioRejector fit_chi_square_values(const DiscreteDistribution& p,
                                           const std::vector<double>& values,
                                           double lambda) {
    double mean = 0.0;
    double max_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        mean += p.weight(i) * values[i];
        max_v = std::max(max_v, values[i]);
    }
    const double min_lambda = max_v - mean;
    if (lambda <= min_lambda) {
        throw SolverError("chi-square fit requires lambda > " + fmt(min_lambda) +
                          " (max risk minus mean risk); got " + fmt(lambda));
    }
    DensityRatioRejector r;
    r.spec = {RejectorKind::chi_square, 3.0, lambda};
    r.fit_distribution = p;
    r.mean_risk = mean;
    r.normalizer = 1.0 + mean / lambda;
    return r;
}

DensityRatioRejector fit_values(const RejectorSpec& spec,
                                const DiscreteDistribution& p,
                                const std::vector<double>& values) {
    require_lambda(spec.lambda);
    switch (spec.kind) {
        case RejectorKind::kl:
            return fit_kl_values(p, values, spec.lambda);
        case RejectorKind::alpha_pos:
            if (alpha_routes_to_kl(spec.alpha)) {
                return fit_kl_values(p, values, spec.lambda);
            }
            return fit_alpha_pos_values(p, values, spec.alpha, spec.lambda);
        case RejectorKind::chi_square:
            return fit_chi_square_values(p, values, spec.lambda);
    }
    throw ConfigError("unknown rejector kind");
}

}  // namespace

RejectorKind rejector_kind_from_string(const std::string& name) {
    if (name == "kl") return RejectorKind::kl;
    if (name == "alpha" || name == "alpha-pos" || name == "alpha_pos") return RejectorKind::alpha_pos;
    if (name == "chi2" || name == "chi-square" || name == "chi_square") return RejectorKind::chi_square;
    throw ConfigError("unknown rejector kind: " + name);
}

std::string to_string(RejectorKind kind) {
    switch (kind) {
        case RejectorKind::kl: return "kl";
        case RejectorKind::alpha_pos: return "alpha";
        case RejectorKind::chi_square: return "chi2";
    }
    return "unknown";
}

DensityRatioRejector fit_kl(const DiscreteDistribution& p,
                            const PointwiseRisk& risk, double lambda) {
    require_lambda(lambda);
    return fit_kl_values(p, aligned_values(p, risk), lambda);
}

DensityRatioRejector fit_alpha_pos(const DiscreteDistribution& p,
                                   const PointwiseRisk& risk, double alpha,
                                   double lambda) {
    require_lambda(lambda);
    const auto values = aligned_values(p, risk);
    if (alpha_routes_to_kl(alpha)) {
        return fit_kl_values(p, values, lambda);
    }
    return fit_alpha_pos_values(p, values, alpha, lambda);
}

DensityRatioRejector fit_chi_square(const DiscreteDistribution& p,
                                    const PointwiseRisk& risk, double lambda) {
    require_lambda(lambda);
    return fit_chi_square_values(p, aligned_values(p, risk), lambda);
}

DensityRatioRejector fit_rejector(const RejectorSpec& spec,
                                  const DiscreteDistribution& p,
                                  const PointwiseRisk& risk) {
    return fit_values(spec, p, aligned_values(p, risk));
}

double evaluate_ratio(const DensityRatioRejector& rejector, double risk_value) {
    if (!std::isfinite(risk_value)) {
        throw std::domain_error("risk value must be finite");
    }
    const double lambda = rejector.spec.lambda;
    switch (rejector.spec.kind) {
        case RejectorKind::kl:
            return std::exp(-(risk_value / lambda - rejector.kl_shift)) /
                   rejector.kl_scale;
        case RejectorKind::alpha_pos: {
            const double alpha = rejector.spec.alpha;
            const double t =
                0.5 * (alpha - 1.0) * (rejector.normalizer - risk_value / lambda);
            if (t <= 0.0) return 0.0;
            return std::pow(t, 2.0 / (alpha - 1.0));
        }
        case RejectorKind::chi_square:
            return std::max(0.0, 1.0 + (rejector.mean_risk - risk_value) / lambda);
    }
    throw ConfigError("unknown rejector kind");
}

RatioRejectionRule make_rule(DensityRatioRejector rejector, double tau) {
    if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0) {
        throw ConfigError("tau must lie in (0, 1] (got " + fmt(tau) + ")");
    }
    return RatioRejectionRule{std::move(rejector), tau};
}

bool reject(const RatioRejectionRule& rule, double risk_value) {
    if (!std::isfinite(rule.tau) || rule.tau <= 0.0 || rule.tau > 1.0) {
        throw ConfigError("tau must lie in (0, 1] (got " + fmt(rule.tau) + ")");
    }
    return evaluate_ratio(rule.rejector, risk_value) <= rule.tau;
}

ChowResult chow_oracle(const std::vector<std::vector<double>>& posteriors,
                       double cost, LossKind kind) {
    if (!std::isfinite(cost) || cost <= 0.0 || cost >= 0.5) {
        throw ConfigError("rejection cost must lie in (0, 0.5) (got " + fmt(cost) + ")");
    }
    ChowResult result;
    result.rejects.reserve(posteriors.size());
    result.bayes_labels.reserve(posteriors.size());
    result.bayes_risks.reserve(posteriors.size());
    for (const auto& eta : posteriors) {
        const double bayes_risk = plugin_risk_value(eta, kind);
        const auto arg = std::max_element(eta.begin(), eta.end());
        result.bayes_labels.push_back(static_cast<int>(arg - eta.begin()));
        result.bayes_risks.push_back(bayes_risk);
        result.rejects.push_back(bayes_risk >= cost);
    }
    return result;
}

DiscreteDistribution dro_adversarial(const DiscreteDistribution& p,
                                     const PointwiseRisk& risk,
                                     const RejectorSpec& spec) {
    auto values = aligned_values(p, risk);
    for (double& v : values) v = -v;
    const DensityRatioRejector rejector = fit_values(spec, p, values);
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        q[i] = p.weight(i) * evaluate_ratio(rejector, values[i]);
    }
    return DiscreteDistribution::from_unnormalized(
        std::vector<std::string>(p.ids()), std::move(q));
}

DroDualResult dro_dual_search(const DiscreteDistribution& p,
                              const PointwiseRisk& risk, double alpha,
                              const DroConfig& config) {
    if (!std::isfinite(config.epsilon) || config.epsilon < 0.0) {
        throw ConfigError("epsilon must be finite and non-negative");
    }
    if (!std::isfinite(config.lambda_lo) || !std::isfinite(config.lambda_hi) ||
        config.lambda_lo <= 0.0 || config.lambda_hi <= config.lambda_lo) {
        throw ConfigError("lambda search range must satisfy 0 < lo < hi");
    }
    const RejectorKind kind =
        alpha_routes_to_kl(alpha) ? RejectorKind::kl : RejectorKind::alpha_pos;

    const auto values = aligned_values(p, risk);
    struct DualPoint {
        double g;
        DiscreteDistribution q;
        double div;
    };
    const auto dual_at = [&](double lambda) {
        const RejectorSpec spec{kind, alpha, lambda};
        DiscreteDistribution q = dro_adversarial(p, risk, spec);
        const double div = divergence(alpha, p, q);
        double loss_q = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            loss_q += q.weight(i) * values[i];
        }
        return DualPoint{-loss_q + lambda * (div - config.epsilon), std::move(q), div};
    };

    // Golden-section maximization of the concave dual over log(lambda).
    constexpr double invphi = 0.6180339887498949;
    double a = std::log(config.lambda_lo);
    double b = std::log(config.lambda_hi);
    const double a0 = a, b0 = b;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double gc = dual_at(std::exp(c)).g;
    double gd = dual_at(std::exp(d)).g;
    while (b - a > config.tol_log) {
        if (gc >= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - invphi * (b - a);
            gc = dual_at(std::exp(c)).g;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + invphi * (b - a);
            gd = dual_at(std::exp(d)).g;
        }
    }
    const double t_star = 0.5 * (a + b);

    DroDualResult result;
    result.lambda_star = std::exp(t_star);
    if (t_star - a0 <= 2.0 * config.tol_log) {
        result.boundary = DroBoundary::lower;
    } else if (b0 - t_star <= 2.0 * config.tol_log) {
        result.boundary = DroBoundary::upper;
    } else {
        result.boundary = DroBoundary::interior;
    }
    DualPoint final_point = dual_at(result.lambda_star);
    result.adversarial = std::move(final_point.q);
    result.dual_value = final_point.g;
    result.divergence_value = final_point.div;
    return result;
}

}  // namespace drr
