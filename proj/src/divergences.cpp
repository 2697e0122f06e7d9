#include "drr/divergences.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "drr/errors.hpp"

namespace drr {

namespace {

constexpr double kAlphaOneGuard = 1e-6;
constexpr double kWeightSumTol = 1e-12;

bool is_alpha_one(double alpha) { return std::fabs(alpha - 1.0) < kAlphaOneGuard; }

void require_finite_alpha(double alpha) {
    if (!std::isfinite(alpha)) {
        throw std::domain_error("alpha must be finite");
    }
}

}  // namespace

DiscreteDistribution DiscreteDistribution::make(std::vector<std::string> ids,
                                                std::vector<double> weights) {
    if (ids.size() != weights.size()) {
        throw DataError("distribution ids and weights differ in length");
    }
    if (ids.empty()) {
        throw DataError("distribution must have at least one support point");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw DataError("distribution weights must be finite and non-negative");
        }
        sum += w;
    }
    if (std::fabs(sum - 1.0) > kWeightSumTol) {
        throw DataError("distribution weights must sum to 1 within 1e-12 (got " +
                        std::to_string(sum) + ")");
    }
    DiscreteDistribution d;
    d.ids_ = std::move(ids);
    d.weights_ = std::move(weights);
    d.index_.reserve(d.ids_.size());
    for (std::size_t i = 0; i < d.ids_.size(); ++i) {
        if (!d.index_.emplace(d.ids_[i], i).second) {
            throw DataError("duplicate support id: " + d.ids_[i]);
        }
    }
    return d;
}

DiscreteDistribution DiscreteDistribution::from_unnormalized(
    std::vector<std::string> ids, std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw DataError("distribution weights must be finite and non-negative");
        }
        sum += w;
    }
    if (sum <= 0.0) {
        throw DataError("distribution weights must have positive total mass");
    }
    for (double& w : weights) w /= sum;
    return make(std::move(ids), std::move(weights));
}

DiscreteDistribution DiscreteDistribution::uniform(std::vector<std::string> ids) {
    std::vector<double> w(ids.size(), ids.empty() ? 0.0 : 1.0 / static_cast<double>(ids.size()));
    return from_unnormalized(std::move(ids), std::move(w));
}

std::size_t DiscreteDistribution::index_of(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? npos : it->second;
}

double phi_alpha(double alpha, double z) {
    require_finite_alpha(alpha);
    if (!std::isfinite(z) || z < 0.0) {
        throw std::domain_error("phi_alpha requires finite z >= 0");
    }
    if (is_alpha_one(alpha)) {
        const double zlogz = (z == 0.0) ? 0.0 : z * std::log(z);
        return zlogz - (z - 1.0);
    }
    if (alpha == -1.0) {
        if (z == 0.0) {
            throw std::domain_error("phi_alpha at alpha = -1 requires z > 0");
        }
        return -std::log(z) + (z - 1.0);
    }
    const double expo = 0.5 * (1.0 + alpha);
    return 4.0 / (1.0 - alpha * alpha) * (1.0 - std::pow(z, expo)) -
           2.0 / (1.0 - alpha) * (z - 1.0);
}

double psi_alpha(double alpha, double z) {
    require_finite_alpha(alpha);
    if (!std::isfinite(z) || z <= 0.0) {
        throw std::domain_error("psi_alpha requires finite z > 0");
    }
    if (alpha == 1.0) return std::log(z);
    return std::pow(z, 0.5 * (1.0 - alpha));
}

double psi_alpha_inv(double alpha, double y) {
    require_finite_alpha(alpha);
    if (!std::isfinite(y)) {
        throw std::domain_error("psi_alpha_inv requires finite y");
    }
    if (alpha == 1.0) return std::exp(y);
    if (y <= 0.0) {
        throw std::domain_error("psi_alpha_inv requires y > 0 when alpha != 1");
    }
    return std::pow(y, 2.0 / (1.0 - alpha));
}

double divergence(double alpha, const DiscreteDistribution& p,
                  const DiscreteDistribution& q) {
    require_finite_alpha(alpha);
    if (p.size() != q.size()) {
        throw DataError("divergence requires identical supports (sizes differ)");
    }
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const std::size_t j = p.index_of(q.id(i));
        if (j == DiscreteDistribution::npos) {
            throw DataError("divergence support mismatch at id: " + q.id(i));
        }
        const double pw = p.weight(j);
        const double qw = q.weight(i);
        if (pw == 0.0) {
            if (qw > 0.0) return inf;  // absolute continuity failure
            continue;
        }
        const double ratio = qw / pw;
        if (ratio == 0.0 && alpha <= -1.0) return inf;
        total += pw * phi_alpha(alpha, ratio);
        if (std::isinf(total)) return inf;
    }
    return total;
}

}  // namespace drr
