#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace drr {

// Finitely supported probability distribution over opaque point ids.
// Weights are non-negative and sum to 1 within 1e-12; ids are unique.
// Identical feature vectors with different ids stay distinct atoms.
class DiscreteDistribution {
  public:
    DiscreteDistribution() = default;

    // Validates and normalizes nothing: weights must already sum to 1.
    static DiscreteDistribution make(std::vector<std::string> ids,
                                     std::vector<double> weights);

    // Convenience: normalizes the given non-negative weights.
    static DiscreteDistribution from_unnormalized(std::vector<std::string> ids,
                                                  std::vector<double> weights);

    static DiscreteDistribution uniform(std::vector<std::string> ids);

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }

    // Index of id, or npos when absent.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t index_of(const std::string& id) const;

  private:
    std::vector<std::string> ids_;
    std::vector<double> weights_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Generator of the alpha-divergence family on z >= 0.
//
//   alpha == 1   : z*log(z) - (z - 1)          (0*log 0 taken as 0)
//   alpha == -1  : -log(z) + (z - 1)           (requires z > 0)
//   otherwise    : 4/(1-a^2)*(1 - z^((1+a)/2)) - 2/(1-a)*(z - 1)
//
// phi_alpha(1) == 0 exactly for every alpha. |alpha - 1| < 1e-6 routes to
// the alpha = 1 branch: the 1/(1 - alpha) factors are not evaluable there.
double phi_alpha(double alpha, double z);

// Monotone reparameterization: z^((1-alpha)/2) for alpha != 1, log(z) at
// alpha = 1. Multiplicative for alpha != 1: psi(u*v) = psi(u)*psi(v).
double psi_alpha(double alpha, double z);

// Inverse of psi_alpha: y^(2/(1-alpha)) for alpha != 1, exp(y) at alpha = 1.
// Requires y > 0 when alpha != 1.
double psi_alpha_inv(double alpha, double y);

// D(P || Q) = sum_i p_i * phi_alpha(q_i / p_i) over the shared support.
// Returns +infinity when q puts mass where p has none (absolute continuity
// failure) or when a zero ratio is outside the generator's domain
// (alpha <= -1). Exact weighted sum, no sampling.
double divergence(double alpha, const DiscreteDistribution& p,
                  const DiscreteDistribution& q);

}  // namespace drr
