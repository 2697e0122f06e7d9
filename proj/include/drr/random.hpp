#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace drr {

// Derives independent substream seeds from a base seed and a counter, so
// per-trial streams are reproducible in isolation (SplitMix64 mix).
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t counter) {
    std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (counter + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

// Deterministic RNG: sampling is built only on the bit-pinned mt19937_64
// output so results do not depend on library-specific distribution code.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (one value per call, no cache, so the
    // stream position stays easy to reason about).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643 * u2);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Index i with probability weights[i] / sum(weights); inverse CDF scan.
    std::size_t index(const std::vector<double>& cumulative) {
        const double u = uniform() * cumulative.back();
        std::size_t lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cumulative[mid] > u) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return lo;
    }

  private:
    std::mt19937_64 engine_;
};

inline std::vector<double> cumulative_weights(const std::vector<double>& w) {
    std::vector<double> cum(w.size());
    double run = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        run += w[i];
        cum[i] = run;
    }
    return cum;
}

}  // namespace drr
