#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace spn {

/// Deterministic randomness helpers. std::mt19937_64 itself is pinned by
/// the standard, but the <random> distributions and std::shuffle are not,
/// so everything downstream of the engine is hand-rolled here.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1), 53 random bits.
    double next_double() { return (eng_() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n).
    size_t next_index(size_t n) { return static_cast<size_t>(next_double() * n); }

    /// Walk a cumulative sum of non-negative weights; total need not be 1.
    size_t pick_weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        double acc = 0.0;
        for (size_t j = 0; j + 1 < weights.size(); ++j) {
            acc += weights[j];
            if (u < acc) return j;
        }
        return weights.size() - 1;
    }

    /// Box-Muller; consumes two uniforms per call.
    double next_gaussian(double mean, double stddev) {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double u2 = next_double();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                          std::cos(2.0 * M_PI * u2);
    }

    /// Fisher-Yates, in place.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

/// splitmix64, used to derive independent child seeds from a parent seed
/// and a branch index so recursion order cannot leak into results.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + (salt + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace spn
