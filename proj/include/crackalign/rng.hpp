#pragma once

#include <cmath>
#include <cstdint>

namespace crackalign {

/// SplitMix64 generator. Hand-rolled (rather than <random>) so streams are
/// fully specified by the seed: outputs are identical across platforms,
/// standard libraries, and thread counts.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent stream for a (seed, index) pair, e.g. one RANSAC iteration
    /// or one bench run.
    static Rng fork(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
        mix.next();
        mix.next();
        return mix;
    }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, n). Modulo bias is < n/2^64, irrelevant here.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::uint64_t state_;
};

} // namespace crackalign
