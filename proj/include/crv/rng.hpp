#pragma once

#include <cstdint>
#include <random>

namespace crv {

/// Stateless mixer used to derive independent substream seeds from a master
/// seed. Same constants as the reference splitmix64.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag));
}

/// mt19937_64 wrapper that draws doubles without std::*_distribution, so the
/// stream is identical across standard library implementations.
class Rng {
  public:
    Rng() : eng_(0) {}
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Inverse-CDF exponential draw with the given mean.
    double exponential(double mean) {
        double u = uniform();
        return -mean * std::log1p(-u);
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is tiny relative to 2^64.
        return eng_() % n;
    }

    bool coin() { return (eng_() & 1u) != 0; }

  private:
    std::mt19937_64 eng_;
};

} // namespace crv
