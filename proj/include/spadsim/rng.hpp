#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace spadsim {

// All sampling is built on the raw 64-bit output of std::mt19937_64 so
// that streams are bit-reproducible across platforms and library
// versions (the standard pins the generator algorithm but not the
// distribution adapters).
inline constexpr const char* kRngAlgorithm = "mt19937_64";

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed for an independent sub-stream, e.g. one sweep point of a multi-run
/// command. Derivation is pure so parallel workers cannot perturb it.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run_index) {
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * (run_index + 1));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

  private:
    std::mt19937_64 engine_;
};

/// Standard normal deviate (Box-Muller, no caching so the variate count
/// per call is fixed).
inline double sample_normal(Rng& rng) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double v = rng.uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
}

/// Exponential deviate with the given mean.
inline double sample_exponential(Rng& rng, double mean) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    return -mean * std::log(u);
}

/// Poisson deviate. Knuth's product method for small means, normal
/// approximation above it (only reached by the aggregate-rate paths where
/// means are >> 10^3 and the approximation error is far below shot noise).
inline std::uint64_t sample_poisson(Rng& rng, double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson mean must be >= 0");
    if (mean == 0.0) return 0;
    if (mean < 256.0) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= rng.uniform();
        } while (p > limit);
        return k - 1;
    }
    const double x = mean + std::sqrt(mean) * sample_normal(rng);
    return x <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(x));
}

}  // namespace spadsim
