// Deterministic random number generation.
//
// The suite promises bit-identical stochastic behaviour for a given
// (seed, stream) pair across runs and platforms, so it does not use the
// standard-library distributions (their draw sequences are
// implementation-defined). The generator is xoshiro256++ seeded through
// splitmix64, both published by Blackman & Vigna; distributions are the
// classic inverse-CDF / Box-Muller constructions with a fixed number of
// uniform draws per variate.
//
// Streams: every stochastic operation takes an explicit (seed, stream) pair.
// Distinct streams of the same seed are statistically independent; stream
// indices are documented at each call site (e.g. one stream per experiment
// configuration).
#pragma once

#include <cmath>
#include <cstdint>

namespace qla {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        // Mix the stream index into the seed, then expand through splitmix64
        // as recommended for seeding xoshiro state.
        std::uint64_t sm = seed ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Bounded rejection sampling to avoid modulo bias.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Normal variate via Box-Muller; always consumes exactly two uniforms.
    double normal(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        return mean + stddev * (r * std::cos(two_pi * u2));
    }

    /// Exponential variate with the given mean (inverse CDF).
    double exponential(double mean) {
        double u = uniform01();
        if (u >= 1.0) u = 1.0 - 0x1.0p-53;
        return -mean * std::log1p(-u);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace qla
