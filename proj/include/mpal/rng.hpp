#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mpal/common.hpp"

namespace mpal {

// Counter-based SplitMix64 stream. Output i (1-based) is
//   mix64(seed + i * 0x9E3779B97F4A7C15)
// with the standard SplitMix64 finalizer, so any implementation of the
// algorithm reproduces the stream from (seed, i) alone.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// Samples an index from unnormalized nonnegative weights by CDF inversion.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// Standard normal via Box-Muller.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// Independent per-party stream: the base seed XORed with a hash of the
/// party index. Output ordering is therefore fixed by party then record
/// index, independent of scheduling.
inline std::uint64_t derive_party_seed(std::uint64_t seed, int party) {
    return seed ^ mix64(static_cast<std::uint64_t>(party) + 1);
}

}  // namespace mpal
