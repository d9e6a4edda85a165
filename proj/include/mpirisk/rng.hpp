#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mpirisk {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: output i of stream s under key k is
/// mix64(k + mix64(s) + i * golden). Reproducible across platforms and
/// languages, and any draw can be computed without generating its
/// predecessors.
class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    constexpr CounterRng(std::uint64_t key, std::uint64_t stream)
        : base_(key + mix64(stream ^ 0x5851f42d4c957f2dULL)) {}

    constexpr std::uint64_t at(std::uint64_t counter) const {
        return mix64(base_ + (counter + 1) * kGolden);
    }

    /// Uniform in [0, 1) with 53 bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on draws 2c and 2c+1.
    double normal(std::uint64_t counter) const {
        const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t base_;
};

/// Sequential convenience wrapper.
class SequentialRng {
public:
    SequentialRng(std::uint64_t key, std::uint64_t stream) : rng_(key, stream) {}

    std::uint64_t next() { return rng_.at(counter_++); }
    double uniform() { return rng_.uniform(counter_++); }
    double normal() { return rng_.normal(counter_++); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

}  // namespace mpirisk
