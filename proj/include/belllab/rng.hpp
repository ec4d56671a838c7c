#pragma once

#include <cstdint>

#include "belllab/errors.hpp"

namespace belllab {

/// Counter-based random streams. Every draw is a pure function of
/// (seed, trial_index, role, counter), so trial generation can be split
/// across any number of workers and still produce identical output.
namespace rng {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 output function (Steele, Lea, Flood 2014).
inline std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Roles keep the per-trial streams for independent decisions disjoint.
enum class Role : std::uint64_t {
    SettingChoice = 1,
    Lambda = 2,
    LeftUnprimed = 3,
    LeftPrimed = 4,
    RightUnprimed = 5,
    RightPrimed = 6,
    JointOutcome = 7,
    LeftOutcome = 8,
    RightOutcome = 9,
};

/// Stateless stream keyed by (seed, trial_index, role); draws are indexed by
/// an internal counter.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t trial_index, Role role)
        : key_(mix(mix(mix(seed) ^ (trial_index + 1)) ^ static_cast<std::uint64_t>(role))) {}

    std::uint64_t next_u64() { return mix(key_ + counter_++ * kGamma); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Multiply-shift rejection-free mapping; bias is < 2^-64 * n,
        // irrelevant at the n <= 16 used here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli: p must be in [0, 1]");
        return next_unit() < p;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rng
} // namespace belllab
