#pragma once

#include <cstdint>

namespace densemodel::rng {

// Counter-based splitmix64. value(seed, i) is a pure function of (seed, i),
// so any point of any stream can be reproduced (or computed in parallel)
// without advancing shared state. Constants are the reference splitmix64
// ones; they are part of the file-format contract: a model set rounded from
// a measure must be bit-identical across implementations given the seed.
inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
    return mix(seed + (counter + 1) * kGamma);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(at(seed, counter) >> 11) * 0x1.0p-53;
}

/// Uniform double in [-1, 1).
inline double uniform_pm1(std::uint64_t seed, std::uint64_t counter) {
    return 2.0 * uniform01(seed, counter) - 1.0;
}

/// Sequential convenience wrapper over the counter-based core.
struct Stream {
    std::uint64_t seed;
    std::uint64_t counter = 0;

    explicit Stream(std::uint64_t s) : seed(s) {}

    std::uint64_t next_u64() { return at(seed, counter++); }
    double next01() { return uniform01(seed, counter++); }
    double next_pm1() { return uniform_pm1(seed, counter++); }

    /// Uniform integer in [0, bound) by rejection-free scaling (bound is
    /// small at desk scale; modulo bias is irrelevant for test fixtures).
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }
};

}  // namespace densemodel::rng
