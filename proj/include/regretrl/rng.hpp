#pragma once

#include <cstdint>
#include <random>

namespace rrl {

// All stochastic components draw through these helpers. std::mt19937_64 is
// fully specified by the standard and the mappings below avoid
// std::uniform_*_distribution, whose output may differ between standard
// library implementations. Same seed, same platform or not: same stream.

/// Uniform double in [0, 1) with 53 random mantissa bits.
inline double canonical(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Requires n >= 1.
inline int uniform_int(std::mt19937_64& rng, int n) {
    int v = static_cast<int>(canonical(rng) * static_cast<double>(n));
    return v < n ? v : n - 1;
}

/// Uniform double in [lo, hi).
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * canonical(rng);
}

} // namespace rrl
