// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <random>

namespace pigpaxos {

// Draw helpers on top of mt19937_64. std::uniform_int_distribution is
// implementation-defined, so deterministic draws go through these instead.
inline uint64_t rng_below(std::mt19937_64& rng, uint64_t bound) {
    // Rejection sampling for an unbiased draw in [0, bound).
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

inline int64_t rng_range(std::mt19937_64& rng, int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int64_t>(rng_below(rng, static_cast<uint64_t>(hi - lo + 1)));
}

// Uniform double in [0, 1).
inline double rng_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Stable per-node sub-seed derivation (splitmix64 step).
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace pigpaxos
