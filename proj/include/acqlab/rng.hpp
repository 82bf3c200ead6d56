#pragma once

#include <cstdint>

namespace acqlab {

// Deterministic, platform-independent generator. Sub-streams are derived by
// hashing (seed, round, purpose) through splitmix64, so draws do not depend on
// evaluation order elsewhere in the round.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}

    // splitmix64 step
    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // index into an unnormalized nonnegative weight vector
    int sample_discrete(const double* w, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += w[i];
        double u = uniform01() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += w[i];
            if (u < acc) return i;
        }
        // fall through on rounding: last index with positive weight
        for (int i = n - 1; i >= 0; --i)
            if (w[i] > 0.0) return i;
        return n - 1;
    }
};

inline uint64_t mix_u64(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// One sub-stream per (round, purpose); purposes: 0 recommendation draw,
// 1 signal/state draw, 2 principal action draw, 3+ free.
inline Rng substream(uint64_t seed, uint64_t round, uint64_t purpose) {
    return Rng(mix_u64(mix_u64(seed, round), purpose));
}

}  // namespace acqlab
