#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace zico {

// Deterministic, platform-independent random source. std::mt19937 would pin
// the engine but not the distributions (normal_distribution differs across
// standard libraries), so both the generator (xoshiro256++) and the
// distributions (Box-Muller, rejection sampling) are spelled out here.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform double in [0, 1) with 53 bits of entropy
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n) via rejection
    int uniform_int(int n) {
        const uint64_t bound = n;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return int(draw % bound);
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        // Box-Muller; u1 nudged away from 0 so log stays finite
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // +1 or -1 with equal probability
    double sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        for (int i = n - 1; i > 0; --i) {
            const int j = uniform_int(i + 1);
            std::swap(p[i], p[j]);
        }
        return p;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Stable seed derivation: child = hash(parent, label). All parallelism in the
// toolkit draws seeds through this, so results never depend on thread count.
inline uint64_t derive_seed(uint64_t parent, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ull ^ parent;
    for (const char c : label) {
        h ^= uint8_t(c);
        h *= 0x100000001b3ull;
    }
    // one splitmix round to spread low-entropy labels
    return splitmix64(h);
}

inline uint64_t derive_seed(uint64_t parent, uint64_t index) {
    uint64_t h = parent ^ (0x9e3779b97f4a7c15ull + index);
    return splitmix64(h);
}

} // namespace zico
