#pragma once

// Portable, seed-deterministic random numbers: SplitMix64 as a counter-based
// generator (output i is mix(seed + (i+1) * golden)) and Marsaglia's polar
// method for normals. Results are identical on every platform.

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace opursuit {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-dependent hash of a seed and integer keys.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64_mix(seed ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t k : keys)
        h = splitmix64_mix(h + 0x9e3779b97f4a7c15ULL + splitmix64_mix(k));
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = -bound % bound;
        for (;;) {
            std::uint64_t x = next_u64();
            if (x >= limit)
                return x % bound;
        }
    }

    /// Standard normal via the polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2 * uniform() - 1;
            v = 2 * uniform() - 1;
            s = u * u + v * v;
        } while (s >= 1 || s == 0);
        const double f = std::sqrt(-2 * std::log(s) / s);
        spare_         = v * f;
        has_spare_     = true;
        return u * f;
    }

  private:
    std::uint64_t state_;
    double spare_   = 0;
    bool has_spare_ = false;
};

} // namespace opursuit
