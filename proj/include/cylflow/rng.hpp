#pragma once

#include <cmath>
#include <cstdint>

namespace cylflow {

/// Deterministic PRNG with a fixed cross-platform bit stream (splitmix64).
/// std::mt19937 would be portable too, but the std distributions are not;
/// uniform and normal draws are implemented here so that a seed pins the
/// exact double sequence on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; one cached value per pair.
    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        cache_ = r * std::sin(two_pi * u2);
        have_cache_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_;
    double cache_ = 0.0;
    bool have_cache_ = false;
};

} // namespace cylflow
