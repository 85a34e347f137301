#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bipar {

// xorshift64* (Vigna 2014): shifts 12/25/27, multiplier 0x2545F4914F6CDD1D.
// The state is initialised from the seed through one splitmix64 step
// (increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
// 0x94D049BB133111EB) so that seed 0 and neighbouring seeds are usable.
// Fixtures produced by the synthetic generator depend on this exact sequence.
class Xorshift64Star {
public:
    explicit Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t next() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one draw per call, the sine branch is discarded so the
    // sequence does not depend on call history beyond the state.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

// Seed for the index-th item of a seeded collection.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

}  // namespace bipar
