#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace blobflow {

// Deterministic generator with fixed constants so streams can be reproduced
// in any language from the documented recurrence (see README):
//
//   state += 0x9e3779b97f4a7c15
//   z = state; z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   output = z ^ (z >> 31)
//
// Uniform doubles take the top 53 bits: (output >> 11) * 2^-53, giving
// values in [0, 1). Normals use the Box-Muller transform on two uniforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal. Box-Muller; u1 is nudged away from 0 so log stays finite.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::uint64_t state_;
    double spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace blobflow
