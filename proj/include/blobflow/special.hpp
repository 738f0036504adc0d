#pragma once

#include <cmath>
#include <numbers>

// Small special-function helpers used by the radial convolution quadratures.

namespace blobflow {

// e^{-z} I_0(z). The library Bessel overflows past z ~ 700, so large
// arguments switch to the uniform asymptotic expansion; at the seam the two
// branches agree to ~1e-12, far below the quadrature tolerance.
inline double scaled_i0(double z) {
    if (z < 600.0) return std::cyl_bessel_i(0.0, z) * std::exp(-z);
    const double iz = 1.0 / z;
    return (1.0 + iz * (0.125 + iz * (0.0703125 + iz * 0.0732421875))) /
           std::sqrt(2.0 * std::numbers::pi * z);
}

// e^{-z} I_1(z), same branch structure.
inline double scaled_i1(double z) {
    if (z < 600.0) return std::cyl_bessel_i(1.0, z) * std::exp(-z);
    const double iz = 1.0 / z;
    return (1.0 - iz * (0.375 + iz * (0.1171875 + iz * 0.1025390625))) /
           std::sqrt(2.0 * std::numbers::pi * z);
}

// z cosh z - sinh z, evaluated by series for small z where the naive form
// cancels catastrophically (the difference is O(z^3) against terms of O(z)).
inline double zcosh_minus_sinh(double z) {
    if (std::abs(z) > 0.5) return z * std::cosh(z) - std::sinh(z);
    // sum_{k>=1} z^{2k+1} * 2k / (2k+1)!
    double sum = 0, pow = z * z * z;  // z^(2k+1) for k=1
    double fact = 6;                  // (2k+1)! for k=1
    for (int k = 1; k < 12; ++k) {
        sum += pow * (2 * k) / fact;
        pow *= z * z;
        fact *= (2 * k + 2) * (2 * k + 3);
    }
    return sum;
}

// e^{-a} (z cosh z - sinh z), safe when z is large enough that cosh z alone
// would overflow: regroups as e^{z-a} * ((z-1) + (z+1) e^{-2z}) / 2.
inline double exp_zcosh_minus_sinh(double a, double z) {
    if (z < 300.0) return std::exp(-a) * zcosh_minus_sinh(z);
    return std::exp(z - a) * ((z - 1.0) + (z + 1.0) * std::exp(-2.0 * z)) * 0.5;
}

// e^{-a} sinh z with the same overflow-safe regrouping.
inline double exp_sinh(double a, double z) {
    if (z < 300.0) return std::exp(-a) * std::sinh(z);
    return std::exp(z - a) * (1.0 - std::exp(-2.0 * z)) * 0.5;
}

}  // namespace blobflow
