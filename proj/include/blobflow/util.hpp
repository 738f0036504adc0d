#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace blobflow {

// Raised when an algorithm fails numerically (quadrature that will not
// converge, NaN positions, a line search that dies at machine precision).
// Distinct from std::invalid_argument, which signals a bad specification.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sqr(double x) { return x * x; }

// Surface area of the unit sphere S^{d-1}: 2, 2*pi, 4*pi for d = 1, 2, 3.
inline double sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: throw std::invalid_argument("sphere_area: dim must be 1, 2 or 3");
    }
}

// Volume of the ball of radius r in dimension d.
inline double ball_volume(int dim, double r) {
    return sphere_area(dim) * std::pow(r, dim) / dim;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Euclidean norm of a d-vector stored at p.
inline double norm(const double* p, int dim) {
    double s = 0;
    for (int k = 0; k < dim; ++k) s += p[k] * p[k];
    return std::sqrt(s);
}

inline double dist(const double* a, const double* b, int dim) {
    double s = 0;
    for (int k = 0; k < dim; ++k) s += sqr(a[k] - b[k]);
    return std::sqrt(s);
}

inline double dist2(const double* a, const double* b, int dim) {
    double s = 0;
    for (int k = 0; k < dim; ++k) s += sqr(a[k] - b[k]);
    return s;
}

// Neumaier-compensated sum: the result is accurate to a couple of ulps of
// the true sum independent of length, where a plain loop drifts by n ulps.
// Weight normalizations are validated at 1e-12, which a naive sum over a
// million particles would not reliably meet.
inline double compensated_sum(const double* v, std::size_t n) {
    double s = 0, c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = s + v[i];
        c += std::abs(s) >= std::abs(v[i]) ? (s - t) + v[i] : (v[i] - t) + s;
        s = t;
    }
    return s + c;
}

inline double compensated_sum(const std::vector<double>& v) {
    return compensated_sum(v.data(), v.size());
}

}  // namespace blobflow
