#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "blobflow/quadrature.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

enum class MollifierFamily { GaussianHeat, CompactBump };

struct MollifierSpec {
    MollifierFamily family = MollifierFamily::GaussianHeat;
    double sigma = 1.0;  // width of the base profile (support radius for the bump)
};

namespace detail {

// Unit-support bump shape exp(-1/(1-u^2)); smooth on all of R, zero for u >= 1.
inline double bump_shape(double u) {
    if (u >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
}

// Plain cubic Hermite interpolant on a uniform grid over [0, len] with
// centered-difference slopes; clamped to zero past the end and below zero
// (the tabulated profiles are nonnegative).
class UniformHermite {
  public:
    UniformHermite() = default;
    UniformHermite(std::vector<double> values, double len)
        : v_(std::move(values)), len_(len) {
        const std::size_t n = v_.size();
        s_.assign(n, 0.0);
        const double h = len_ / static_cast<double>(n - 1);
        for (std::size_t i = 1; i + 1 < n; ++i) s_[i] = (v_[i + 1] - v_[i - 1]) / (2 * h);
        // zero slope at r = 0 (smooth radial profile) and at the far end
        // (support boundary), both exact for the profiles tabulated here.
    }
    double operator()(double r) const {
        if (r >= len_) return 0.0;
        const std::size_t n = v_.size();
        const double h = len_ / static_cast<double>(n - 1);
        const double t = r / h;
        const std::size_t i = std::min(static_cast<std::size_t>(t), n - 2);
        const double u = t - static_cast<double>(i);
        const double u2 = u * u, u3 = u2 * u;
        const double val = (2 * u3 - 3 * u2 + 1) * v_[i] + (u3 - 2 * u2 + u) * h * s_[i] +
                           (-2 * u3 + 3 * u2) * v_[i + 1] + (u3 - u2) * h * s_[i + 1];
        return std::max(val, 0.0);
    }

  private:
    std::vector<double> v_;
    std::vector<double> s_;
    double len_ = 1.0;
};

struct BumpData {
    double norm = 0;  // A such that A * bump_shape(|x|) has unit mass
    double m2 = 0;    // second moment of the unit-sigma profile
    UniformHermite autocorr;  // self-convolution on [0, 2]
};

// Self-convolution of the unit bump at offset r, reduced to radial integrals.
// The absolute-tolerance floors matter: near the support edge the integrands
// fall through the denormal range, where a purely relative tolerance is
// unreachable. The profile's scale is O(1), so anything below ~1e-16 is zero
// for every downstream purpose.
inline double bump_autocorr_node(int d, double A, double r) {
    const quad::Options tight{1e-11, 1e-18, 20000};
    const double A2 = A * A;
    if (r >= 2.0) return 0.0;
    if (d == 1) {
        if (r == 0.0)
            return 2 * A2 * quad::integrate([](double s) { return sqr(bump_shape(s)); },
                                            0.0, 1.0, tight);
        // overlap of the two unit supports: s in (r-1, 1)
        std::vector<double> bp = {r - 1.0, 1.0};
        if (r < 1.0) bp = {r - 1.0, 0.0, r, 1.0};
        return A2 * quad::integrate(
                        [r](double s) { return bump_shape(std::abs(s)) * bump_shape(std::abs(s - r)); },
                        bp, {1e-11, 1e-16, 20000});
    }
    if (d == 2) {
        if (r == 0.0)
            return 2 * std::numbers::pi * A2 *
                   quad::integrate([](double s) { return s * sqr(bump_shape(s)); }, 0.0, 1.0,
                                   tight);
        auto outer = [&](double s) {
            auto ang = [&](double th) {
                return bump_shape(
                    std::sqrt(std::max(0.0, r * r + s * s - 2 * r * s * std::cos(th))));
            };
            std::vector<double> bp = {0.0, std::numbers::pi};
            const double c = (r * r + s * s - 1.0) / (2 * r * s);
            if (c > -1.0 && c < 1.0) bp.insert(bp.begin() + 1, std::acos(c));
            return s * bump_shape(s) * 2.0 * quad::integrate(ang, bp, tight);
        };
        return A2 * quad::integrate(outer, 0.0, 1.0, {1e-10, 1e-16, 20000});
    }
    if (r == 0.0)
        return 4 * std::numbers::pi * A2 *
               quad::integrate([](double s) { return s * s * sqr(bump_shape(s)); }, 0.0, 1.0,
                               tight);
    auto outer = [&](double s) {
        const double lo = std::abs(r - s), hi = std::min(1.0, r + s);
        if (lo >= hi) return 0.0;
        const double inner =
            quad::integrate([](double u) { return u * bump_shape(u); }, lo, hi, tight);
        return s * bump_shape(s) * inner;
    };
    return A2 * (2 * std::numbers::pi / r) * quad::integrate(outer, 0.0, 1.0, {1e-10, 1e-16, 20000});
}

inline BumpData build_bump_data(int d) {
    BumpData b;
    const quad::Options tight{1e-12, 0.0, 20000};
    const double mass =
        sphere_area(d) * quad::integrate([d](double u) { return std::pow(u, d - 1) * bump_shape(u); },
                                         0.0, 1.0, tight);
    b.norm = 1.0 / mass;
    b.m2 = b.norm * sphere_area(d) *
           quad::integrate([d](double u) { return std::pow(u, d + 1) * bump_shape(u); }, 0.0,
                           1.0, tight);
    const int n = 1025;
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = bump_autocorr_node(d, b.norm, 2.0 * i / (n - 1));
    b.autocorr = UniformHermite(std::move(vals), 2.0);
    return b;
}

inline const BumpData& bump_data(int d) {
    require(d >= 1 && d <= 3, "mollifier dimension must be 1, 2, or 3");
    if (d == 1) {
        static const BumpData b = build_bump_data(1);
        return b;
    }
    if (d == 2) {
        static const BumpData b = build_bump_data(2);
        return b;
    }
    static const BumpData b = build_bump_data(3);
    return b;
}

}  // namespace detail

// Unit-mass radial mollifier phi together with its self-convolution
// Phi = phi * phi. Blob regularization convolves the interaction kernel with
// Phi_eps, where phi_eps(x) = eps^-d phi(x/eps), so both the base profile and
// its eps-scalings are exposed. The Gaussian profile is the heat kernel at
// time sigma^2 (so Phi is the heat kernel at 2 sigma^2); the bump profile is
// compactly supported on |x| <= sigma with Phi supported on |x| <= 2 sigma.
class Mollifier {
  public:
    Mollifier(MollifierSpec spec, int d) : spec_(spec), d_(d) {
        require(d >= 1 && d <= 3, "mollifier dimension must be 1, 2, or 3");
        require(spec.sigma > 0, "mollifier width sigma must be positive");
        if (compact()) bump_ = &detail::bump_data(d);
    }

    const MollifierSpec& spec() const { return spec_; }
    MollifierFamily family() const { return spec_.family; }
    double sigma() const { return spec_.sigma; }
    int dim() const { return d_; }
    bool compact() const { return spec_.family == MollifierFamily::CompactBump; }

    double support() const { return compact() ? spec_.sigma : kInf; }
    double autocorr_support() const { return compact() ? 2 * spec_.sigma : kInf; }
    double support_scaled(double eps) const { return compact() ? spec_.sigma * eps : kInf; }
    double autocorr_support_scaled(double eps) const {
        return compact() ? 2 * spec_.sigma * eps : kInf;
    }

    // phi(r)
    double value(double r) const {
        const double s = spec_.sigma;
        if (compact()) return bump_->norm * std::pow(s, -d_) * detail::bump_shape(r / s);
        return heat_value(r, s * s);
    }
    // Phi(r) = (phi * phi)(r)
    double autocorr(double r) const {
        const double s = spec_.sigma;
        if (compact()) return std::pow(s, -d_) * bump_->autocorr(r / s);
        return heat_value(r, 2 * s * s);
    }
    double value_scaled(double r, double eps) const {
        return std::pow(eps, -d_) * value(r / eps);
    }
    double autocorr_scaled(double r, double eps) const {
        return std::pow(eps, -d_) * autocorr(r / eps);
    }

    // M2(phi) = int |x|^2 phi(x) dx; variances add under convolution, so
    // M2(Phi) = 2 M2(phi), and scaling multiplies by eps^2.
    double second_moment() const {
        const double s2 = sqr(spec_.sigma);
        return compact() ? s2 * bump_->m2 : 2.0 * d_ * s2;
    }
    double autocorr_second_moment() const { return 2 * second_moment(); }
    double autocorr_second_moment_scaled(double eps) const {
        return sqr(eps) * autocorr_second_moment();
    }

    // Heat time T with Phi_eps = heat kernel at time T (Gaussian family only).
    double autocorr_heat_time(double eps) const {
        require(!compact(), "heat time is defined for the Gaussian mollifier only");
        return 2 * sqr(spec_.sigma * eps);
    }

  private:
    double heat_value(double r, double t) const {
        return std::pow(4 * std::numbers::pi * t, -0.5 * d_) * std::exp(-r * r / (4 * t));
    }

    MollifierSpec spec_;
    int d_;
    const detail::BumpData* bump_ = nullptr;
};

}  // namespace blobflow
