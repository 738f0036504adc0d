#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "blobflow/util.hpp"

namespace blobflow {

// Cubic Hermite interpolant of a radial profile on a log-spaced grid
// [r_min, r_max], stored uniformly in u = log r. Callers supply exact node
// values and radial derivatives; slopes are converted to dv/du = r dv/dr.
// With monotone = true they are additionally limited per Fritsch-Carlson, so
// the interpolant never overshoots between nodes of monotone data; use this
// for profiles that are monotone in exact arithmetic, where any secant sign
// change is quadrature noise. Profiles with genuine interior extrema should
// pass monotone = false: their exact slopes already give a fourth-order
// interpolant, and flattening the slope at an extremum node would cut that
// to second order. Nodes whose slopes the limiter altered are recorded: the
// interpolant is still well-defined there, but it no longer reproduces the
// underlying function's derivative to high order.
//
// Below r_min the profile is closed with a single Hermite cubic in r from
// (0, origin_value, slope 0) to (r_min, v_0, v'_0); above r_max evaluation
// throws, because the owner is expected to switch to an analytic far-field
// form well before that.
class RadialTable {
  public:
    RadialTable(double r_min, double r_max, std::vector<double> values,
                std::vector<double> derivs, double origin_value, bool monotone = true)
        : r_min_(r_min),
          r_max_(r_max),
          origin_value_(origin_value),
          v_(std::move(values)) {
        require(r_min_ > 0 && r_max_ > r_min_, "radial table needs 0 < r_min < r_max");
        require(v_.size() >= 4, "radial table needs at least 4 nodes");
        require(derivs.size() == v_.size(), "radial table values/derivs size mismatch");
        require(all_finite(v_) && all_finite(derivs), "radial table nodes must be finite");
        require(std::isfinite(origin_value_), "radial table origin value must be finite");

        const std::size_t n = v_.size();
        u0_ = std::log(r_min_);
        h_ = (std::log(r_max_) - u0_) / static_cast<double>(n - 1);
        dvdr0_ = derivs[0];

        // slopes per unit grid step: dv/dt = dv/dr * r * h on the log grid
        m_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            m_[i] = derivs[i] * std::exp(u0_ + h_ * static_cast<double>(i)) * h_;

        if (monotone) limit_slopes();
    }

    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    std::size_t size() const { return v_.size(); }
    double node_radius(std::size_t i) const {
        return std::exp(u0_ + h_ * static_cast<double>(i));
    }
    double node_value(std::size_t i) const { return v_[i]; }
    double origin_value() const { return origin_value_; }

    // Indices whose slope the monotonicity limiter changed.
    const std::vector<std::size_t>& limited_nodes() const { return limited_; }

    double value(double r) const {
        check_radius(r);
        if (r >= r_min_) {
            const auto [i, t] = locate(r);
            return hermite(v_[i], m_[i], v_[i + 1], m_[i + 1], t);
        }
        return blend(r).first;
    }

    // Exact derivative of the interpolant (not of the underlying function).
    double deriv(double r) const {
        check_radius(r);
        if (r >= r_min_) {
            const auto [i, t] = locate(r);
            return hermite_deriv(v_[i], m_[i], v_[i + 1], m_[i + 1], t) / (h_ * r);
        }
        return blend(r).second;
    }

  private:
    static double hermite(double v0, double m0, double v1, double m1, double t) {
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * m0 +
               (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * m1;
    }
    // d/dt of the above; slopes m are already per unit t.
    static double hermite_deriv(double v0, double m0, double v1, double m1, double t) {
        const double t2 = t * t;
        return (6 * t2 - 6 * t) * v0 + (3 * t2 - 4 * t + 1) * m0 +
               (-6 * t2 + 6 * t) * v1 + (3 * t2 - 2 * t) * m1;
    }

    void check_radius(double r) const {
        if (!(r >= 0) || !std::isfinite(r))
            throw std::domain_error("radial table radius must be finite and nonnegative");
        if (r > r_max_ * (1 + 1e-12))
            throw std::domain_error("radial table evaluated beyond r_max");
    }

    std::pair<std::size_t, double> locate(double r) const {
        const double u = std::log(std::min(r, r_max_));
        const double s = (u - u0_) / h_;
        const std::size_t i =
            std::min(static_cast<std::size_t>(std::max(s, 0.0)), v_.size() - 2);
        return {i, std::clamp(s - static_cast<double>(i), 0.0, 1.0)};
    }

    // Hermite cubic in r on [0, r_min] closing the profile at the origin.
    std::pair<double, double> blend(double r) const {
        const double t = r / r_min_;
        // slope per unit t at the right end; left end has zero slope
        const double m1 = dvdr0_ * r_min_;
        const double val = hermite(origin_value_, 0.0, v_[0], m1, t);
        const double der = hermite_deriv(origin_value_, 0.0, v_[0], m1, t) / r_min_;
        return {val, der};
    }

    void limit_slopes() {
        const std::size_t n = v_.size();
        // data secants per unit grid step
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) d[i] = v_[i + 1] - v_[i];

        auto mark = [&](std::size_t i) {
            if (limited_.empty() || limited_.back() != i) limited_.push_back(i);
        };

        // Nodes where the data has a local extremum get flat slopes.
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] < 0 && m_[i] != 0.0) {
                m_[i] = 0.0;
                mark(i);
            }
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                if (m_[i] != 0.0) m_[i] = 0.0, mark(i);
                if (m_[i + 1] != 0.0) m_[i + 1] = 0.0, mark(i + 1);
                continue;
            }
            const double alpha = m_[i] / d[i];
            const double beta = m_[i + 1] / d[i];
            if (alpha < 0) m_[i] = 0.0, mark(i);
            if (beta < 0) m_[i + 1] = 0.0, mark(i + 1);
            const double a2 = m_[i] / d[i], b2 = m_[i + 1] / d[i];
            const double s2 = a2 * a2 + b2 * b2;
            if (s2 > 9.0) {
                const double tau = 3.0 / std::sqrt(s2);
                m_[i] *= tau;
                m_[i + 1] *= tau;
                mark(i);
                mark(i + 1);
            }
        }
        std::sort(limited_.begin(), limited_.end());
        limited_.erase(std::unique(limited_.begin(), limited_.end()), limited_.end());
    }

    double r_min_, r_max_;
    double u0_ = 0, h_ = 1;
    double origin_value_ = 0;
    double dvdr0_ = 0;
    std::vector<double> v_;
    std::vector<double> m_;  // slopes dv/du, after limiting
    std::vector<std::size_t> limited_;
};

}  // namespace blobflow
