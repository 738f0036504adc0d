#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include "blobflow/util.hpp"

namespace blobflow::quad {

struct GaussRule {
    std::vector<double> x;  // nodes on (-1, 1)
    std::vector<double> w;
};

// Gauss-Legendre nodes via Newton iteration on P_n; avoids hardcoded tables.
inline GaussRule make_gauss_rule(int n) {
    GaussRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            // Recurrence for P_n(x) and P_{n-1}(x).
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            pp = n * (x * p0 - p1) / (x * x - 1);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.x[i] = -x;
        rule.x[n - 1 - i] = x;
        rule.w[i] = rule.w[n - 1 - i] = 2.0 / ((1 - x * x) * pp * pp);
    }
    return rule;
}

inline const GaussRule& gauss15() {
    static const GaussRule rule = make_gauss_rule(15);
    return rule;
}

template <class F>
double gauss_panel(F&& f, double a, double b) {
    const GaussRule& g = gauss15();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(c + h * g.x[i]);
    return s * h;
}

// Same panel, but also reports the integral of |f|: the right scale for a
// relative tolerance when the signed integral cancels.
template <class F>
double gauss_panel_abs(F&& f, double a, double b, double& absint) {
    const GaussRule& g = gauss15();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0, sa = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        const double v = g.w[i] * f(c + h * g.x[i]);
        s += v;
        sa += std::abs(v);
    }
    absint = sa * std::abs(h);
    return s * h;
}

struct Options {
    double rel_tol = 1e-9;
    double abs_tol = 0.0;
    int max_splits = 10000;
};

namespace detail {

// One refined interval: `refined` is the bisected estimate, `err` the change
// the bisection produced, and the two halves are kept so a later split can
// reuse them as the children's coarse estimates.
struct Panel {
    double a, b;
    double whole_left, whole_right;
    double refined, err;
};

struct PanelWorse {
    bool operator()(const Panel& x, const Panel& y) const {
        // max-heap on err; ties resolve to the leftmost interval
        return x.err < y.err || (x.err == y.err && x.a > y.a);
    }
};

template <class F>
Panel make_panel(F& f, double a, double b, double whole) {
    const double m = 0.5 * (a + b);
    Panel p;
    p.a = a;
    p.b = b;
    p.whole_left = gauss_panel(f, a, m);
    p.whole_right = gauss_panel(f, m, b);
    p.refined = p.whole_left + p.whole_right;
    p.err = std::abs(p.refined - whole);
    return p;
}

}  // namespace detail

// Globally adaptive quadrature: the interval with the largest bisection
// change is refined first, until the total estimated error meets the
// tolerance. A per-panel acceptance rule would loop forever on integrable
// endpoint singularities (where argument roundoff puts a floor under every
// panel's relative error); the global budget instead lets those panels'
// absolute errors decay geometrically and stops once the sum is small.
// Breakpoints should include any interior kinks or singular points the
// caller knows about. The relative tolerance is measured against the
// integral of |f|, so sign cancellation does not drive the target below
// what the arithmetic can deliver.
template <class F>
double integrate(F&& f, const std::vector<double>& breakpoints, Options opt = {}) {
    std::priority_queue<detail::Panel, std::vector<detail::Panel>, detail::PanelWorse>
        heap;
    double l1 = 0, total = 0, err = 0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        double absint = 0;
        const double whole =
            gauss_panel_abs(f, breakpoints[i], breakpoints[i + 1], absint);
        l1 += absint;
        const detail::Panel p =
            detail::make_panel(f, breakpoints[i], breakpoints[i + 1], whole);
        total += p.refined;
        err += p.err;
        heap.push(p);
    }
    const double tol = std::max(opt.abs_tol, opt.rel_tol * std::max(l1, 1e-300));

    double dead_err = 0;  // panels too thin to bisect in double precision
    for (int n = 0; n < opt.max_splits && err > tol && !heap.empty(); ++n) {
        const detail::Panel p = heap.top();
        heap.pop();
        if (p.b - p.a <= 4e-16 * (std::abs(p.a) + std::abs(p.b)) + 1e-300) {
            dead_err += p.err;
            err -= p.err;
            continue;
        }
        const double m = 0.5 * (p.a + p.b);
        const detail::Panel left = detail::make_panel(f, p.a, m, p.whole_left);
        const detail::Panel right = detail::make_panel(f, m, p.b, p.whole_right);
        total += left.refined + right.refined - p.refined;
        err += left.err + right.err - p.err;
        heap.push(left);
        heap.push(right);
    }
    err += dead_err;
    if (err > 50 * std::max(tol, opt.rel_tol * std::abs(total)))
        throw numerical_error("adaptive quadrature failed to converge");
    return total;
}

template <class F>
double integrate(F&& f, double a, double b, Options opt = {}) {
    return integrate(std::forward<F>(f), std::vector<double>{a, b}, opt);
}

}  // namespace blobflow::quad
