#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "blobflow/kernels.hpp"
#include "blobflow/mollifiers.hpp"
#include "blobflow/parallel.hpp"
#include "blobflow/quadrature.hpp"
#include "blobflow/radial_table.hpp"
#include "blobflow/special.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

struct MollifiedKernelConfig {
    int n_nodes = 2048;              // log-spaced table nodes
    double r_min_factor = 1e-4;      // r_min = r_min_factor * eps
    double r_max = 1e3;              // table end; closed-form far field beyond
    double tail_switch_factor = 50;  // far-field form beyond tail_switch_factor * eps
    double quad_rel_tol = 1e-9;
    int threads = 1;                 // node tabulation parallelism (result-invariant)
};

enum class PartKind { Attractive, Repulsive, Full };

inline const char* to_string(PartKind k) {
    switch (k) {
        case PartKind::Attractive: return "attractive";
        case PartKind::Repulsive: return "repulsive";
        case PartKind::Full: return "full";
    }
    return "?";
}

namespace detail {

// Computes (g * Phi_eps)(r) and its radial derivative for one additive kernel
// piece, where Phi_eps is the mollifier's scaled self-convolution. Each
// dimension gets its own reduction of the d-dimensional convolution to one or
// two adaptive 1-d integrals; the Gaussian family additionally collapses the
// angular integral into closed forms (scaled Bessel / sinh kernels).
class RadialConvolver {
  public:
    struct Node {
        double value = 0, deriv = 0;
    };

    RadialConvolver(KernelProfile g, const Mollifier& mol, double eps, double rel_tol)
        : g_(std::move(g)), mol_(mol), eps_(eps), d_(mol.dim()) {
        opt_ = quad::Options{rel_tol, 1e-14, 20000};
        // Inner (angular / chord) integrals feed an outer adaptive pass, which
        // would otherwise chase their quadrature noise; keep them two orders
        // tighter so the outer tolerance dominates.
        opt_in_ = quad::Options{rel_tol * 1e-2, 1e-16, 20000};
        if (mol_.compact()) {
            window_ = mol_.autocorr_support_scaled(eps_);
        } else {
            T_ = mol_.autocorr_heat_time(eps_);
            // e^{-w^2/4T} ~ 1e-20 at the window edge
            window_ = 13.6 * std::sqrt(T_);
        }
    }

    // (g * Phi_eps)(0): the weight is radial, so a single radial integral.
    double origin() const {
        auto f = [&](double s) {
            return std::pow(s, d_ - 1) * phi(s) * g_.value(s);
        };
        return sphere_area(d_) * quad::integrate(f, {0.0, window_}, opt_);
    }

    Node node(double r) const {
        require(r > 0, "convolution nodes must have positive radius");
        if (d_ == 1) return node_1d(r);
        if (mol_.compact()) return d_ == 2 ? node_2d_bump(r) : node_3d_bump(r);
        return d_ == 2 ? node_2d_gauss(r) : node_3d_gauss(r);
    }

  private:
    double phi(double s) const { return mol_.autocorr_scaled(s, eps_); }

    std::vector<double> radial_breaks(double r, double lo, double hi) const {
        std::vector<double> bp = {lo};
        if (r > lo && r < hi) bp.push_back(r);
        bp.push_back(hi);
        return bp;
    }

    Node node_1d(double r) const {
        const double hi = window_;
        const auto bp = radial_breaks(r, 0.0, hi);
        Node n;
        n.value = quad::integrate(
            [&](double s) {
                return phi(s) * (g_.value(std::abs(r - s)) + g_.value(r + s));
            },
            bp, opt_);
        n.deriv = quad::integrate(
            [&](double s) {
                const double left =
                    s == r ? 0.0 : (r > s ? 1.0 : -1.0) * g_.deriv(std::abs(r - s));
                return phi(s) * (left + g_.deriv(r + s));
            },
            bp, opt_);
        return n;
    }

    Node node_2d_gauss(double r) const {
        const double lo = std::max(0.0, r - window_), hi = r + window_;
        const auto bp = radial_breaks(r, lo, hi);
        const double inv2T = 1.0 / (2 * T_);
        Node n;
        n.value = inv2T * quad::integrate(
                              [&](double s) {
                                  const double z = r * s * inv2T;
                                  const double w = std::exp(-sqr(r - s) / (4 * T_));
                                  return s * g_.value(s) * w * scaled_i0(z);
                              },
                              bp, opt_);
        n.deriv = inv2T * inv2T *
                  quad::integrate(
                      [&](double s) {
                          const double z = r * s * inv2T;
                          const double w = std::exp(-sqr(r - s) / (4 * T_));
                          return s * g_.value(s) * w * (s * scaled_i1(z) - r * scaled_i0(z));
                      },
                      bp, opt_);
        return n;
    }

    Node node_3d_gauss(double r) const {
        const double lo = std::max(0.0, r - window_), hi = r + window_;
        const auto bp = radial_breaks(r, lo, hi);
        const double C = std::pow(4 * std::numbers::pi * T_, -0.5);
        Node n;
        n.value = (2 * C / r) * quad::integrate(
                                    [&](double s) {
                                        const double a = (r * r + s * s) / (4 * T_);
                                        const double z = r * s / (2 * T_);
                                        return s * g_.value(s) * exp_sinh(a, z);
                                    },
                                    bp, opt_);
        n.deriv = C * quad::integrate(
                          [&](double s) {
                              const double a = (r * r + s * s) / (4 * T_);
                              const double z = r * s / (2 * T_);
                              return s * g_.value(s) *
                                     ((2 / (r * r)) * exp_zcosh_minus_sinh(a, z) -
                                      exp_sinh(a, z) / T_);
                          },
                          bp, opt_);
        return n;
    }

    Node node_2d_bump(double r) const {
        const double S = window_;
        const auto bp = radial_breaks(r, 0.0, S);
        const double two_pi = 2.0 * std::numbers::pi;
        auto mean_value = [&](double s) {
            if (g_.circle_mean) return two_pi * g_.circle_mean(r, s);
            auto ang = [&](double th) {
                const double u2 = r * r + s * s - 2 * r * s * std::cos(th);
                return g_.value(std::sqrt(std::max(u2, 0.0)));
            };
            return 2.0 * quad::integrate(ang, {0.0, std::numbers::pi}, opt_in_);
        };
        auto mean_deriv = [&](double s) {
            if (g_.circle_mean_dr) return two_pi * g_.circle_mean_dr(r, s);
            auto ang = [&](double th) {
                const double c = std::cos(th);
                const double u =
                    std::sqrt(std::max(r * r + s * s - 2 * r * s * c, 1e-300));
                return g_.deriv(u) * (r - s * c) / u;
            };
            return 2.0 * quad::integrate(ang, {0.0, std::numbers::pi}, opt_in_);
        };
        Node n;
        n.value = quad::integrate([&](double s) { return s * phi(s) * mean_value(s); },
                                  bp, opt_);
        n.deriv = quad::integrate([&](double s) { return s * phi(s) * mean_deriv(s); },
                                  bp, opt_);
        return n;
    }

    Node node_3d_bump(double r) const {
        const double S = window_;
        const auto bp = radial_breaks(r, 0.0, S);
        auto chord = [&](double a, double b) {
            if (g_.chord) return g_.chord(a, b);
            return quad::integrate([&](double u) { return u * g_.value(u); }, a, b,
                                   opt_in_);
        };
        Node n;
        n.value = (2 * std::numbers::pi / r) *
                  quad::integrate(
                      [&](double s) {
                          return s * phi(s) * chord(std::abs(r - s), r + s);
                      },
                      bp, opt_);
        n.deriv = (2 * std::numbers::pi / r) *
                      quad::integrate(
                          [&](double s) {
                              const double a = std::abs(r - s);
                              const double lower = a == 0.0 ? 0.0 : (r - s) * g_.value(a);
                              return s * phi(s) * ((r + s) * g_.value(r + s) - lower);
                          },
                          bp, opt_) -
                  n.value / r;
        return n;
    }

    KernelProfile g_;
    const Mollifier& mol_;
    double eps_;
    int d_;
    double T_ = 0;       // heat time of Phi_eps (Gaussian family)
    double window_ = 0;  // integration range: support radius or Gaussian cutoff
    quad::Options opt_;
    quad::Options opt_in_;
};

// Far-field model: g * Phi_eps ~ g + (M2(Phi_eps) / 2d) * (Laplacian g), with
// the next correction of relative size (eps/r)^4. The Laplacian is closed
// form per built-in piece and finite-difference for user profiles.
struct TailModel {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
};

inline TailModel make_tail_model(const KernelSpec& k, PartKind kind,
                                 const KernelProfile& g, double m2_over_2d) {
    const double c = m2_over_2d;
    if (k.family == KernelFamily::PowerLaw) {
        if (kind == PartKind::Repulsive && k.is_log()) {
            const double d = k.d;
            return {[c, d](double r) { return -std::log(r) - c * (d - 2) / (r * r); },
                    [c, d](double r) { return -1.0 / r + 2 * c * (d - 2) / (r * r * r); }};
        }
        // c_g * r^e with Laplacian c_g e (e + d - 2) r^{e-2}
        const double e = kind == PartKind::Attractive ? k.q : k.p;
        const double cg = kind == PartKind::Attractive ? 1.0 / k.q : -1.0 / k.p;
        const double lap = cg * e * (e + k.d - 2.0);
        return {[=](double r) { return cg * std::pow(r, e) + c * lap * std::pow(r, e - 2); },
                [=](double r) {
                    return cg * e * std::pow(r, e - 1) +
                           c * lap * (e - 2) * std::pow(r, e - 3);
                }};
    }
    // generic: finite-difference Laplacian of the piece
    const int d = k.d;
    auto lap = [g, d](double r) {
        const double h = 1e-4 * r;
        const double second = (g.deriv(r + h) - g.deriv(r - h)) / (2 * h);
        return second + (d - 1) * g.deriv(r) / r;
    };
    return {[g, c, lap](double r) { return g.value(r) + c * lap(r); },
            [g, c, lap](double r) {
                const double h = 1e-4 * r;
                return g.deriv(r) + c * (lap(r + h) - lap(r - h)) / (2 * h);
            }};
}

}  // namespace detail

struct MollifiedPart {
    PartKind kind;
    RadialTable table;
    detail::TailModel tail;
};

// Interaction kernel convolved with the mollifier's scaled self-convolution,
// tabulated per attractive/repulsive piece on a log grid with a closed-form
// far field. Evaluation is defined for every radius r >= 0.
class MollifiedKernel {
  public:
    MollifiedKernel(KernelSpec kernel, Mollifier mollifier, double eps,
                    MollifiedKernelConfig cfg, std::vector<MollifiedPart> parts,
                    double tail_switch, double lambda_hat, double tail_check_err)
        : kernel_(std::move(kernel)),
          mollifier_(std::move(mollifier)),
          eps_(eps),
          cfg_(cfg),
          parts_(std::move(parts)),
          tail_switch_(tail_switch),
          lambda_hat_(lambda_hat),
          tail_check_err_(tail_check_err) {}

    const KernelSpec& kernel() const { return kernel_; }
    const Mollifier& mollifier() const { return mollifier_; }
    double eps() const { return eps_; }
    int dim() const { return kernel_.d; }
    const MollifiedKernelConfig& config() const { return cfg_; }
    const std::vector<MollifiedPart>& parts() const { return parts_; }
    double tail_switch() const { return tail_switch_; }
    // Largest seam/model error found by the build-time far-field check.
    double tail_check_error() const { return tail_check_err_; }
    // True when the kernel family has a canonical attractive/repulsive split.
    bool split_valid() const { return parts_.front().kind != PartKind::Full; }
    // M2 of the scaled mollifier self-convolution.
    double autocorr_second_moment() const {
        return mollifier_.autocorr_second_moment_scaled(eps_);
    }
    // Grid estimate of inf min(K'', K'/r), clamped to <= 0: a semi-convexity
    // modulus for the regularized kernel.
    double lambda_hat() const { return lambda_hat_; }

    double part_value(const MollifiedPart& p, double r) const {
        if (r >= tail_switch_) return p.tail.value(r);
        return p.table.value(r);
    }
    double part_deriv(const MollifiedPart& p, double r) const {
        if (r >= tail_switch_) return p.tail.deriv(r);
        return p.table.deriv(r);
    }

    double value(double r) const {
        double s = 0;
        for (const auto& p : parts_) s += part_value(p, r);
        return s;
    }
    // dK_eps/dr
    double deriv(double r) const {
        double s = 0;
        for (const auto& p : parts_) s += part_deriv(p, r);
        return s;
    }
    double value_at_origin() const { return value(0.0); }

    double attractive_value(double r) const {
        return kind_value(PartKind::Attractive, r);
    }
    double repulsive_value(double r) const { return kind_value(PartKind::Repulsive, r); }

    // grad K_eps(x) = K_eps'(|x|) x / |x|; smooth through the origin.
    void grad(const double* x, double* out) const {
        const double r = norm(x, kernel_.d);
        if (r == 0.0) {
            for (int i = 0; i < kernel_.d; ++i) out[i] = 0.0;
            return;
        }
        const double factor = deriv(r) / r;
        for (int i = 0; i < kernel_.d; ++i) out[i] = factor * x[i];
    }

  private:
    double kind_value(PartKind kind, double r) const {
        for (const auto& p : parts_)
            if (p.kind == kind) return part_value(p, r);
        return 0.0;
    }

    KernelSpec kernel_;
    Mollifier mollifier_;
    double eps_;
    MollifiedKernelConfig cfg_;
    std::vector<MollifiedPart> parts_;
    double tail_switch_;
    double lambda_hat_;
    double tail_check_err_;
};

// Checks regularization preconditions, then tabulates each kernel piece.
// Throws std::invalid_argument when the kernel fails the hypothesis check or
// the mollifier pairing is unsound, and numerical_error when the far-field
// model disagrees with quadrature at the switch radius.
inline MollifiedKernel build_mollified_kernel(const KernelSpec& kernel,
                                              const Mollifier& mollifier, double eps,
                                              const MollifiedKernelConfig& cfg = {}) {
    require(kernel.d == mollifier.dim(), "kernel and mollifier dimensions differ");
    require(eps > 0 && eps <= 10, "regularization scale eps must lie in (0, 10]");
    require(cfg.n_nodes >= 64, "mollified kernel table needs at least 64 nodes");

    const HypothesisReport rep = check_hypotheses(kernel);
    if (!rep.admissible_for_mollification())
        throw std::invalid_argument(rep.failure_message());
    if (!mollifier.compact()) {
        const auto* h4 = rep.find("H4");
        const bool profile_optout =
            h4 != nullptr && h4->status == HypothesisStatus::NotChecked;
        if (!rep.canonical_superharmonic && !profile_optout)
            throw std::invalid_argument(
                "Gaussian mollification needs a superharmonic repulsive part; "
                "use the compactly supported mollifier for this kernel");
    }

    const double r_min = cfg.r_min_factor * eps;
    const double tail_switch = cfg.tail_switch_factor * eps;
    require(r_min < tail_switch && tail_switch < cfg.r_max,
            "mollified kernel radii must satisfy r_min < tail_switch < r_max");

    const SplitKernel split = split_kernel(kernel);
    std::vector<std::pair<PartKind, const KernelProfile*>> pieces;
    if (split.canonical) {
        pieces.emplace_back(PartKind::Attractive, &split.attractive);
        pieces.emplace_back(PartKind::Repulsive, &split.repulsive);
    } else {
        pieces.emplace_back(PartKind::Full, &split.unsplit);
    }

    const int n = cfg.n_nodes;
    const double u0 = std::log(r_min);
    const double h = (std::log(cfg.r_max) - u0) / (n - 1);
    std::vector<double> radii(n);
    for (int i = 0; i < n; ++i) radii[i] = std::exp(u0 + h * i);

    const double m2_over_2d =
        mollifier.autocorr_second_moment_scaled(eps) / (2.0 * kernel.d);

    std::vector<MollifiedPart> parts;
    double tail_check_err = 0;
    for (const auto& [kind, profile] : pieces) {
        if (profile->zero) continue;
        const detail::RadialConvolver conv(*profile, mollifier, eps, cfg.quad_rel_tol);
        const detail::TailModel tail =
            detail::make_tail_model(kernel, kind, *profile, m2_over_2d);

        std::vector<double> v(n), dv(n);
        parallel_for(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t i) {
            const double r = radii[i];
            if (r >= tail_switch) {
                v[i] = tail.value(r);
                dv[i] = tail.deriv(r);
            } else {
                const auto node = conv.node(r);
                v[i] = node.value;
                dv[i] = node.deriv;
            }
        });
        const double origin = conv.origin();

        // far-field model must agree with quadrature just past the switch
        for (double factor : {1.07, 1.9}) {
            const double r = tail_switch * factor;
            if (r >= cfg.r_max) break;
            const auto node = conv.node(r);
            const double err = std::abs(node.value - tail.value(r)) /
                               std::max(std::abs(node.value), 1e-12);
            tail_check_err = std::max(tail_check_err, err);
        }

        // Canonical parts are monotone in exact arithmetic, so limiting only
        // removes quadrature noise; a full profile can have genuine interior
        // extrema that limiting would blunt.
        const bool monotone = kind != PartKind::Full;
        parts.push_back(MollifiedPart{
            kind,
            RadialTable(r_min, cfg.r_max, std::move(v), std::move(dv), origin, monotone),
            tail});
    }
    if (tail_check_err > 1e-4)
        throw numerical_error("far-field form of the mollified kernel disagrees with "
                              "quadrature at the switch radius");

    auto routed_deriv = [&](double r) {
        double s = 0;
        for (const auto& p : parts)
            s += r >= tail_switch ? p.tail.deriv(r) : p.table.deriv(r);
        return s;
    };

    // semi-convexity modulus: scan min(K'', K'/r) on a log grid
    double lam = 0.0;
    const int m = 1024;
    const double s0 = std::log(r_min * 1.05), s1 = std::log(cfg.r_max * 0.99);
    for (int i = 0; i < m; ++i) {
        const double r = std::exp(s0 + (s1 - s0) * i / (m - 1));
        const double d1 = routed_deriv(r);
        const double hh = 1e-4 * r;
        const double d2 = (routed_deriv(r + hh) - routed_deriv(r - hh)) / (2 * hh);
        lam = std::min({lam, d2, d1 / r});
    }
    return MollifiedKernel(kernel, mollifier, eps, cfg, std::move(parts), tail_switch,
                           lam, tail_check_err);
}

}  // namespace blobflow
