#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "blobflow/kernels.hpp"
#include "blobflow/measures.hpp"
#include "blobflow/mollified_kernel.hpp"
#include "blobflow/parallel.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

// The particle interaction energy sums K over ordered pairs, so the i = j
// term is K(0) times the squared mass: finite for a mollified kernel, +inf
// for a singular one. The policy is explicit at every call because silently
// dropping the diagonal would corrupt identities that need it.
enum class DiagonalPolicy { ExcludeDiagonal, IncludeDiagonal };

struct EnergyBreakdown {
    double total = 0;
    double attractive = 0;
    double repulsive = 0;
    DiagonalPolicy policy = DiagonalPolicy::ExcludeDiagonal;
    // True when the kernel has a canonical attractive/repulsive split. When
    // false the whole energy is reported under `attractive` so that
    // total = attractive + repulsive still holds.
    bool split_defined = true;
    // Set when ExcludeDiagonal meets a single particle: there are no pair
    // terms, and the energy of a point mass under a singular kernel is not
    // defined, so the returned zero must not be read as an energy value.
    bool dirac_degenerate = false;
};

struct EnergyOptions {
    int threads = 1;
    // Deterministic mode fills one term per outer index in parallel and
    // reduces in index order: bit-identical for any thread count. The fast
    // path combines per-thread partials in thread order instead, so its
    // roundoff varies with the thread count.
    bool deterministic = true;
};

namespace detail {

// Spawning threads costs tens of microseconds each; a pairwise sweep over
// fewer than ~256 particles finishes faster than the spawn itself, so small
// problems always run serially. Deterministic-mode results are identical
// either way.
inline int clamp_threads(int threads, std::size_t n) {
    return n >= 256 ? threads : 1;
}

// Sum of f(i) and g(i) over i in [0, n) under the summation contract above.
inline std::pair<double, double> ordered_pair_sums(std::size_t n, const EnergyOptions& opt,
                                                   const std::function<double(std::size_t)>& f,
                                                   const std::function<double(std::size_t)>& g) {
    const int threads = clamp_threads(opt.threads, n);
    if (opt.deterministic) {
        std::vector<double> fa(n), fb(n);
        parallel_for(n, threads, [&](std::size_t i) {
            fa[i] = f(i);
            fb[i] = g(i);
        });
        double a = 0, b = 0;
        for (std::size_t i = 0; i < n; ++i) a += fa[i];
        for (std::size_t i = 0; i < n; ++i) b += fb[i];
        return {a, b};
    }
    return {fast_sum(n, threads, f), fast_sum(n, threads, g)};
}

// Generic pairwise energy: av/rv evaluate the attractive and repulsive
// values at a pair separation; each unordered pair is computed once and
// doubled. The diagonal hook supplies K^a(0), K^r(0) when included.
template <class AV, class RV>
EnergyBreakdown pair_energy(const ParticleMeasure& mu, AV&& av, RV&& rv, bool split_defined,
                            DiagonalPolicy policy, const EnergyOptions& opt, double a0, double r0) {
    EnergyBreakdown out;
    out.policy = policy;
    out.split_defined = split_defined;
    const std::size_t n = mu.size();
    if (policy == DiagonalPolicy::ExcludeDiagonal && n == 1) {
        out.dirac_degenerate = true;
        return out;
    }
    auto row_a = [&](std::size_t i) {
        double s = 0;
        for (std::size_t j = i + 1; j < n; ++j)
            s += av(dist(mu.point(i), mu.point(j), mu.d)) * mu.w[i] * mu.w[j];
        return s;
    };
    auto row_r = [&](std::size_t i) {
        double s = 0;
        for (std::size_t j = i + 1; j < n; ++j)
            s += rv(dist(mu.point(i), mu.point(j), mu.d)) * mu.w[i] * mu.w[j];
        return s;
    };
    auto [a, r] = detail::ordered_pair_sums(n, opt, row_a, row_r);
    a *= 2.0;
    r *= 2.0;
    if (policy == DiagonalPolicy::IncludeDiagonal) {
        double m2 = 0;
        for (std::size_t i = 0; i < n; ++i) m2 += mu.w[i] * mu.w[i];
        a += m2 * a0;
        r += m2 * r0;
    }
    out.attractive = a;
    out.repulsive = r;
    out.total = a + r;
    return out;
}

}  // namespace detail

// Interaction energy of a particle measure under the raw kernel. The i = j
// term is excluded by necessity (it is infinite for singular kernels), so
// IncludeDiagonal is rejected here.
inline EnergyBreakdown energy_particles(const ParticleMeasure& mu, const KernelSpec& k,
                                        DiagonalPolicy policy, const EnergyOptions& opt = {}) {
    require(k.d == mu.d, "kernel dimension must match the measure");
    require(policy == DiagonalPolicy::ExcludeDiagonal,
            "IncludeDiagonal requires a mollified kernel: the raw i = j term is infinite");
    const SplitKernel split = split_kernel(k);
    if (split.canonical) {
        return detail::pair_energy(
            mu, [&](double r) { return split.attractive.value(r); },
            [&](double r) { return split.repulsive.value(r); }, true, policy, opt, 0.0, 0.0);
    }
    return detail::pair_energy(
        mu, [&](double r) { return split.unsplit.value(r); }, [](double) { return 0.0; }, false,
        policy, opt, 0.0, 0.0);
}

// Interaction energy under a mollified kernel; IncludeDiagonal adds
// sum_i m_i^2 K_eps(0).
inline EnergyBreakdown energy_particles(const ParticleMeasure& mu, const MollifiedKernel& mk,
                                        DiagonalPolicy policy, const EnergyOptions& opt = {}) {
    require(mk.dim() == mu.d, "kernel dimension must match the measure");
    if (mk.split_valid()) {
        return detail::pair_energy(
            mu, [&](double r) { return mk.attractive_value(r); },
            [&](double r) { return mk.repulsive_value(r); }, true, policy, opt,
            mk.attractive_value(0.0), mk.repulsive_value(0.0));
    }
    return detail::pair_energy(
        mu, [&](double r) { return mk.value(r); }, [](double) { return 0.0; }, false, policy, opt,
        mk.value(0.0), 0.0);
}

// Particle velocities of the regularized gradient flow,
// v_i = -2 sum_j grad K_eps(x_i - x_j) m_j, returned packed like positions.
// The j = i term contributes nothing (the mollified kernel has zero gradient
// at the origin). Each v_i is an index-ordered inner sum, so the result is
// bit-identical for any thread count.
inline std::vector<double> velocity_field(const ParticleMeasure& mu, const MollifiedKernel& mk,
                                          const EnergyOptions& opt = {}) {
    require(mk.dim() == mu.d, "kernel dimension must match the measure");
    const std::size_t n = mu.size();
    const int d = mu.d;
    std::vector<double> v(n * static_cast<std::size_t>(d), 0.0);
    parallel_for(n, detail::clamp_threads(opt.threads, n), [&](std::size_t i) {
        double* vi = v.data() + i * static_cast<std::size_t>(d);
        const double* xi = mu.point(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* xj = mu.point(j);
            const double r = dist(xi, xj, d);
            if (r == 0.0) continue;  // coincident particles: grad K_eps(0) = 0
            const double f = -2.0 * mk.deriv(r) / r * mu.w[j];
            for (int k = 0; k < d; ++k) vi[k] += f * (xi[k] - xj[k]);
        }
    });
    return v;
}

// Metric local slope of the regularized energy at a particle measure:
// 2 || grad K_eps * mu ||_{L^2(mu)}, which equals sqrt(sum_i m_i |v_i|^2)
// for the velocities above. The slope for the unmollified kernel is not
// computed: it is ill-defined at coincident particles.
inline double metric_slope(const ParticleMeasure& mu, const std::vector<double>& velocities) {
    require(velocities.size() == mu.x.size(), "velocity count must match the measure");
    std::vector<double> term(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        term[i] = mu.w[i] * sqr(norm(velocities.data() + i * static_cast<std::size_t>(mu.d), mu.d));
    return std::sqrt(compensated_sum(term));
}

inline double metric_slope(const ParticleMeasure& mu, const MollifiedKernel& mk,
                           const EnergyOptions& opt = {}) {
    return metric_slope(mu, velocity_field(mu, mk, opt));
}

// Ground-truth double integral E(rho) = int int K(x-y) rho(x) rho(y) dx dy
// for an analytic density and a power-law kernel, by midpoint quadrature on
// an n-per-axis grid. The cell containing x = y (where r^p is singular) is
// handled in closed form: K is averaged over the ball whose volume matches
// the cell, which restores second-order convergence. The breakdown's total
// is the estimate; attractive/repulsive expose the split for diagnostics.
inline EnergyBreakdown energy_density_reference(const DensitySpec& rho, const KernelSpec& k,
                                                std::size_t n_per_axis,
                                                const EnergyOptions& opt = {}) {
    require(k.family == KernelFamily::PowerLaw,
            "the density energy reference supports power-law kernels only");
    require(k.d == rho.dim(), "kernel dimension must match the density");
    require(n_per_axis >= 2, "resolution must be at least 2 cells per axis");
    const int d = k.d;
    require(k.is_log() || k.p > -static_cast<double>(d),
            "repulsion r^p with p <= -d is not integrable: no reference energy exists");

    const auto mu = init_particles(rho, detail::ipow(n_per_axis, d), InitMode::GridWeighted);
    const SplitKernel split = split_kernel(k);

    double cell_vol = 1.0;
    for (int a = 0; a < d; ++a)
        cell_vol *= (rho.upper()[a] - rho.lower()[a]) / static_cast<double>(n_per_axis);
    // radius of the ball with the cell's volume
    const double r_b = std::pow(cell_vol * d / sphere_area(d), 1.0 / d);
    // volume averages of r^q / q and the repulsion over that ball
    const double diag_a = d * std::pow(r_b, k.q) / (k.q * (k.q + d));
    const double diag_r = k.is_log() ? -std::log(r_b) + 1.0 / d
                                     : -d * std::pow(r_b, k.p) / (k.p * (k.p + d));

    EnergyBreakdown out = detail::pair_energy(
        mu, [&](double r) { return split.attractive.value(r); },
        [&](double r) { return split.repulsive.value(r); }, true,
        DiagonalPolicy::ExcludeDiagonal, opt, 0.0, 0.0);
    double m2 = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) m2 += mu.w[i] * mu.w[i];
    out.attractive += m2 * diag_a;
    out.repulsive += m2 * diag_r;
    out.total = out.attractive + out.repulsive;
    out.policy = DiagonalPolicy::IncludeDiagonal;
    return out;
}

// Modulus of convexity used by the flow-convergence estimates: x |log x|
// below the break x0 = exp(-1 - sqrt 2), continued above by
// sqrt(x^2 + 2 (1 + sqrt 2) x0 x); the two branches agree at x0.
inline double omega(double x) {
    require(x >= 0.0, "the modulus omega is defined for nonnegative arguments");
    const double x0 = std::exp(-1.0 - std::numbers::sqrt2);
    if (x <= x0) return x == 0.0 ? 0.0 : x * std::abs(std::log(x));
    return std::sqrt(x * x + 2.0 * (1.0 + std::numbers::sqrt2) * x0 * x);
}

}  // namespace blobflow
