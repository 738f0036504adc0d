#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "blobflow/csv.hpp"
#include "blobflow/energy.hpp"
#include "blobflow/measures.hpp"
#include "blobflow/mollified_kernel.hpp"
#include "blobflow/mollifiers.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

enum class TimeScheme { RK4, Euler, AdaptiveRK };

struct FlowConfig {
    TimeScheme scheme = TimeScheme::RK4;
    double dt = 1e-3;    // fixed step, or the initial step for AdaptiveRK
    double t_end = 1.0;
    std::size_t trace_every = 10;  // accepted steps between trace rows
    bool deterministic = true;
    int threads = 1;
    // When positive, the run stops early once the metric slope stays at or
    // below this value for ten consecutive trace rows: the slope is the
    // stationarity functional, so this is the steady-state criterion.
    double steady_tol = 0.0;
};

struct TraceRow {
    double t = 0;  // time for flows, iteration index for minimization
    double energy = 0, attractive = 0, repulsive = 0;
    double slope2 = 0, kinetic = 0;
    double second_moment = 0;
    double com[3] = {0, 0, 0};
};

// Diagnostic time series of a flow or minimization. Energies include the
// diagonal term (they are energies of the mollified measure, and the
// diagonal is position-independent so it shifts every row equally).
// slope2 and kinetic coincide by the identity slope^2 = sum_i m_i |v_i|^2;
// both are recorded because they are separate columns of the trace format.
struct EnergyTrace {
    int d = 0;
    std::vector<TraceRow> rows;
};

inline void write_trace_csv(std::ostream& os, const EnergyTrace& tr) {
    os << "t,E,Ea,Er,slope2,kinetic,M2";
    for (int a = 0; a < tr.d; ++a) os << ",com_" << (a + 1);
    os << "\n";
    std::vector<double> row;
    for (const TraceRow& r : tr.rows) {
        row.assign({r.t, r.energy, r.attractive, r.repulsive, r.slope2, r.kinetic,
                    r.second_moment});
        for (int a = 0; a < tr.d; ++a) row.push_back(r.com[a]);
        csv::write_row(os, row);
    }
}

// Thrown when a position leaves the finite range mid-integration; carries
// the last finite state and the time it was reached so the caller can
// inspect or restart.
class divergence_error : public numerical_error {
  public:
    divergence_error(const std::string& msg, ParticleMeasure last_good, double t)
        : numerical_error(msg), state(std::move(last_good)), t_reached(t) {}
    ParticleMeasure state;
    double t_reached = 0;
};

struct FlowResult {
    ParticleMeasure state;
    EnergyTrace trace;
    std::size_t steps = 0;  // accepted steps
    double t_reached = 0;
    bool steady = false;  // stopped by the slope criterion rather than t_end
};

enum class StopReason { SlopeBelowTol, MaxIterations, Stagnated };

struct MinimizeResult {
    ParticleMeasure state;
    EnergyTrace trace;
    StopReason reason = StopReason::MaxIterations;
    std::size_t iterations = 0;  // accepted descent steps
    double slope = 0;            // metric slope at the returned state
};

namespace detail {

inline TraceRow trace_row_from(double t, const ParticleMeasure& mu, const EnergyBreakdown& e,
                               const std::vector<double>& v) {
    TraceRow row;
    row.t = t;
    row.energy = e.total;
    row.attractive = e.attractive;
    row.repulsive = e.repulsive;
    const double slope = metric_slope(mu, v);
    row.slope2 = slope * slope;
    row.kinetic = row.slope2;
    row.second_moment = second_moment(mu);
    const auto com = center_of_mass(mu);
    for (int a = 0; a < mu.d; ++a) row.com[a] = com[static_cast<std::size_t>(a)];
    return row;
}

inline TraceRow make_trace_row(double t, const ParticleMeasure& mu, const MollifiedKernel& mk,
                               const std::vector<double>& v, const EnergyOptions& opt) {
    return trace_row_from(t, mu, energy_particles(mu, mk, DiagonalPolicy::IncludeDiagonal, opt),
                          v);
}

// One classical RK4 step from `pos` with step h, reusing the already
// computed velocity k1 at `pos`. `scratch` supplies weights/dimension.
inline std::vector<double> rk4_step(const std::vector<double>& pos, double h,
                                    const std::vector<double>& k1, ParticleMeasure& scratch,
                                    const MollifiedKernel& mk, const EnergyOptions& opt) {
    const std::size_t n = pos.size();
    std::vector<double> stage(n), out(n);
    for (std::size_t a = 0; a < n; ++a) stage[a] = pos[a] + 0.5 * h * k1[a];
    scratch.x = stage;
    const auto k2 = velocity_field(scratch, mk, opt);
    for (std::size_t a = 0; a < n; ++a) stage[a] = pos[a] + 0.5 * h * k2[a];
    scratch.x = stage;
    const auto k3 = velocity_field(scratch, mk, opt);
    for (std::size_t a = 0; a < n; ++a) stage[a] = pos[a] + h * k3[a];
    scratch.x = stage;
    const auto k4 = velocity_field(scratch, mk, opt);
    for (std::size_t a = 0; a < n; ++a)
        out[a] = pos[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
    return out;
}

}  // namespace detail

// Integrates x_i' = v_i(x) = -2 sum_j grad K_eps(x_i - x_j) m_j from mu0.
// Weights never change. The trace records the initial state, every
// trace_every-th accepted step, and the final state.
inline FlowResult integrate_flow(const ParticleMeasure& mu0, const MollifiedKernel& mk,
                                 const FlowConfig& cfg) {
    validate_measure(mu0);
    require(mk.dim() == mu0.d, "kernel dimension must match the measure");
    require(cfg.dt > 0, "time step must be positive");
    require(cfg.t_end > 0, "final time must be positive");
    require(cfg.trace_every >= 1, "trace cadence must be at least one step");

    EnergyOptions opt;
    opt.threads = cfg.threads;
    opt.deterministic = cfg.deterministic;
    constexpr double kAdaptiveTol = 1e-8;  // step-doubling absolute tolerance

    FlowResult out;
    out.trace.d = mu0.d;
    ParticleMeasure x = mu0;
    ParticleMeasure scratch = mu0;
    double t = 0;
    double h_next = cfg.dt;
    std::size_t since_trace = 0;
    int steady_rows = 0;
    bool stop = false;

    std::vector<double> v = velocity_field(x, mk, opt);
    auto record = [&]() {
        out.trace.rows.push_back(detail::make_trace_row(t, x, mk, v, opt));
        if (cfg.steady_tol > 0 &&
            std::sqrt(out.trace.rows.back().slope2) <= cfg.steady_tol) {
            if (++steady_rows >= 10) {
                out.steady = true;
                stop = true;
            }
        } else {
            steady_rows = 0;
        }
    };
    record();

    while (!stop && t < cfg.t_end * (1.0 - 1e-15)) {
        const double h = std::min(h_next, cfg.t_end - t);
        std::vector<double> xnew;
        if (cfg.scheme == TimeScheme::Euler) {
            xnew.resize(x.x.size());
            for (std::size_t a = 0; a < xnew.size(); ++a) xnew[a] = x.x[a] + h * v[a];
        } else if (cfg.scheme == TimeScheme::RK4) {
            xnew = detail::rk4_step(x.x, h, v, scratch, mk, opt);
        } else {
            // step doubling: one full step vs two half steps, accept the
            // halves when they agree within the absolute tolerance
            const auto full = detail::rk4_step(x.x, h, v, scratch, mk, opt);
            auto half = detail::rk4_step(x.x, 0.5 * h, v, scratch, mk, opt);
            scratch.x = half;
            const auto vh = velocity_field(scratch, mk, opt);
            half = detail::rk4_step(half, 0.5 * h, vh, scratch, mk, opt);
            double err = 0;
            for (std::size_t a = 0; a < half.size(); ++a)
                err = std::max(err, std::abs(half[a] - full[a]));
            if (!(err <= kAdaptiveTol) || !all_finite(half)) {
                h_next = h * std::max(0.2, err > 0 && std::isfinite(err)
                                               ? 0.9 * std::pow(kAdaptiveTol / err, 0.2)
                                               : 0.2);
                if (h_next < 1e-14 * cfg.t_end)
                    throw numerical_error("adaptive step size collapsed below 1e-14 t_end");
                continue;  // rejected: state unchanged, retry smaller
            }
            h_next = h * std::min(2.0, err > 0 ? 0.9 * std::pow(kAdaptiveTol / err, 0.2) : 2.0);
            xnew = std::move(half);
        }
        if (!all_finite(xnew))
            throw divergence_error("integration diverged: non-finite position at t = " +
                                       std::to_string(t + h),
                                   x, t);
        x.x = std::move(xnew);
        t += h;
        ++out.steps;
        v = velocity_field(x, mk, opt);
        if (++since_trace >= cfg.trace_every) {
            record();
            since_trace = 0;
        }
    }
    if (out.trace.rows.empty() || out.trace.rows.back().t != t) record();
    out.state = std::move(x);
    out.t_reached = t;
    return out;
}

// Gradient descent on particle positions with Armijo backtracking (halving).
// The descent direction is the velocity field itself: moving along it with
// unit mass metric gives dE/d(eta) = -slope^2 at eta = 0. A step is accepted
// only on strict energy decrease satisfying the Armijo bound; when halving
// reaches machine scale without an acceptable step the search has stagnated
// and the best iterate found so far is returned.
inline MinimizeResult minimize_energy(const ParticleMeasure& mu0, const MollifiedKernel& mk,
                                      double tol, std::size_t max_iter,
                                      const EnergyOptions& opt = {}) {
    validate_measure(mu0);
    require(mk.dim() == mu0.d, "kernel dimension must match the measure");
    require(tol > 0, "gradient tolerance must be positive");

    constexpr double kArmijo = 1e-4;
    constexpr double kEtaMin = 1e-18;

    MinimizeResult out;
    out.trace.d = mu0.d;
    ParticleMeasure x = mu0;
    ParticleMeasure trial = mu0;
    EnergyBreakdown e = energy_particles(x, mk, DiagonalPolicy::IncludeDiagonal, opt);
    std::vector<double> v = velocity_field(x, mk, opt);
    out.trace.rows.push_back(detail::trace_row_from(static_cast<double>(out.iterations), x, e, v));
    double eta = 1.0;

    while (true) {
        const double slope2 = out.trace.rows.back().slope2;
        out.slope = std::sqrt(slope2);
        if (out.slope <= tol) {
            out.reason = StopReason::SlopeBelowTol;
            break;
        }
        if (out.iterations >= max_iter) {
            out.reason = StopReason::MaxIterations;
            break;
        }
        eta = std::min(eta * 2.0, 1e6);  // re-expand after previous backtracks
        bool accepted = false;
        while (eta >= kEtaMin) {
            for (std::size_t a = 0; a < x.x.size(); ++a) trial.x[a] = x.x[a] + eta * v[a];
            if (all_finite(trial.x)) {
                const EnergyBreakdown et =
                    energy_particles(trial, mk, DiagonalPolicy::IncludeDiagonal, opt);
                if (std::isfinite(et.total) && et.total < e.total &&
                    et.total <= e.total - kArmijo * eta * slope2) {
                    x.x = trial.x;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        if (!accepted) {
            out.reason = StopReason::Stagnated;
            break;
        }
        ++out.iterations;
        v = velocity_field(x, mk, opt);
        out.trace.rows.push_back(
            detail::trace_row_from(static_cast<double>(out.iterations), x, e, v));
    }
    out.state = std::move(x);
    return out;
}

struct ContinuationStep {
    double eps = 0;
    ParticleMeasure minimizer;
    double energy = 0;  // E_eps at the minimizer, diagonal included
    double slope = 0;
    std::size_t iterations = 0;
    StopReason reason = StopReason::MaxIterations;
};

struct ContinuationResult {
    std::vector<ContinuationStep> steps;
    bool truncated = false;  // a stage stagnated; later epsilons were skipped
};

// Minimizes E_eps along a strictly decreasing schedule of regularization
// scales, warm-starting each stage from the previous minimizer.
inline ContinuationResult continuation_minimize(const ParticleMeasure& mu0, const KernelSpec& k,
                                                const MollifierSpec& m,
                                                const std::vector<double>& eps_schedule,
                                                double tol, std::size_t max_iter = 20000,
                                                const MollifiedKernelConfig& cfg = {},
                                                const EnergyOptions& opt = {}) {
    require(!eps_schedule.empty(), "continuation schedule must not be empty");
    require(eps_schedule.front() > 0, "continuation scales must be positive");
    for (std::size_t i = 1; i < eps_schedule.size(); ++i)
        require(eps_schedule[i] > 0 && eps_schedule[i] < eps_schedule[i - 1],
                "continuation schedule must be strictly decreasing and positive");

    const Mollifier phi(m, k.d);
    ContinuationResult out;
    ParticleMeasure cur = mu0;
    for (double eps : eps_schedule) {
        const MollifiedKernel mk = build_mollified_kernel(k, phi, eps, cfg);
        MinimizeResult res = minimize_energy(cur, mk, tol, max_iter, opt);
        ContinuationStep step;
        step.eps = eps;
        step.energy = res.trace.rows.back().energy;
        step.slope = res.slope;
        step.iterations = res.iterations;
        step.reason = res.reason;
        step.minimizer = res.state;
        cur = res.state;
        const bool failed = res.reason == StopReason::Stagnated && step.slope > tol;
        out.steps.push_back(std::move(step));
        if (failed && eps != eps_schedule.back()) {
            out.truncated = true;
            break;
        }
    }
    return out;
}

}  // namespace blobflow
