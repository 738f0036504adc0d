// Tests for particle-flow integration, energy descent, and the
// regularization-continuation driver.
//
// Expected values fall in three classes:
//   * closed forms (critical pair separation solves K_eps'(r) = 0, checked by
//     bisection on the library's own derivative),
//   * order-of-accuracy measurements frozen from dt-halving studies
//     (fourth-order stepping measured 3.971/3.967 on the reference pair with
//     8192-node tables; first-order stepping measured 0.973/0.987),
//   * structural invariants (center-of-mass conservation, dissipation
//     identity, bitwise determinism) asserted with generous margins over the
//     measured residuals (e.g. center-of-mass drift measured 1.5e-16 over
//     10^4 steps, asserted at 1e-10).

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blobflow/dynamics.hpp"
#include "blobflow/energy.hpp"
#include "blobflow/measures.hpp"
#include "blobflow/mollified_kernel.hpp"
#include "blobflow/transport.hpp"

using namespace blobflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Mollifier gaussian(int d, double sigma = 1.0) {
    return Mollifier({MollifierFamily::GaussianHeat, sigma}, d);
}

MollifiedKernelConfig fast_cfg(int n_nodes = 512) {
    MollifiedKernelConfig cfg;
    cfg.n_nodes = n_nodes;
    return cfg;
}

// Uniform cloud in [-r, r]^d with equal weights.
ParticleMeasure random_cloud(int d, std::size_t n, unsigned seed, double r = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> x(n * static_cast<std::size_t>(d));
    for (auto& v : x) v = u(gen);
    return make_measure(d, x, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ParticleMeasure pair3(double sep) {
    return make_measure(3, {0, 0, 0, sep, 0, 0}, {0.5, 0.5});
}

double pair_sep(const ParticleMeasure& mu) {
    return dist(mu.point(0), mu.point(1), mu.d);
}

// Separation at which the pair force vanishes: root of the mollified kernel's
// radial derivative, found by bisection on the library derivative itself.
double critical_separation(const MollifiedKernel& mk, double lo = 0.2, double hi = 3.0) {
    REQUIRE(mk.deriv(lo) < 0.0);
    REQUIRE(mk.deriv(hi) > 0.0);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mk.deriv(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double max_coord_diff(const ParticleMeasure& a, const ParticleMeasure& b) {
    REQUIRE(a.x.size() == b.x.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) m = std::max(m, std::abs(a.x[i] - b.x[i]));
    return m;
}

}  // namespace

TEST_CASE("flow and descent configurations are validated") {
    const auto k = power_law(3, -1.0, 2.0);
    const auto mk = build_mollified_kernel(k, gaussian(3), 0.2, fast_cfg());
    const auto mu = pair3(0.5);

    FlowConfig cfg;

    SECTION("non-positive step size is rejected") {
        cfg.dt = 0.0;
        CHECK_THROWS_AS(integrate_flow(mu, mk, cfg), std::invalid_argument);
        cfg.dt = -1e-3;
        CHECK_THROWS_AS(integrate_flow(mu, mk, cfg), std::invalid_argument);
    }
    SECTION("non-positive horizon is rejected") {
        cfg.t_end = 0.0;
        CHECK_THROWS_AS(integrate_flow(mu, mk, cfg), std::invalid_argument);
    }
    SECTION("zero trace cadence is rejected") {
        cfg.trace_every = 0;
        CHECK_THROWS_AS(integrate_flow(mu, mk, cfg), std::invalid_argument);
    }
    SECTION("dimension mismatch is rejected") {
        const auto mk2 = build_mollified_kernel(log_repulsion(2, 2.0), gaussian(2), 0.2, fast_cfg());
        CHECK_THROWS_AS(integrate_flow(mu, mk2, cfg), std::invalid_argument);
    }
    SECTION("descent requires a positive tolerance") {
        CHECK_THROWS_AS(minimize_energy(mu, mk, 0.0, 10), std::invalid_argument);
        CHECK_THROWS_AS(minimize_energy(mu, mk, -1.0, 10), std::invalid_argument);
    }
    SECTION("continuation schedules must be positive and strictly decreasing") {
        const MollifierSpec ms{MollifierFamily::GaussianHeat, 1.0};
        CHECK_THROWS_AS(continuation_minimize(mu, k, ms, {}, 1e-4), std::invalid_argument);
        CHECK_THROWS_AS(continuation_minimize(mu, k, ms, {0.2, 0.2}, 1e-4), std::invalid_argument);
        CHECK_THROWS_AS(continuation_minimize(mu, k, ms, {0.1, 0.2}, 1e-4), std::invalid_argument);
        CHECK_THROWS_AS(continuation_minimize(mu, k, ms, {0.2, -0.1}, 1e-4), std::invalid_argument);
        CHECK_THROWS_AS(continuation_minimize(mu, k, ms, {0.2, 0.1}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("a particle pair relaxes to the critical separation") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg());
    const double rstar = critical_separation(mk);

    FlowConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 50.0;
    cfg.trace_every = 100;
    const auto mu0 = pair3(0.5);
    const auto res = integrate_flow(mu0, mk, cfg);

    CHECK(res.t_reached == 50.0);
    // Measured residual force 2.0e-15 at the relaxed separation.
    CHECK(std::abs(mk.deriv(pair_sep(res.state))) <= 1e-8);
    CHECK_THAT(pair_sep(res.state), WithinAbs(rstar, 1e-8));

    // Weights ride along unchanged; the pair stays on its initial axis.
    CHECK(res.state.w == mu0.w);
    for (int c = 1; c < 3; ++c) {
        CHECK_THAT(res.state.point(0)[c], WithinAbs(0.0, 1e-12));
        CHECK_THAT(res.state.point(1)[c], WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("fourth-order stepping shows fourth-order self-convergence") {
    // High-resolution table (8192 nodes): the piecewise-cubic kernel seam
    // noise otherwise dominates the
    // O(dt^4) truncation error at these step sizes.  Measured orders
    // 3.971 / 3.967 on this configuration.
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg(8192));
    auto run = [&](double dt) {
        FlowConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 0.5;
        cfg.trace_every = 1000000;
        return integrate_flow(pair3(0.35), mk, cfg).state;
    };
    std::vector<double> errs;
    for (const double dt : {4e-3, 2e-3, 1e-3}) {
        errs.push_back(max_coord_diff(run(dt), run(dt / 2)));
    }
    CHECK(errs[0] > errs[1]);
    CHECK(errs[1] > errs[2]);
    const double order01 = std::log2(errs[0] / errs[1]);
    const double order12 = std::log2(errs[1] / errs[2]);
    CHECK_THAT(order01, WithinAbs(4.0, 0.3));
    CHECK_THAT(order12, WithinAbs(4.0, 0.3));
}

TEST_CASE("first-order stepping shows first-order self-convergence") {
    // Measured orders 0.973 / 0.987 on this configuration.
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg());
    auto run = [&](double dt) {
        FlowConfig cfg;
        cfg.scheme = TimeScheme::Euler;
        cfg.dt = dt;
        cfg.t_end = 1.0;
        cfg.trace_every = 1000000;
        return integrate_flow(pair3(0.5), mk, cfg).state;
    };
    std::vector<double> errs;
    for (const double dt : {4e-3, 2e-3, 1e-3}) {
        errs.push_back(max_coord_diff(run(dt), run(dt / 2)));
    }
    const double order01 = std::log2(errs[0] / errs[1]);
    const double order12 = std::log2(errs[1] / errs[2]);
    CHECK_THAT(order01, WithinAbs(1.0, 0.3));
    CHECK_THAT(order12, WithinAbs(1.0, 0.3));
}

TEST_CASE("the energy trace obeys the dissipation identity") {
    const auto mk =
        build_mollified_kernel(log_repulsion(2, 2.0), gaussian(2), 0.15, fast_cfg());
    const auto mu0 = random_cloud(2, 20, 2);

    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.2;
    cfg.trace_every = 1;
    const auto res = integrate_flow(mu0, mk, cfg);
    const auto& rows = res.trace.rows;
    REQUIRE(rows.size() == 201);

    // Initial row records the regularized energy of the initial state with
    // the self-interaction term included.
    const auto e0 = energy_particles(mu0, mk, DiagonalPolicy::IncludeDiagonal);
    CHECK(rows.front().t == 0.0);
    CHECK(rows.front().energy == e0.total);
    CHECK(rows.front().attractive == e0.attractive);
    CHECK(rows.front().repulsive == e0.repulsive);

    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = rows[i + 1];
        // Gradient-flow velocities dissipate energy; the trace must be
        // non-increasing along the run.
        CHECK(b.energy < a.energy);
        // dE/dt = -sum_i m_i |v_i|^2, discretized with the trapezoid rule over
        // one step.  Measured worst relative residual 2.9e-6 at this step
        // size.
        const double rate = (b.energy - a.energy) / (b.t - a.t);
        const double diss = 0.5 * (a.slope2 + b.slope2);
        worst = std::max(worst, std::abs(rate + diss) / diss);
        // The squared metric slope and the kinetic term are the same sum.
        CHECK_THAT(a.slope2, WithinRel(a.kinetic, 1e-12));
    }
    CHECK(worst <= 1e-3);

    // Pairwise forces are antisymmetric, so the weighted center of mass is a
    // conserved quantity of the flow (measured drift at roundoff).
    for (int c = 0; c < 2; ++c) {
        for (const auto& r : rows) {
            CHECK_THAT(r.com[c], WithinAbs(rows.front().com[c], 1e-12));
        }
    }
}

TEST_CASE("adaptive stepping meets the error target with few steps") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg());
    const auto mu0 = pair3(0.5);

    FlowConfig cfg;
    cfg.scheme = TimeScheme::AdaptiveRK;
    cfg.dt = 1e-3;
    cfg.t_end = 2.0;
    cfg.trace_every = 1000000;
    const auto res = integrate_flow(mu0, mk, cfg);

    FlowConfig ref_cfg;
    ref_cfg.dt = 1e-5;
    ref_cfg.t_end = 2.0;
    ref_cfg.trace_every = 1000000;
    const auto ref = integrate_flow(mu0, mk, ref_cfg);

    // Measured: 66 accepted steps, end-state error 2.9e-10 against the
    // fine-step reference.
    CHECK(res.steps <= 200);
    CHECK_THAT(res.t_reached, WithinAbs(2.0, 1e-12));
    CHECK(max_coord_diff(res.state, ref.state) <= 1e-7);
}

TEST_CASE("integration halts early once the flow is steady") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg());
    FlowConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 50.0;
    cfg.trace_every = 10;
    cfg.steady_tol = 1e-6;
    const auto res = integrate_flow(pair3(0.5), mk, cfg);

    CHECK(res.steady);
    // Measured stop at t = 3.2.
    CHECK(res.t_reached < 50.0);
    CHECK(std::sqrt(res.trace.rows.back().slope2) <= 1e-6);

    // Without the threshold the same flow runs to the horizon.
    cfg.steady_tol = 0.0;
    const auto full = integrate_flow(pair3(0.5), mk, cfg);
    CHECK_FALSE(full.steady);
    CHECK(full.t_reached == 50.0);
}

TEST_CASE("divergent trajectories raise a structured error") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.1, fast_cfg());
    FlowConfig cfg;
    cfg.scheme = TimeScheme::Euler;
    cfg.dt = 1e3;
    cfg.t_end = 1e6;
    cfg.trace_every = 1;

    bool caught = false;
    try {
        integrate_flow(pair3(0.5), mk, cfg);
    } catch (const divergence_error& e) {
        caught = true;
        CHECK(e.state.d == 3);
        CHECK(e.state.size() == 2);
        // The carried state is the last finite one.
        for (const double v : e.state.x) CHECK(std::isfinite(v));
        CHECK(e.t_reached >= 0.0);
        CHECK(e.t_reached < 1e6);
        CHECK(std::string(e.what()).find("finite") != std::string::npos);
    }
    CHECK(caught);
}

TEST_CASE("the trace serializes to a fixed column layout") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.2, fast_cfg());
    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.01;
    cfg.trace_every = 3;
    const auto res = integrate_flow(pair3(0.5), mk, cfg);

    // Rows at t = 0, every third accepted step, and the final time.
    REQUIRE(res.trace.rows.size() == 5);
    const double expect_t[] = {0.0, 3e-3, 6e-3, 9e-3, 1e-2};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK_THAT(res.trace.rows[i].t, WithinAbs(expect_t[i], 1e-12));
    }

    std::ostringstream os;
    write_trace_csv(os, res.trace);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "t,E,Ea,Er,slope2,kinetic,M2,com_1,com_2,com_3");
    std::size_t data_rows = 0;
    while (std::getline(is, line)) {
        if (!line.empty()) ++data_rows;
    }
    CHECK(data_rows == res.trace.rows.size());

    // Two-dimensional traces drop the third center-of-mass column.
    const auto mk2 = build_mollified_kernel(log_repulsion(2, 2.0), gaussian(2), 0.2, fast_cfg());
    FlowConfig cfg2;
    cfg2.dt = 1e-3;
    cfg2.t_end = 5e-3;
    cfg2.trace_every = 10;
    const auto res2 = integrate_flow(random_cloud(2, 4, 1), mk2, cfg2);
    std::ostringstream os2;
    write_trace_csv(os2, res2.trace);
    std::istringstream is2(os2.str());
    REQUIRE(std::getline(is2, line));
    CHECK(line == "t,E,Ea,Er,slope2,kinetic,M2,com_1,com_2");
}

TEST_CASE("flows are reproducible across thread counts") {
    // Large enough that the pairwise sums actually fan out across threads.
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.2, fast_cfg());
    const auto mu0 = random_cloud(3, 300, 7);

    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 5e-3;
    cfg.trace_every = 1;
    cfg.deterministic = true;
    cfg.threads = 1;
    const auto a = integrate_flow(mu0, mk, cfg);
    cfg.threads = 8;
    const auto b = integrate_flow(mu0, mk, cfg);
    const auto c = integrate_flow(mu0, mk, cfg);

    CHECK(a.state.x == b.state.x);
    CHECK(b.state.x == c.state.x);
    REQUIRE(a.trace.rows.size() == b.trace.rows.size());
    for (std::size_t i = 0; i < a.trace.rows.size(); ++i) {
        CHECK(a.trace.rows[i].energy == b.trace.rows[i].energy);
        CHECK(a.trace.rows[i].slope2 == b.trace.rows[i].slope2);
    }
}

TEST_CASE("long runs conserve the center of mass and the weights") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.2, fast_cfg());
    const auto mu0 = random_cloud(3, 30, 11);

    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 10.0;
    cfg.trace_every = 100;
    const auto res = integrate_flow(mu0, mk, cfg);

    REQUIRE(res.trace.rows.size() >= 100);
    // Measured drift 1.5e-16 over 10^4 steps.
    for (int c = 0; c < 3; ++c) {
        for (const auto& r : res.trace.rows) {
            CHECK_THAT(r.com[c], WithinAbs(res.trace.rows.front().com[c], 1e-10));
        }
    }
    CHECK(res.state.w == mu0.w);
}

TEST_CASE("descent terminates at each stopping condition") {
    const auto mk =
        build_mollified_kernel(power_law(3, -1.0, 2.0), gaussian(3), 0.05, fast_cfg());
    const double rstar = critical_separation(mk);

    SECTION("slope tolerance reached from a displaced start") {
        // Measured: 21 iterations, final slope 6.8e-7, |sep - r*| = 2.3e-7.
        const auto res = minimize_energy(pair3(0.3), mk, 1e-6, 20000);
        CHECK(res.reason == StopReason::SlopeBelowTol);
        CHECK(res.iterations <= 200);
        CHECK(res.slope <= 1e-6);
        CHECK_THAT(pair_sep(res.state), WithinAbs(rstar, 1e-5));
        CHECK(res.state.w == pair3(0.3).w);

        // One trace row per accepted iterate plus the starting point, with
        // strictly decreasing energy.
        REQUIRE(res.trace.rows.size() == res.iterations + 1);
        for (std::size_t i = 0; i + 1 < res.trace.rows.size(); ++i) {
            CHECK(res.trace.rows[i + 1].energy < res.trace.rows[i].energy);
        }
    }
    SECTION("an already-critical start takes zero iterations") {
        const auto res = minimize_energy(pair3(rstar), mk, 1e-6, 20000);
        CHECK(res.reason == StopReason::SlopeBelowTol);
        CHECK(res.iterations == 0);
        CHECK(res.trace.rows.size() == 1);
        CHECK(res.state.x == pair3(rstar).x);
    }
    SECTION("an unreachable tolerance reports stagnation with the best iterate") {
        // At the critical pair the energy cannot decrease by any step, so the
        // line search collapses instead of looping forever.
        const auto res = minimize_energy(pair3(rstar), mk, 1e-300, 20000);
        CHECK(res.reason == StopReason::Stagnated);
        CHECK(res.iterations == 0);
        CHECK(res.state.x == pair3(rstar).x);
        CHECK(res.slope > 1e-300);
    }
    SECTION("the iteration cap is honored") {
        const auto res = minimize_energy(pair3(0.5), mk, 1e-300, 3);
        CHECK(res.reason == StopReason::MaxIterations);
        CHECK(res.iterations == 3);
    }
}

TEST_CASE("a shrinking regularization schedule refines the minimizer") {
    // Uniform unit-ball samples relaxing under K(x) = -1/|x| + |x|^2: the
    // regularized minimum approaches the continuum value 1.8 (steady ball of
    // radius 1) as the regularization shrinks.  Measured gaps 0.0591 /
    // 0.0224 / 0.0090 along this schedule.
    const auto k = power_law(3, -1.0, 2.0);
    const auto mu0 = init_particles(DensitySpec::uniform_ball(3, 1.0), 80, InitMode::MonteCarlo, 5);
    const MollifierSpec ms{MollifierFamily::GaussianHeat, 1.0};

    const auto path = continuation_minimize(mu0, k, ms, {0.3, 0.2, 0.15}, 3e-5, 4000, fast_cfg());

    REQUIRE(path.steps.size() == 3);
    CHECK_FALSE(path.truncated);
    const double eps_expect[] = {0.3, 0.2, 0.15};
    std::vector<double> gaps;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& s = path.steps[i];
        CHECK(s.eps == eps_expect[i]);
        CHECK(s.reason == StopReason::SlopeBelowTol);
        CHECK(s.iterations < 4000);
        CHECK(s.slope <= 3e-5);
        gaps.push_back(std::abs(s.energy - 1.8));
    }
    CHECK(gaps[0] > gaps[1]);
    CHECK(gaps[1] > gaps[2]);
    CHECK(gaps[2] <= 0.015);

    // Successive minimizers get closer in transport distance as the schedule
    // refines (measured 0.323 then 0.084).
    const double w01 = w2_exact(path.steps[0].minimizer, path.steps[1].minimizer).distance;
    const double w12 = w2_exact(path.steps[1].minimizer, path.steps[2].minimizer).distance;
    CHECK(w01 > 0.0);
    CHECK(w12 > 0.0);
    CHECK(w12 < w01);
}

TEST_CASE("warm starts reuse the previous stage faithfully") {
    const auto k = power_law(3, -1.0, 2.0);
    const auto mu0 = random_cloud(3, 48, 13, 0.1);
    const MollifierSpec ms{MollifierFamily::GaussianHeat, 1.0};

    const auto path = continuation_minimize(mu0, k, ms, {0.2, 0.1}, 1e-4, 20000, fast_cfg());
    REQUIRE(path.steps.size() == 2);
    CHECK(path.steps[0].reason == StopReason::SlopeBelowTol);
    CHECK(path.steps[1].reason == StopReason::SlopeBelowTol);

    // The second stage is a plain descent started from the first-stage
    // minimizer: rerunning it standalone reproduces the path stage bitwise.
    const auto mk2 = build_mollified_kernel(k, gaussian(3), 0.1, fast_cfg());
    const auto redo = minimize_energy(path.steps[0].minimizer, mk2, 1e-4, 20000);
    CHECK(redo.state.x == path.steps[1].minimizer.x);
    CHECK(redo.iterations == path.steps[1].iterations);

    // Starting the tight stage from the relaxed stage saves iterations over a
    // cold start (measured 647 vs 918).
    const auto cold = minimize_energy(mu0, mk2, 1e-4, 20000);
    CHECK(cold.reason == StopReason::SlopeBelowTol);
    CHECK(path.steps[1].iterations < cold.iterations);
}

TEST_CASE("a truncated schedule reports the stall") {
    const auto k = power_law(3, -1.0, 2.0);
    const MollifierSpec ms{MollifierFamily::GaussianHeat, 1.0};
    const auto mk = build_mollified_kernel(k, gaussian(3), 0.3, fast_cfg());
    const auto start = pair3(critical_separation(mk));

    // An impossible tolerance stalls the first stage, so the later stage is
    // never attempted and the result says so.
    const auto path = continuation_minimize(start, k, ms, {0.3, 0.2}, 1e-300, 50, fast_cfg());
    CHECK(path.truncated);
    REQUIRE(path.steps.size() == 1);
    CHECK(path.steps[0].reason == StopReason::Stagnated);
    CHECK(path.steps[0].slope > 1e-300);
}
