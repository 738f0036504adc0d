#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blobflow/measures.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

struct TransportPair {
    std::size_t i, j;  // source index into mu, target index into nu
    double mass;
};

// A transport plan between two particle measures: row marginals equal the
// source weights and column marginals the target weights (within 1e-10),
// cost is sum of mass * |x_i - y_j|^2 and distance its square root. When
// several plans are optimal the choice is arbitrary; only the cost is
// contract-stable, so tests compare costs, never pair lists.
struct TransportPlan {
    std::vector<TransportPair> pairs;
    double cost = 0;
    double distance = 0;
};

namespace detail {

inline double plan_cost(const std::vector<TransportPair>& pairs, const ParticleMeasure& mu,
                        const ParticleMeasure& nu) {
    std::vector<double> term(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k)
        term[k] = pairs[k].mass * dist2(mu.point(pairs[k].i), nu.point(pairs[k].j), mu.d);
    return compensated_sum(term);
}

}  // namespace detail

// Exact 2-Wasserstein distance by successive shortest augmenting paths on
// the complete bipartite graph (a network-simplex-style exact solver, not an
// entropic approximation). Dense Dijkstra with Johnson potentials keeps every
// reduced cost nonnegative; ties pick the lowest node index, so the solve is
// deterministic. Runs single-threaded; concurrent solves on independent
// inputs are safe.
//
// The pair cap guards the O(N*M) memory and the roughly O((N+M)^3) worst-case
// work of the exact path; larger problems should use the entropic
// approximation (w2_entropic).
inline TransportPlan w2_exact(const ParticleMeasure& mu, const ParticleMeasure& nu,
                              std::size_t pair_cap = 4'000'000) {
    require(mu.d == nu.d, "transport requires measures of equal dimension");
    const std::size_t n = mu.size(), m = nu.size();
    if (n * m > pair_cap)
        throw std::invalid_argument(
            "w2_exact: " + std::to_string(n * m) + " pairs exceeds the exact-solver cap of " +
            std::to_string(pair_cap) + "; use the entropic approximation for problems this size");

    const std::size_t v_count = n + m;
    constexpr double kExhausted = 1e-13;  // below this a supply or demand is spent
    std::vector<double> supply = mu.w, demand = nu.w;
    std::vector<double> flow(n * m, 0.0);      // flow[i*m + j]
    std::vector<double> pot(v_count, 0.0);     // Johnson potentials
    std::vector<double> dist(v_count);
    std::vector<std::size_t> prev(v_count);
    std::vector<char> done(v_count);
    const double inf = std::numeric_limits<double>::infinity();

    auto edge_cost = [&](std::size_t i, std::size_t j) {
        return dist2(mu.point(i), nu.point(j), mu.d);
    };

    const std::size_t max_augment = 50 * v_count + 1000;
    std::size_t augments = 0;
    for (std::size_t s = 0; s < n; ++s) {
        while (supply[s] > kExhausted) {
            if (++augments > max_augment)
                throw numerical_error("w2_exact: augmentation limit exceeded");

            // Dijkstra from source s over the residual graph. Sources sit at
            // node i, targets at node n + j. Forward arcs i -> j always
            // exist; backward arcs j -> i exist where flow is positive.
            std::fill(dist.begin(), dist.end(), inf);
            std::fill(done.begin(), done.end(), 0);
            dist[s] = 0.0;
            std::size_t target = v_count;
            for (;;) {
                std::size_t u = v_count;
                double best = inf;
                for (std::size_t v = 0; v < v_count; ++v)
                    if (!done[v] && dist[v] < best) {
                        best = dist[v];
                        u = v;
                    }
                if (u == v_count) break;  // nothing reachable remains
                done[u] = 1;
                if (u >= n && demand[u - n] > kExhausted) {
                    target = u;
                    break;  // nearest target with spare demand
                }
                if (u < n) {
                    const std::size_t i = u;
                    for (std::size_t j = 0; j < m; ++j) {
                        const double rc =
                            std::max(0.0, edge_cost(i, j) + pot[i] - pot[n + j]);
                        if (dist[i] + rc < dist[n + j]) {
                            dist[n + j] = dist[i] + rc;
                            prev[n + j] = i;
                        }
                    }
                } else {
                    const std::size_t j = u - n;
                    for (std::size_t i = 0; i < n; ++i) {
                        if (flow[i * m + j] <= 0.0) continue;
                        const double rc =
                            std::max(0.0, pot[n + j] - pot[i] - edge_cost(i, j));
                        if (dist[n + j] + rc < dist[i]) {
                            dist[i] = dist[n + j] + rc;
                            prev[i] = n + j;
                        }
                    }
                }
            }
            if (target == v_count)
                throw numerical_error(
                    "w2_exact: no target with spare demand is reachable (unbalanced weights)");

            for (std::size_t v = 0; v < v_count; ++v)
                pot[v] += std::min(dist[v], dist[target]);

            // Bottleneck along the augmenting path, then push.
            double delta = std::min(supply[s], demand[target - n]);
            for (std::size_t v = target; v != s;) {
                const std::size_t p = prev[v];
                if (v < n) delta = std::min(delta, flow[v * m + (p - n)]);
                v = p;
            }
            for (std::size_t v = target; v != s;) {
                const std::size_t p = prev[v];
                if (v >= n)
                    flow[p * m + (v - n)] += delta;  // forward arc p -> v
                else
                    flow[v * m + (p - n)] -= delta;  // backward arc relaxes v -> p
                v = p;
            }
            supply[s] -= delta;
            demand[target - n] -= delta;
        }
    }

    TransportPlan plan;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (flow[i * m + j] > 0.0) plan.pairs.push_back({i, j, flow[i * m + j]});
    plan.cost = detail::plan_cost(plan.pairs, mu, nu);
    plan.distance = std::sqrt(std::max(0.0, plan.cost));
    return plan;
}

// Exhaustive minimum over all N! pairings: the oracle the exact solver is
// tested against. Equal counts, uniform weights, N <= 8 only.
inline TransportPlan w2_brute(const ParticleMeasure& mu, const ParticleMeasure& nu) {
    require(mu.d == nu.d, "transport requires measures of equal dimension");
    const std::size_t n = mu.size();
    require(nu.size() == n, "w2_brute requires equal particle counts");
    require(n <= 8, "w2_brute enumerates permutations and supports N <= 8 only");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::abs(mu.w[i] - mu.w[0]) <= 1e-12 && std::abs(nu.w[i] - mu.w[0]) <= 1e-12,
                "w2_brute requires uniform weights");
    }
    std::vector<std::size_t> perm(n), best(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    double best_cost = kInf;
    do {
        double c = 0;
        for (std::size_t i = 0; i < n; ++i) c += dist2(mu.point(i), nu.point(perm[i]), mu.d);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    TransportPlan plan;
    for (std::size_t i = 0; i < n; ++i) plan.pairs.push_back({i, best[i], mu.w[i]});
    plan.cost = detail::plan_cost(plan.pairs, mu, nu);
    plan.distance = std::sqrt(std::max(0.0, plan.cost));
    return plan;
}

// Point on the constant-speed geodesic through an optimal plan: each plan
// pair contributes its mass at (1-alpha) x_i + alpha y_j. Particles landing
// on exactly equal coordinates merge (exact equality only; fuzzy merging
// would change marginals).
inline ParticleMeasure displacement_interpolation(const TransportPlan& plan,
                                                  const ParticleMeasure& mu,
                                                  const ParticleMeasure& nu, double alpha) {
    require(alpha >= 0.0 && alpha <= 1.0, "interpolation parameter must lie in [0, 1]");
    require(mu.d == nu.d, "transport requires measures of equal dimension");
    std::map<std::vector<double>, double> merged;
    std::vector<double> z(mu.d);
    for (const auto& p : plan.pairs) {
        require(p.i < mu.size() && p.j < nu.size(), "plan indices out of range");
        for (int k = 0; k < mu.d; ++k)
            z[k] = (1.0 - alpha) * mu.point(p.i)[k] + alpha * nu.point(p.j)[k];
        merged[z] += p.mass;
    }
    std::vector<double> xs, ws;
    for (const auto& [pos, mass] : merged) {
        xs.insert(xs.end(), pos.begin(), pos.end());
        ws.push_back(mass);
    }
    return make_measure(mu.d, std::move(xs), std::move(ws));
}

// Entropically regularized transport cost via log-domain Sinkhorn. The
// returned plan transports mass approximately (marginal defect shrinks with
// the iteration count) and its cost lies above the exact minimum, converging
// to it as reg -> 0. This is the flagged fallback for problems past the
// exact solver's cap; it never feeds acceptance checks.
inline TransportPlan w2_entropic(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                 double reg, int max_iter = 2000, double tol = 1e-9) {
    require(mu.d == nu.d, "transport requires measures of equal dimension");
    require(reg > 0, "entropic regularization must be positive");
    require(max_iter >= 1, "iteration budget must be positive");
    const std::size_t n = mu.size(), m = nu.size();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = dist2(mu.point(i), nu.point(j), mu.d);

    // log weights; zero-weight particles are excluded from the softmin
    const double neg_inf = -kInf;
    std::vector<double> la(n), lb(m);
    for (std::size_t i = 0; i < n; ++i) la[i] = mu.w[i] > 0 ? std::log(mu.w[i]) : neg_inf;
    for (std::size_t j = 0; j < m; ++j) lb[j] = nu.w[j] > 0 ? std::log(nu.w[j]) : neg_inf;

    std::vector<double> f(n, 0.0), g(m, 0.0), row(std::max(n, m));
    auto logsumexp = [](const std::vector<double>& v, std::size_t count) {
        double peak = -kInf;
        for (std::size_t k = 0; k < count; ++k) peak = std::max(peak, v[k]);
        if (peak == -kInf) return -kInf;
        double s = 0;
        for (std::size_t k = 0; k < count; ++k) s += std::exp(v[k] - peak);
        return peak + std::log(s);
    };

    double defect = kInf;
    for (int it = 0; it < max_iter && defect > tol; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            if (la[i] == neg_inf) continue;
            for (std::size_t j = 0; j < m; ++j)
                row[j] = lb[j] + (g[j] - cost[i * m + j]) / reg;
            f[i] = -reg * logsumexp(row, m);
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (lb[j] == neg_inf) continue;
            for (std::size_t i = 0; i < n; ++i)
                row[i] = la[i] + (f[i] - cost[i * m + j]) / reg;
            g[j] = -reg * logsumexp(row, n);
        }
        // after a g-update the column marginals are exact; measure the rows
        defect = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (la[i] == neg_inf) continue;
            for (std::size_t j = 0; j < m; ++j)
                row[j] = lb[j] + (f[i] + g[j] - cost[i * m + j]) / reg;
            defect += std::abs(std::exp(logsumexp(row, m) + la[i]) - mu.w[i]);
        }
    }

    TransportPlan plan;
    for (std::size_t i = 0; i < n; ++i) {
        if (la[i] == neg_inf) continue;
        for (std::size_t j = 0; j < m; ++j) {
            if (lb[j] == neg_inf) continue;
            const double mass =
                std::exp((f[i] + g[j] - cost[i * m + j]) / reg + la[i] + lb[j]);
            if (mass > 1e-18) plan.pairs.push_back({i, j, mass});
        }
    }
    plan.cost = detail::plan_cost(plan.pairs, mu, nu);
    plan.distance = std::sqrt(std::max(0.0, plan.cost));
    return plan;
}

}  // namespace blobflow
