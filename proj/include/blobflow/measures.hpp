#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "blobflow/csv.hpp"
#include "blobflow/mollifiers.hpp"
#include "blobflow/rng.hpp"
#include "blobflow/util.hpp"

namespace blobflow {

// A weighted particle cloud representing a probability measure: N points in
// R^d with nonnegative masses summing to one. Immutable by convention after
// construction; every operation below is read-only and thread-safe.
struct ParticleMeasure {
    int d = 1;
    std::vector<double> x;  // packed coordinates, point i at x[i*d .. i*d+d)
    std::vector<double> w;  // masses, one per point

    std::size_t size() const { return w.size(); }
    const double* point(std::size_t i) const { return x.data() + i * static_cast<std::size_t>(d); }
    double* point(std::size_t i) { return x.data() + i * static_cast<std::size_t>(d); }
};

inline void validate_measure(const ParticleMeasure& mu) {
    require(mu.d >= 1 && mu.d <= 3, "particle measure dimension must be 1, 2, or 3");
    require(!mu.w.empty(), "particle measure must contain at least one point");
    require(mu.x.size() == mu.w.size() * static_cast<std::size_t>(mu.d),
            "particle coordinate and weight counts disagree");
    require(all_finite(mu.x), "particle positions must be finite");
    for (double m : mu.w) require(m >= 0.0, "particle weights must be nonnegative");
    const double total = compensated_sum(mu.w);
    require(std::abs(total - 1.0) <= 1e-12, "particle weights must sum to 1 within 1e-12");
}

inline ParticleMeasure make_measure(int d, std::vector<double> x, std::vector<double> w) {
    ParticleMeasure mu{d, std::move(x), std::move(w)};
    validate_measure(mu);
    return mu;
}

inline std::vector<double> center_of_mass(const ParticleMeasure& mu) {
    std::vector<double> com(mu.d, 0.0);
    std::vector<double> term(mu.size());
    for (int k = 0; k < mu.d; ++k) {
        for (std::size_t i = 0; i < mu.size(); ++i) term[i] = mu.w[i] * mu.point(i)[k];
        com[k] = compensated_sum(term);
    }
    return com;
}

// Second moment about the origin, sum of m_i |x_i|^2.
inline double second_moment(const ParticleMeasure& mu) {
    std::vector<double> term(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) term[i] = mu.w[i] * sqr(norm(mu.point(i), mu.d));
    return compensated_sum(term);
}

enum class DensityKind { UniformBall, Figure1Polynomial, UniformBox, Custom };

// An analytic probability density on R^d with box-bounded support, used to
// seed particle clouds. The normalization constant is fixed at construction
// so density() always integrates to one: exactly for the named kinds, by
// midpoint quadrature over the bounding box for Custom profiles.
class DensitySpec {
  public:
    static DensitySpec uniform_ball(int d, double radius) {
        require(d >= 1 && d <= 3, "density dimension must be 1, 2, or 3");
        require(radius > 0, "ball radius must be positive");
        DensitySpec rho;
        rho.d_ = d;
        rho.kind_ = DensityKind::UniformBall;
        rho.radius_ = radius;
        rho.lo_.assign(d, -radius);
        rho.hi_.assign(d, radius);
        rho.norm_ = 1.0 / ball_volume(d, radius);
        rho.sup_ = rho.norm_;
        return rho;
    }

    // The planar profile C (1 - |x|^2)_+^2 with C = 3/pi, so the mass is one.
    static DensitySpec figure1_polynomial() {
        DensitySpec rho;
        rho.d_ = 2;
        rho.kind_ = DensityKind::Figure1Polynomial;
        rho.lo_.assign(2, -1.0);
        rho.hi_.assign(2, 1.0);
        rho.norm_ = 3.0 / std::numbers::pi;
        rho.sup_ = rho.norm_;
        return rho;
    }

    static DensitySpec uniform_box(std::vector<double> lo, std::vector<double> hi) {
        const int d = static_cast<int>(lo.size());
        require(d >= 1 && d <= 3, "density dimension must be 1, 2, or 3");
        require(hi.size() == lo.size(), "box bounds must have matching dimensions");
        double vol = 1.0;
        for (int k = 0; k < d; ++k) {
            require(hi[k] > lo[k], "box bounds must satisfy lo < hi on every axis");
            vol *= hi[k] - lo[k];
        }
        DensitySpec rho;
        rho.d_ = d;
        rho.kind_ = DensityKind::UniformBox;
        rho.lo_ = std::move(lo);
        rho.hi_ = std::move(hi);
        rho.norm_ = 1.0 / vol;
        rho.sup_ = rho.norm_;
        return rho;
    }

    // Arbitrary nonnegative profile supported inside [lo, hi]. The mass and
    // the bound used by rejection sampling are estimated on a midpoint grid;
    // the sampler re-checks the bound at every proposal and fails loudly
    // rather than sample from a silently truncated density.
    static DensitySpec custom(int d, std::vector<double> lo, std::vector<double> hi,
                              std::function<double(const double*)> profile) {
        require(d >= 1 && d <= 3, "density dimension must be 1, 2, or 3");
        require(static_cast<int>(lo.size()) == d && static_cast<int>(hi.size()) == d,
                "box bounds must match the density dimension");
        require(static_cast<bool>(profile), "custom density requires a profile function");
        for (int k = 0; k < d; ++k)
            require(hi[k] > lo[k], "box bounds must satisfy lo < hi on every axis");
        DensitySpec rho;
        rho.d_ = d;
        rho.kind_ = DensityKind::Custom;
        rho.lo_ = std::move(lo);
        rho.hi_ = std::move(hi);
        rho.profile_ = std::move(profile);

        const int n = d == 1 ? 4096 : (d == 2 ? 512 : 96);
        double cell = 1.0;
        for (int k = 0; k < d; ++k) cell *= (rho.hi_[k] - rho.lo_[k]) / n;
        std::size_t cells = 1;
        for (int k = 0; k < d; ++k) cells *= static_cast<std::size_t>(n);
        double mass = 0, peak = 0;
        std::vector<double> pt(d);
        for (std::size_t c = 0; c < cells; ++c) {
            std::size_t rem = c;
            for (int k = 0; k < d; ++k) {
                const auto i = rem % static_cast<std::size_t>(n);
                rem /= static_cast<std::size_t>(n);
                pt[k] = rho.lo_[k] + (static_cast<double>(i) + 0.5) * (rho.hi_[k] - rho.lo_[k]) / n;
            }
            const double p = rho.profile_(pt.data());
            require(p >= 0.0, "density evaluates negative");
            mass += p;
            peak = std::max(peak, p);
        }
        mass *= cell;
        require(mass > 0.0 && std::isfinite(mass), "custom density must have positive finite mass");
        rho.norm_ = 1.0 / mass;
        // Headroom over the sampled peak; proposals that beat it anyway
        // indicate a spike the grid missed, and sampling aborts.
        rho.sup_ = 1.25 * peak * rho.norm_;
        return rho;
    }

    int dim() const { return d_; }
    DensityKind kind() const { return kind_; }
    double radius() const { return radius_; }
    const std::vector<double>& lower() const { return lo_; }
    const std::vector<double>& upper() const { return hi_; }

    // Least upper bound of the normalized density used for rejection
    // sampling (exact for the named kinds, estimated for Custom).
    double sup_density() const { return sup_; }

    // Normalized density at x (a d-vector).
    double density(const double* x) const {
        switch (kind_) {
            case DensityKind::UniformBall:
                return norm(x, d_) <= radius_ ? norm_ : 0.0;
            case DensityKind::Figure1Polynomial: {
                const double s = 1.0 - (x[0] * x[0] + x[1] * x[1]);
                return s > 0 ? norm_ * s * s : 0.0;
            }
            case DensityKind::UniformBox: {
                for (int k = 0; k < d_; ++k)
                    if (x[k] < lo_[k] || x[k] > hi_[k]) return 0.0;
                return norm_;
            }
            case DensityKind::Custom: {
                for (int k = 0; k < d_; ++k)
                    if (x[k] < lo_[k] || x[k] > hi_[k]) return 0.0;
                const double p = profile_(x);
                require(p >= 0.0, "density evaluates negative");
                return norm_ * p;
            }
        }
        return 0.0;
    }

  private:
    int d_ = 1;
    DensityKind kind_ = DensityKind::UniformBall;
    double radius_ = 1.0;
    std::vector<double> lo_, hi_;
    std::function<double(const double*)> profile_;
    double norm_ = 1.0;
    double sup_ = 1.0;
};

enum class InitMode { GridWeighted, MonteCarlo };

namespace detail {

inline std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    for (int k = 0; k < e; ++k) r *= b;
    return r;
}

// Smallest m with m^d >= n, the per-axis node count of a grid of about n cells.
inline std::size_t grid_side(std::size_t n, int d) {
    auto m = static_cast<std::size_t>(
        std::floor(std::pow(static_cast<double>(n), 1.0 / d)));
    if (m < 1) m = 1;
    while (ipow(m, d) < n) ++m;
    while (m > 1 && ipow(m - 1, d) >= n) --m;
    return m;
}

}  // namespace detail

// Discretize a density into a particle measure.
//
// GridWeighted covers the support's bounding box with a uniform lattice of
// ceil(N^(1/d)) cells per axis; each node sits at a cell center and carries
// the cell-averaged density (midpoint subgrid, four points per axis) times
// the cell volume. Raw weights below 1e-16 are dropped, the rest are
// renormalized, so the returned count can differ from N where the box
// overhangs the support. Deterministic; the seed is ignored.
//
// MonteCarlo draws exactly N i.i.d. samples with equal weights 1/N by
// rejection from the bounding box, consuming the seeded generator in sample
// order, so results are bit-reproducible given (seed, N, spec).
inline ParticleMeasure init_particles(const DensitySpec& rho, std::size_t n, InitMode mode,
                                      std::uint64_t seed = 0) {
    require(n >= 1, "particle count must be at least 1");
    const int d = rho.dim();

    if (mode == InitMode::GridWeighted) {
        const std::size_t m = detail::grid_side(n, d);
        const std::size_t cells = detail::ipow(m, d);
        std::vector<double> h(d);
        double cell_vol = 1.0;
        for (int k = 0; k < d; ++k) {
            h[k] = (rho.upper()[k] - rho.lower()[k]) / static_cast<double>(m);
            cell_vol *= h[k];
        }
        constexpr int kSub = 4;  // midpoint subgrid per axis for the cell average
        const std::size_t subcells = detail::ipow(kSub, d);
        std::vector<double> xs, ws;
        std::vector<double> c(d), pt(d);
        for (std::size_t idx = 0; idx < cells; ++idx) {
            std::size_t rem = idx;
            for (int k = 0; k < d; ++k) {
                const auto i = rem % m;
                rem /= m;
                c[k] = rho.lower()[k] + (static_cast<double>(i) + 0.5) * h[k];
            }
            double avg = 0;
            for (std::size_t s = 0; s < subcells; ++s) {
                std::size_t srem = s;
                for (int k = 0; k < d; ++k) {
                    const auto j = srem % static_cast<std::size_t>(kSub);
                    srem /= static_cast<std::size_t>(kSub);
                    pt[k] = c[k] + ((static_cast<double>(j) + 0.5) / kSub - 0.5) * h[k];
                }
                avg += rho.density(pt.data());
            }
            const double weight = avg / static_cast<double>(subcells) * cell_vol;
            if (weight < 1e-16) continue;  // empty cell, drop before renormalizing
            for (int k = 0; k < d; ++k) xs.push_back(c[k]);
            ws.push_back(weight);
        }
        require(!ws.empty(), "density support does not meet the discretization grid");
        const double total = compensated_sum(ws);
        for (double& wv : ws) wv /= total;
        return make_measure(d, std::move(xs), std::move(ws));
    }

    Rng rng(seed);
    const double sup = rho.sup_density();
    std::vector<double> xs;
    xs.reserve(n * static_cast<std::size_t>(d));
    std::vector<double> pt(d);
    const std::size_t max_attempts = std::max<std::size_t>(10'000'000, 1000 * n);
    std::size_t attempts = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (;;) {
            if (++attempts > max_attempts)
                throw numerical_error(
                    "rejection sampling stalled: density too concentrated for its bounding box");
            for (int k = 0; k < d; ++k) pt[k] = rng.uniform(rho.lower()[k], rho.upper()[k]);
            const double p = rho.density(pt.data());
            const double u = rng.uniform();
            if (p > sup)
                throw numerical_error("density exceeds its rejection bound; sampling would be biased");
            if (u * sup < p) break;
        }
        for (int k = 0; k < d; ++k) xs.push_back(pt[k]);
    }
    std::vector<double> ws(n, 1.0 / static_cast<double>(n));
    return make_measure(d, std::move(xs), std::move(ws));
}

namespace detail {

// One draw from the scaled mollifier phi_eps, added onto out.
inline void add_mollifier_noise(const Mollifier& phi, double eps, Rng& rng, double* out) {
    const int d = phi.dim();
    if (!phi.compact()) {
        // Heat-kernel profile at time sigma^2: per-axis standard deviation
        // sigma * sqrt(2), scaled by eps.
        const double s = eps * phi.sigma() * std::numbers::sqrt2;
        for (int k = 0; k < d; ++k) out[k] += s * rng.normal();
        return;
    }
    // Bump supported on |y| <= eps * sigma: rejection in the unit ball
    // against the radial shape, then scale.
    const double s = eps * phi.sigma();
    const double peak = detail::bump_shape(0.0);
    std::vector<double> v(d);
    for (int tries = 0; tries < 100000; ++tries) {
        double r2 = 0;
        for (int k = 0; k < d; ++k) {
            v[k] = rng.uniform(-1.0, 1.0);
            r2 += v[k] * v[k];
        }
        const double u = rng.uniform();
        if (r2 >= 1.0) continue;
        if (u * peak <= detail::bump_shape(std::sqrt(r2))) {
            for (int k = 0; k < d; ++k) out[k] += s * v[k];
            return;
        }
    }
    throw numerical_error("mollifier noise rejection sampling stalled");
}

}  // namespace detail

// Draw M samples from mu * phi_eps: pick a particle proportionally to its
// weight (inverse CDF, lowest admissible index), then add mollifier noise.
// Equal weights 1/M. One generator stream consumed in sample order, so the
// result is bit-reproducible given (seed, M); concurrent callers need
// independent seeds.
inline ParticleMeasure mollify_sampled(const ParticleMeasure& mu, const Mollifier& phi,
                                       double eps, std::size_t m, std::uint64_t seed) {
    require(phi.dim() == mu.d, "mollifier dimension must match the measure");
    require(eps > 0, "mollification scale eps must be positive");
    require(m >= 1, "sample count must be at least 1");
    std::vector<double> cdf(mu.size());
    double acc = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        acc += mu.w[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;  // guard against rounding in the running sum

    Rng rng(seed);
    std::vector<double> xs(m * static_cast<std::size_t>(mu.d));
    for (std::size_t j = 0; j < m; ++j) {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t i = std::min<std::size_t>(it - cdf.begin(), mu.size() - 1);
        double* y = xs.data() + j * static_cast<std::size_t>(mu.d);
        for (int k = 0; k < mu.d; ++k) y[k] = mu.point(i)[k];
        detail::add_mollifier_noise(phi, eps, rng, y);
    }
    std::vector<double> ws(m, 1.0 / static_cast<double>(m));
    return make_measure(mu.d, std::move(xs), std::move(ws));
}

// The density of mu * phi_eps as a lazily evaluated function
// x -> sum_i m_i phi_eps(x - x_i). No grid is materialized; each call costs
// one pass over the particles.
inline std::function<double(const double*)> mollify_density(const ParticleMeasure& mu,
                                                            const Mollifier& phi, double eps) {
    require(phi.dim() == mu.d, "mollifier dimension must match the measure");
    require(eps > 0, "mollification scale eps must be positive");
    auto held = std::make_shared<const ParticleMeasure>(mu);
    auto held_phi = std::make_shared<const Mollifier>(phi);
    return [held, held_phi, eps](const double* x) {
        double s = 0;
        for (std::size_t i = 0; i < held->size(); ++i)
            s += held->w[i] * held_phi->value_scaled(dist(x, held->point(i), held->d), eps);
        return s;
    };
}

// Particle CSV: header x1[,x2[,x3]],w then one row per particle, every value
// in shortest round-trip decimal so read(write(mu)) is bit-identical.
inline void write_particles_csv(std::ostream& os, const ParticleMeasure& mu) {
    for (int k = 0; k < mu.d; ++k) os << 'x' << (k + 1) << ',';
    os << "w\n";
    std::vector<double> row(mu.d + 1);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (int k = 0; k < mu.d; ++k) row[k] = mu.point(i)[k];
        row[mu.d] = mu.w[i];
        csv::write_row(os, row);
    }
}

inline ParticleMeasure read_particles_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "particle csv is empty");
    const auto header = csv::split_fields(line);
    const int d = static_cast<int>(header.size()) - 1;
    require(d >= 1 && d <= 3, "particle csv header must be x1[,x2[,x3]],w");
    for (int k = 0; k < d; ++k)
        require(header[k] == "x" + std::to_string(k + 1),
                "particle csv header must be x1[,x2[,x3]],w");
    require(header[d] == "w", "particle csv header must be x1[,x2[,x3]],w");

    std::vector<double> xs, ws;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_fields(line);
        require(fields.size() == static_cast<std::size_t>(d) + 1,
                "particle csv row has the wrong number of fields");
        for (int k = 0; k < d; ++k) xs.push_back(csv::parse_double(fields[k]));
        ws.push_back(csv::parse_double(fields[d]));
    }
    return make_measure(d, std::move(xs), std::move(ws));
}

}  // namespace blobflow
