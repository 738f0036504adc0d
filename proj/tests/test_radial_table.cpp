#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "blobflow/radial_table.hpp"

using namespace blobflow;

namespace {

RadialTable tabulate(double r_min, double r_max, int n,
                     const std::function<double(double)>& f,
                     const std::function<double(double)>& df, double origin) {
    std::vector<double> v(n), dv(n);
    const double u0 = std::log(r_min), h = (std::log(r_max) - u0) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double r = std::exp(u0 + h * i);
        v[i] = f(r);
        dv[i] = df(r);
    }
    return RadialTable(r_min, r_max, v, dv, origin);
}

}  // namespace

TEST_CASE("table reproduces node values exactly", "[radial_table]") {
    auto f = [](double r) { return 1.0 / r + r * r / 2; };
    auto df = [](double r) { return -1.0 / (r * r) + r; };
    const RadialTable t = tabulate(1e-3, 100.0, 512, f, df, 0.0);
    for (std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{300}, std::size_t{511}}) {
        const double r = t.node_radius(i);
        CHECK(t.value(r) == Catch::Approx(f(r)).epsilon(1e-13));
    }
}

TEST_CASE("interpolation error is small between nodes", "[radial_table]") {
    auto f = [](double r) { return std::exp(-r) / r; };
    auto df = [](double r) { return -std::exp(-r) * (1.0 / r + 1.0 / (r * r)); };
    const RadialTable t = tabulate(1e-3, 50.0, 2048, f, df, 0.0);
    CHECK(t.limited_nodes().empty());  // strictly decreasing data, exact slopes
    // At large radii the log grid grows coarse in absolute spacing, so an
    // exponentially decaying profile loses relative accuracy; stay where the
    // profile varies on scales the grid resolves (the far field of the
    // profiles tabulated in practice is handled by closed forms instead).
    for (double r : {2e-3, 0.013, 0.17, 1.3, 7.9}) {
        CHECK(t.value(r) == Catch::Approx(f(r)).epsilon(1e-8));
        CHECK(t.deriv(r) == Catch::Approx(df(r)).epsilon(3e-6));
    }
}

TEST_CASE("monotone data yields a monotone interpolant", "[radial_table]") {
    // crude secant slopes would overshoot; the limiter must keep this clean
    auto f = [](double r) { return 1.0 / (r * r); };
    auto df = [](double r) { return -2.0 / (r * r * r); };
    const RadialTable t = tabulate(1e-2, 10.0, 64, f, df, 0.0);
    double prev = t.value(1e-2);
    for (int i = 1; i <= 4000; ++i) {
        const double r = 1e-2 * std::pow(1000.0, i / 4000.0);
        const double v = t.value(r);
        CHECK(v <= prev * (1 + 1e-13) + 1e-13);
        prev = v;
    }
}

TEST_CASE("V-shaped data flattens the extremum node and records it", "[radial_table]") {
    // minimum at r = 1, like a mollified interaction kernel
    auto f = [](double r) { return sqr(std::log(r)); };
    auto df = [](double r) { return 2 * std::log(r) / r; };
    const RadialTable t = tabulate(0.01, 100.0, 129, f, df, f(0.01));
    REQUIRE_FALSE(t.limited_nodes().empty());
    // interpolant never dips below the true minimum of the data
    for (double r : {0.9, 0.97, 1.0, 1.03, 1.1}) CHECK(t.value(r) >= -1e-12);
    // limited nodes sit next to the minimum
    for (std::size_t i : t.limited_nodes()) {
        CHECK(std::abs(std::log(t.node_radius(i))) < 0.1);
    }
}

TEST_CASE("origin blend is continuous and differentiable at r_min", "[radial_table]") {
    auto f = [](double r) { return std::exp(-r * r); };
    auto df = [](double r) { return -2 * r * std::exp(-r * r); };
    const double r_min = 0.05;
    const RadialTable t = tabulate(r_min, 10.0, 256, f, df, 1.0);
    CHECK(t.value(0.0) == Catch::Approx(1.0));
    CHECK(t.deriv(0.0) == Catch::Approx(0.0).margin(1e-14));
    const double below = t.value(r_min * (1 - 1e-9));
    const double above = t.value(r_min * (1 + 1e-9));
    CHECK(below == Catch::Approx(above).epsilon(1e-7));
    CHECK(t.deriv(r_min * (1 - 1e-9)) == Catch::Approx(t.deriv(r_min * (1 + 1e-9))).epsilon(1e-5));
    // the blend tracks the smooth function decently on (0, r_min)
    for (double r : {0.01, 0.03, 0.045})
        CHECK(t.value(r) == Catch::Approx(f(r)).margin(2e-4));
}

TEST_CASE("deriv is the exact derivative of value", "[radial_table]") {
    // holds everywhere, including at limited nodes: both come from the same
    // cubic pieces
    auto f = [](double r) { return sqr(std::log(r)) + 0.1 * r; };
    auto df = [](double r) { return 2 * std::log(r) / r + 0.1; };
    const RadialTable t = tabulate(0.01, 100.0, 200, f, df, f(0.01));
    for (double r : {0.02, 0.5, 0.98, 1.0, 1.02, 30.0}) {
        const double h = 1e-7 * r;
        const double fd = (t.value(r + h) - t.value(r - h)) / (2 * h);
        CHECK(t.deriv(r) == Catch::Approx(fd).epsilon(1e-5).margin(1e-8));
    }
}

TEST_CASE("table rejects bad construction and bad radii", "[radial_table]") {
    std::vector<double> v = {1, 2, 3, 4}, dv = {1, 1, 1, 1};
    CHECK_THROWS_AS(RadialTable(0.0, 1.0, v, dv, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(RadialTable(1.0, 0.5, v, dv, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(RadialTable(0.1, 1.0, {1, 2, 3}, {1, 1, 1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(RadialTable(0.1, 1.0, v, {1, 1, 1}, 0.0), std::invalid_argument);
    const RadialTable t(0.1, 1.0, v, dv, 0.0);
    CHECK_THROWS_AS(t.value(1.5), std::domain_error);
    CHECK_THROWS_AS(t.value(-0.1), std::domain_error);
    CHECK_THROWS_AS(t.value(std::nan("")), std::domain_error);
}
