#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "blobflow/quadrature.hpp"

using namespace blobflow;

TEST_CASE("Gauss rule nodes are symmetric and weights sum to 2", "[quadrature]") {
    const auto& g = quad::gauss15();
    REQUIRE(g.x.size() == 15);
    double wsum = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        wsum += g.w[i];
        CHECK(g.x[i] == Catch::Approx(-g.x[g.x.size() - 1 - i]).margin(1e-15));
        CHECK(g.w[i] == Catch::Approx(g.w[g.x.size() - 1 - i]));
    }
    CHECK(wsum == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("15-point rule is exact through degree 29", "[quadrature]") {
    // Single panel, no adaptivity: integrates x^28 over [-1,1] to 2/29.
    const double got = quad::gauss_panel([](double x) { return std::pow(x, 28); }, -1, 1);
    CHECK(got == Catch::Approx(2.0 / 29.0).epsilon(1e-13));
    const double odd = quad::gauss_panel([](double x) { return std::pow(x, 29); }, -1, 1);
    CHECK(odd == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("polynomial and trig integrals", "[quadrature]") {
    CHECK(quad::integrate([](double x) { return x * x; }, 0, 1) ==
          Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(quad::integrate([](double x) { return std::sin(x); }, 0, std::numbers::pi) ==
          Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("Gaussian integral against erf", "[quadrature]") {
    const double got = quad::integrate([](double x) { return std::exp(-x * x); }, -6, 6);
    CHECK(got == Catch::Approx(std::sqrt(std::numbers::pi) * std::erf(6.0)).epsilon(1e-11));
}

TEST_CASE("integrable endpoint singularity", "[quadrature]") {
    // int_0^1 x^{-1/4} dx = 4/3; bisection has to pile panels onto x = 0.
    const double got = quad::integrate([](double x) { return std::pow(x, -0.25); }, 0, 1);
    CHECK(got == Catch::Approx(4.0 / 3.0).epsilon(1e-8));
    // Logarithmic singularity: int_0^1 log x dx = -1.
    const double lg = quad::integrate([](double x) { return std::log(x); }, 0, 1);
    CHECK(lg == Catch::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("breakpoints capture interior kinks", "[quadrature]") {
    const auto f = [](double x) { return std::abs(x - 1.0); };
    CHECK(quad::integrate(f, {0.0, 1.0, 2.0}) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rapidly varying integrand needs adaptivity", "[quadrature]") {
    // int_0^1 2000 x exp(-1000 x^2) dx = 1 - exp(-1000).
    const double got =
        quad::integrate([](double x) { return 2000.0 * x * std::exp(-1000.0 * x * x); }, 0, 1);
    CHECK(got == Catch::Approx(1.0).epsilon(1e-9));
}
