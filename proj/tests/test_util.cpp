#include <catch2/catch_amalgamated.hpp>

#include "blobflow/util.hpp"

using namespace blobflow;

TEST_CASE("sphere_area matches closed forms", "[util]") {
    CHECK(sphere_area(1) == Catch::Approx(2.0));
    CHECK(sphere_area(2) == Catch::Approx(2 * std::numbers::pi));
    CHECK(sphere_area(3) == Catch::Approx(4 * std::numbers::pi));
}

TEST_CASE("ball_volume matches closed forms", "[util]") {
    CHECK(ball_volume(1, 1.0) == Catch::Approx(2.0));
    CHECK(ball_volume(2, 1.0) == Catch::Approx(std::numbers::pi));
    CHECK(ball_volume(3, 1.0) == Catch::Approx(4.0 / 3.0 * std::numbers::pi));
    CHECK(ball_volume(3, 2.0) == Catch::Approx(8.0 * 4.0 / 3.0 * std::numbers::pi));
    // d-dimensional consistency: vol(B_r) = area(S^{d-1}) r^d / d.
    for (int d = 1; d <= 3; ++d)
        CHECK(ball_volume(d, 1.5) ==
              Catch::Approx(sphere_area(d) * std::pow(1.5, d) / d));
}

TEST_CASE("require throws on violated precondition", "[util]") {
    CHECK_THROWS_AS(require(false, "boom"), std::invalid_argument);
    CHECK_NOTHROW(require(true, "fine"));
}

TEST_CASE("flat-array norms", "[util]") {
    const double a[3] = {3, 0, 4};
    const double b[3] = {0, 0, 0};
    CHECK(norm(a, 3) == Catch::Approx(5.0));
    CHECK(dist(a, b, 3) == Catch::Approx(5.0));
    CHECK(dist2(a, b, 3) == Catch::Approx(25.0));
    CHECK(norm(a, 2) == Catch::Approx(3.0));
}

TEST_CASE("all_finite flags NaN and infinity", "[util]") {
    CHECK(all_finite({0.0, -1.5, 1e300}));
    CHECK_FALSE(all_finite({0.0, kInf}));
    CHECK_FALSE(all_finite({std::nan("")}));
}
