#include <catch2/catch_amalgamated.hpp>

#include <cstdint>

#include "blobflow/rng.hpp"

using namespace blobflow;

namespace {

// Reference recurrence, written out separately from the class under test.
std::uint64_t ref_splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

TEST_CASE("generator reproduces the documented recurrence", "[rng]") {
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
        Rng rng(seed);
        std::uint64_t state = seed;
        for (int i = 0; i < 64; ++i)
            REQUIRE(rng.next_u64() == ref_splitmix64(state));
    }
}

TEST_CASE("same seed gives identical streams", "[rng]") {
    Rng a(123), b(123);
    for (int i = 0; i < 256; ++i) REQUIRE(a.uniform() == b.uniform());
    Rng c(123), d(124);
    int diff = 0;
    for (int i = 0; i < 256; ++i) diff += (c.uniform() != d.uniform());
    CHECK(diff > 250);
}

TEST_CASE("uniform() stays in [0,1) with sane moments", "[rng]") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == Catch::Approx(0.5).margin(0.005));
    CHECK(var == Catch::Approx(1.0 / 12.0).margin(0.002));
}

TEST_CASE("uniform(a,b) maps into the requested interval", "[rng]") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        REQUIRE(u >= -2.0);
        REQUIRE(u < 3.0);
    }
}

TEST_CASE("normal() has sane moments and finite tails", "[rng]") {
    Rng rng(2024);
    const int n = 200000;
    double sum = 0, sum2 = 0, sum4 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        REQUIRE(std::isfinite(x));
        sum += x;
        sum2 += x * x;
        sum4 += x * x * x * x;
    }
    CHECK(sum / n == Catch::Approx(0.0).margin(0.01));
    CHECK(sum2 / n == Catch::Approx(1.0).margin(0.02));
    // Kurtosis of a standard normal is 3.
    CHECK(sum4 / n == Catch::Approx(3.0).margin(0.15));
}
