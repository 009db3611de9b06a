#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "subgeo/quadrature.hpp"

using namespace subgeo;

TEST_CASE("adaptive integration matches closed forms") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0) == Catch::Approx(9.0).epsilon(1e-12));
    CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI) ==
          Catch::Approx(2.0).epsilon(1e-12));
    // oscillatory integrand over a long range
    const double v = integrate([](double x) { return std::exp(-x) * std::cos(10.0 * x); },
                               0.0, 30.0);
    CHECK(v == Catch::Approx(1.0 / 101.0).margin(1e-12));
}

TEST_CASE("adaptive integration agrees with the half-step Simpson oracle") {
    auto f = [](double x) { return std::exp(-0.5 * x * x) * (1.0 + std::sin(3.0 * x)); };
    const double mine = integrate(f, -4.0, 7.0);
    const double ref = oracle::simpson_refined(f, -4.0, 7.0, 1e-13);
    CHECK(std::abs(mine - ref) <= 1e-10);
}

TEST_CASE("non-finite integrand samples are reported with the abscissa") {
    auto f = [](double x) { return x < 2.0 ? 1.0 : std::nan(""); };
    try {
        integrate(f, 0.0, 10.0);
        FAIL("expected QuadratureError");
    } catch (const QuadratureError& e) {
        CHECK(e.abscissa() >= 2.0);
        CHECK(e.abscissa() <= 10.0);
    }
}

TEST_CASE("endpoint singularities integrate (open rule)") {
    // int_0^1 1/sqrt(x) dx = 2, singular at the left endpoint
    const double v = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
    CHECK(v == Catch::Approx(2.0).margin(1e-7));
}

TEST_CASE("tail analysis declares convergent and divergent integrals") {
    const auto conv = integrate_to_infinity([](double u) { return std::exp(-u); }, 0.0, 30.0);
    CHECK(conv.finite);
    CHECK(conv.value + conv.tail_bound == Catch::Approx(1.0).margin(1e-8));
    // a shallow probe point leaves the doubling increments visible: the
    // fixed-count criterion then refuses, by design
    const auto shallow =
        integrate_to_infinity([](double u) { return std::exp(-u); }, 0.0, 10.0);
    CHECK_FALSE(shallow.finite);

    TailOptions topt;
    topt.tail_tol = kInf;
    const auto div = integrate_to_infinity([](double u) { return 1.0 / u; }, 1.0, 10.0,
                                           QuadOptions{}, topt);
    CHECK_FALSE(div.finite);
    CHECK(div.decay_exponent == Catch::Approx(-1.0).margin(0.05));
}

TEST_CASE("monotone inversion hits the bisection/Newton tolerance") {
    auto g = [](double x) { return x * x * x + x; };
    auto dg = [](double x) { return 3.0 * x * x + 1.0; };
    const double root = invert_monotone(g, 10.0, 0.0, 10.0, dg);
    CHECK(g(root) == Catch::Approx(10.0).margin(1e-10));
    // decreasing function
    auto h = [](double x) { return 1.0 / (1.0 + x); };
    const double r2 = invert_monotone(h, 0.25, 0.0, 100.0);
    CHECK(r2 == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("cumulative tables evaluate between and beyond nodes") {
    auto density = [](double s) { return 2.0 * s; };
    const auto cum = detail::Cumulative::build(density, linspace(1.0, 5.0, 9));
    CHECK(cum.at(1.0) == 0.0);
    CHECK(cum.at(3.0) == Catch::Approx(8.0).margin(1e-10));   // 3^2 - 1
    CHECK(cum.at(2.5) == Catch::Approx(5.25).margin(1e-10));  // between nodes
    CHECK(cum.at(7.0) == Catch::Approx(48.0).margin(1e-9));   // beyond the grid
}
