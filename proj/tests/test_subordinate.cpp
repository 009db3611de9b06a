#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "subgeo/subordinate.hpp"

using namespace subgeo;

namespace {

SubordinatedRate gamma_exp_rate(double lambda, double p, int n = 100000) {
    SubordinatedRate sr;
    sr.base_rate = [lambda](double t) { return std::exp(-lambda * t); };
    sr.spec.family = SubordinatorSpec::Family::gamma;
    sr.spec.a = 1.0;
    sr.spec.b = 1.0;
    sr.p = p;
    sr.mc_n = n;
    sr.mc_seed = 404;
    return sr;
}

}  // namespace

TEST_CASE("time-changed exponential rate matches the Laplace-transform value") {
    // gamma(1,1) subordinator: E[e^{-S_t}] = e^{-t phi(1)} with phi(1) = ln 2
    auto sr = gamma_exp_rate(1.0, 1.0);
    for (double t : {0.5, 1.0, 2.0}) {
        const auto rv = subordinate_rate(sr, t);
        const double expect = std::exp(-t * std::log(2.0));
        INFO("t = " << t << " value " << rv.value << " expect " << expect);
        CHECK(std::abs(rv.value - expect) <= 3.0 * rv.std_error);
    }
}

TEST_CASE("deterministic time change evaluates the rate at the drifted clock") {
    SubordinatedRate sr;
    sr.base_rate = [](double t) { return std::exp(-t); };
    sr.spec.family = SubordinatorSpec::Family::drift_only;
    sr.spec.drift = 0.7;
    sr.p = 1.0;
    sr.mc_n = 64;
    for (double t : {0.0, 1.0, 3.5}) {
        const auto rv = subordinate_rate(sr, t);
        // every sample is exactly 0.7 t; only the batch averaging can move
        // the mean by an ulp
        CHECK(rv.value == Catch::Approx(sr.base_rate(0.7 * t)).epsilon(1e-15));
        CHECK(rv.std_error <= 1e-15);
    }
    // compound poisson with zero jump rate plus drift reduces bitwise
    SubordinatedRate cp = sr;
    cp.spec.family = SubordinatorSpec::Family::compound_poisson;
    cp.spec.cp_rate = 0.0;
    cp.spec.drift = 0.7;
    for (double t : {0.5, 2.0}) {
        CHECK(subordinate_rate(cp, t).value == subordinate_rate(sr, t).value);
    }
}

TEST_CASE("Monte Carlo and density quadrature agree within combined errors") {
    for (double p : {1.0, 2.0}) {
        auto mc = gamma_exp_rate(0.6, p);
        auto quad = mc;
        quad.method = SubordinatedRate::Method::density_quadrature;
        for (double t : {0.5, 2.0}) {
            const auto a = subordinate_rate(mc, t);
            const auto b = subordinate_rate(quad, t);
            INFO("p = " << p << " t = " << t);
            CHECK(std::abs(a.value - b.value) <= 3.0 * (a.std_error + 1e-9));
        }
    }
    // the power-decay rate from the cross-validation pair
    SubordinatedRate sr;
    sr.base_rate = [](double t) { return std::pow(1.0 + t, -1.0); };
    sr.spec.family = SubordinatorSpec::Family::gamma;
    sr.spec.a = 1.0;
    sr.spec.b = 1.0;
    sr.p = 2.0;
    sr.mc_n = 100000;
    sr.mc_seed = 11;
    auto qr = sr;
    qr.method = SubordinatedRate::Method::density_quadrature;
    const auto a = subordinate_rate(sr, 2.0);
    const auto b = subordinate_rate(qr, 2.0);
    CHECK(std::abs(a.value - b.value) <= 3.0 * (a.std_error + 1e-9));
}

TEST_CASE("quadrature handles the singular small-shape density") {
    // shape a t < 1 exercises the endpoint substitution
    SubordinatedRate sr;
    sr.base_rate = [](double t) { return std::exp(-t); };
    sr.spec.family = SubordinatorSpec::Family::gamma;
    sr.spec.a = 1.0;
    sr.spec.b = 1.0;
    sr.p = 1.0;
    sr.method = SubordinatedRate::Method::density_quadrature;
    const double t = 0.3;  // shape 0.3
    const auto rv = subordinate_rate(sr, t);
    CHECK(rv.value == Catch::Approx(std::exp(-t * std::log(2.0))).margin(1e-7));
}

TEST_CASE("higher moment order weakens the rate (Jensen)") {
    auto p1 = gamma_exp_rate(1.0, 1.0, 20000);
    auto p2 = gamma_exp_rate(1.0, 2.0, 20000);
    for (double t : linspace(0.25, 4.0, 8)) {
        // identical samples underneath, so the comparison is deterministic
        CHECK(subordinate_rate(p2, t).value >= subordinate_rate(p1, t).value - 1e-12);
    }
}

TEST_CASE("heavy-tail warning heuristic") {
    // a rate that explodes on the subordinator's tail concentrates the mass
    SubordinatedRate sr;
    sr.base_rate = [](double t) { return std::exp(t); };  // increasing
    sr.spec.family = SubordinatorSpec::Family::gamma;
    sr.spec.a = 1.0;
    sr.spec.b = 0.25;  // long tail
    sr.p = 2.0;
    sr.mc_n = 20000;
    const auto rv = subordinate_rate(sr, 3.0);
    CHECK(rv.variance_warning);
}

TEST_CASE("argument validation and method gating") {
    auto sr = gamma_exp_rate(1.0, 1.0, 1000);
    CHECK_THROWS_AS(subordinate_rate(sr, -1.0), std::invalid_argument);
    sr.p = 0.5;
    CHECK_THROWS_AS(subordinate_rate(sr, 1.0), std::invalid_argument);
    SubordinatedRate cp;
    cp.base_rate = [](double t) { return std::exp(-t); };
    cp.spec.family = SubordinatorSpec::Family::compound_poisson;
    cp.spec.cp_rate = 1.0;
    cp.method = SubordinatedRate::Method::density_quadrature;
    CHECK_THROWS_AS(subordinate_rate(cp, 1.0), std::invalid_argument);
}
