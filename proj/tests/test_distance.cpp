#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "subgeo/distance.hpp"

using namespace subgeo;

namespace {

Vec v1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

EmpiricalMeasure random_cloud(std::mt19937_64& rng, int n, int d, double shift = 0.0) {
    std::normal_distribution<double> g;
    Mat s(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = g(rng) + shift;
    return EmpiricalMeasure::from_samples(std::move(s));
}

}  // namespace

TEST_CASE("1-d transport distance: identity, translation, quantile interpolation") {
    std::vector<double> zeros(32, 0.0), ones(32, 1.0);
    const auto mu = EmpiricalMeasure::from_vector(zeros);
    const auto nu = EmpiricalMeasure::from_vector(ones);
    CHECK(wasserstein_1d(mu, mu, 2.0) == 0.0);
    CHECK(wasserstein_1d(mu, nu, 2.0) == Catch::Approx(1.0).margin(1e-15));

    // unequal sizes go through the merged-quantile path
    const auto small = EmpiricalMeasure::from_vector({0.0});
    CHECK(wasserstein_1d(small, nu, 2.0) == Catch::Approx(1.0).margin(1e-15));

    // weighted vs replicated samples agree
    EmpiricalMeasure weighted;
    weighted.samples = Mat(2, 1);
    weighted.samples << 0.0, 1.0;
    weighted.weights = Vec(2);
    weighted.weights << 0.25, 0.75;
    const auto replicated = EmpiricalMeasure::from_vector({0.0, 1.0, 1.0, 1.0});
    const auto probe = EmpiricalMeasure::from_vector({-1.0, 0.5, 2.0, 3.0});
    CHECK(wasserstein_1d(weighted, probe, 1.0) ==
          Catch::Approx(wasserstein_1d(replicated, probe, 1.0)).margin(1e-12));
}

TEST_CASE("assignment solver: single pair, rigid translation, size cap") {
    const auto mu = EmpiricalMeasure::from_vector({0.3});
    const auto nu = EmpiricalMeasure::from_vector({-1.1});
    CHECK(wasserstein_assignment(mu, nu, 1.0) == Catch::Approx(1.4).margin(1e-15));

    std::mt19937_64 rng = oracle::test_rng(7);
    const auto cloud = random_cloud(rng, 48, 2);
    Mat shifted = cloud.samples;
    for (int i = 0; i < shifted.rows(); ++i) {
        shifted(i, 0) += 2.0;
        shifted(i, 1) -= 1.0;
    }
    const auto nu2 = EmpiricalMeasure::from_samples(shifted);
    CHECK(wasserstein_assignment(cloud, nu2, 2.0) ==
          Catch::Approx(std::sqrt(5.0)).margin(1e-12));

    Mat big = Mat::Zero(1025, 1);
    CHECK_THROWS_AS(wasserstein_assignment(EmpiricalMeasure::from_samples(big),
                                           EmpiricalMeasure::from_samples(big), 1.0),
                    std::invalid_argument);
}

TEST_CASE("the sorted and assignment routes agree on random 1-d pairs") {
    std::mt19937_64 rng = oracle::test_rng(11);
    for (int rep = 0; rep < 256; ++rep) {
        const auto mu = random_cloud(rng, 64, 1);
        const auto nu = random_cloud(rng, 64, 1, 0.5);
        const double p = rep % 2 == 0 ? 1.0 : 2.0;
        const double a = wasserstein_1d(mu, nu, p);
        const double b = wasserstein_assignment(mu, nu, p);
        REQUIRE(std::abs(a - b) <= 1e-12);
    }
}

TEST_CASE("transport distance properties: triangle inequality and p-monotonicity") {
    std::mt19937_64 rng = oracle::test_rng(13);
    for (int rep = 0; rep < 24; ++rep) {
        const int d = rep % 2 == 0 ? 1 : 2;
        const auto a = random_cloud(rng, 32, d);
        const auto b = random_cloud(rng, 32, d, 0.7);
        const auto c = random_cloud(rng, 32, d, -0.4);
        const double p = 2.0;
        const double ab = wasserstein_assignment(a, b, p);
        const double bc = wasserstein_assignment(b, c, p);
        const double ac = wasserstein_assignment(a, c, p);
        CHECK(ac <= ab + bc + 1e-10);
        // p-monotonicity on the same clouds
        CHECK(wasserstein_assignment(a, b, 1.0) <= ab + 1e-10);
    }
}

TEST_CASE("coupling cost: glued pairs, contraction curve, indicator reduction") {
    const auto ou = make_ou_model(1);
    const double dt = 1e-3;
    SimOptions opt;
    opt.record_stride = 100;
    const auto ens = synchronous_pair(ou, v1(1.0), v1(-1.0), 2.0, dt, 200, 19, -1, opt);
    const auto lin = make_modulus("identity", "identity", 4.0, 1.0);

    // linear drift: distance is deterministic, the cost matches it exactly
    for (int ti = 0; ti < ens.n_times; ++ti) {
        const int k = ti * opt.record_stride;
        const double expect = 2.0 * std::pow(1.0 - dt, k);
        CHECK(coupling_cost(ens, lin, 2.0, ti) == Catch::Approx(expect).margin(1e-9));
    }

    // indicator metric: fraction of uncoupled paths (here, all or none)
    const auto ind = make_modulus("indicator", "power(2)", 1.0, 1.0);
    CHECK(coupling_cost(ens, ind, 1.0, 0) == 1.0);

    // a fully glued ensemble has zero cost and zero uncoupled fraction
    const auto glued = synchronous_pair(ou, v1(0.5), v1(0.5), 1.0, 0.01, 16, 3);
    CHECK(coupling_cost(glued, lin, 2.0, glued.n_times - 1) == 0.0);
    CHECK(coupling_cost(glued, ind, 1.0, glued.n_times - 1) == 0.0);

    const auto plain = euler_maruyama(ou, {v1(0.0)}, 1.0, 0.01, 8, 3);
    CHECK_THROWS_AS(coupling_cost(plain, lin, 2.0, 0), std::invalid_argument);
}

TEST_CASE("coupling cost dominates the exact transport distance between marginals") {
    const auto model = make_power_drift_model(1, 2.0);
    const auto ens = synchronous_pair(model, v1(1.0), v1(-1.0), 1.0, 1e-2, 64, 29);
    const auto lin = make_modulus("identity", "identity", 4.0, 1.0);
    for (int ti : {0, ens.n_times / 4, ens.n_times / 2, ens.n_times - 1}) {
        const auto mu = ensemble_marginal(ens, ti, false);
        const auto nu = ensemble_marginal(ens, ti, true);
        const double upper = coupling_cost(ens, lin, 2.0, ti);
        const double exact = wasserstein_assignment(mu, nu, 2.0);
        CHECK(upper >= exact - 1e-10);
    }
}

TEST_CASE("histogram total variation: identity, disjoint supports, range") {
    std::mt19937_64 rng = oracle::test_rng(17);
    const auto mu = random_cloud(rng, 4000, 1);
    CHECK(tv_histogram(mu, mu) == 0.0);
    const auto nu = random_cloud(rng, 4000, 1, 50.0);
    CHECK(tv_histogram(mu, nu) == Catch::Approx(1.0).margin(1e-12));
    const auto shifted = random_cloud(rng, 4000, 1, 0.5);
    const double tv = tv_histogram(mu, shifted);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    // d = 2 path with fixed bins
    const auto mu2 = random_cloud(rng, 2000, 2);
    const auto nu2 = random_cloud(rng, 2000, 2, 0.3);
    BinRule fixed;
    fixed.kind = BinRule::Kind::fixed;
    fixed.nx = fixed.ny = 24;
    const double tv2 = tv_histogram(mu2, nu2, fixed);
    CHECK(tv2 > 0.0);
    CHECK(tv2 <= 1.0);
}

TEST_CASE("histogram total variation against exact Gaussian quantile samples") {
    // the t = 5 marginal of the unit mean-reverting model is close to its
    // invariant law N(0, 1/2); compare with exact-quantile samples
    const auto ou = make_ou_model(1);
    const int n = 20000;
    SimOptions opt;
    opt.record_stride = 500;
    opt.n_threads = 2;
    const auto ens = euler_maruyama(ou, {v1(0.0)}, 5.0, 1e-2, n, 37, opt);
    const auto mu = ensemble_marginal(ens, ens.n_times - 1);
    const double var5 = (1.0 - std::exp(-10.0)) / 2.0;
    const auto nu = EmpiricalMeasure::from_vector(
        oracle::gaussian_quantile_samples(n, 0.0, var5));
    CHECK(tv_histogram(mu, nu) <= 0.05);
}

TEST_CASE("decay fits recover noiseless parameters") {
    const auto times = linspace(0.0, 5.0, 26);
    std::vector<double> exp_series(times.size()), pow_series(times.size());
    for (size_t i = 0; i < times.size(); ++i) {
        exp_series[i] = 3.0 * std::exp(-2.0 * times[i]);
        pow_series[i] = 1.0 / (1.0 + times[i]);
    }
    const auto ef = decay_fit(times, exp_series, DecayModel::exponential);
    CHECK(ef.params.at("Gamma") == Catch::Approx(2.0).margin(1e-6));
    CHECK(ef.params.at("kappa") == Catch::Approx(3.0).margin(1e-6));
    CHECK(ef.residual <= 1e-10);

    // inverse-decay family with quadratic psi and kappa = 1: the curve
    // 1/(1 + Gamma t) is exactly representable, Gamma = 1
    PsiInverseSpec spec{make_modulus("identity", "power(2)", 1.0, 1.0), 1.0};
    const auto pf = decay_fit(times, pow_series, DecayModel::psi_inverse, &spec);
    CHECK(pf.params.at("Gamma") == Catch::Approx(1.0).margin(1e-6));
    CHECK(pf.residual <= 1e-6);

    // power-law fit on t >= 1 data
    std::vector<double> t2, d2;
    for (double t : linspace(1.0, 40.0, 20)) {
        t2.push_back(t);
        d2.push_back(2.0 * std::pow(t, -1.5));
    }
    const auto pw = decay_fit(t2, d2, DecayModel::power);
    CHECK(pw.params.at("exponent") == Catch::Approx(-1.5).margin(1e-9));

    CHECK_THROWS_AS(decay_fit({0.0, 1.0}, {1.0, 0.5}, DecayModel::exponential),
                    std::invalid_argument);
    // non-positive distances are dropped with a warning
    std::vector<double> with_zero = exp_series;
    with_zero[3] = 0.0;
    const auto dropped = decay_fit(times, with_zero, DecayModel::exponential);
    CHECK(dropped.dropped_points == 1);
    CHECK_FALSE(dropped.warnings.empty());
}

TEST_CASE("measure validation") {
    Mat s(2, 1);
    s << 0.0, 1.0;
    EmpiricalMeasure m;
    m.samples = s;
    m.weights = Vec(2);
    m.weights << 0.6, 0.6;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m.weights << 0.5, 0.5;
    m.samples(0, 0) = std::nan("");
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
