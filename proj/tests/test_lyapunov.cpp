#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "subgeo/lyapunov.hpp"

using namespace subgeo;

namespace {

Vec v1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

struct Pipeline {
    RadialProfile profile;
    LambdaVerdict verdict;
    LyapunovTable table;
};

Pipeline build_pipeline(const CoefficientModel& model, const RateFunction& rate,
                        double r0, double r_max, int grid_n, double r1) {
    Pipeline p;
    p.profile = radial_profile(model, Vec(Vec::Zero(model.dim)), r0,
                               linspace(r0, r_max, grid_n), 2);
    p.verdict = lambda_constant(p.profile, rate, r_max);
    p.table = rate.label == "identity"
                  ? build_geometric(p.profile, p.verdict, r1)
                  : build_subgeometric(p.profile, p.verdict, rate, r1);
    return p;
}

std::vector<Vec> radial_points(double lo, double hi, int n) {
    std::vector<Vec> pts;
    const auto radii = linspace(lo, hi, n);
    for (size_t i = 0; i < radii.size(); ++i)
        pts.push_back(v1(i % 2 == 0 ? radii[i] : -radii[i]));
    return pts;
}

}  // namespace

TEST_CASE("energy table: base value, signs, and joint continuity") {
    const auto ou = make_ou_model(1);
    const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 12.0, 67, 1.5);

    CHECK(p.table.vbar.front() == 0.0);  // vbar(r0) = 0 by construction
    for (size_t i = 0; i < p.table.grid.size(); ++i) {
        CHECK(p.table.vbar_d1[i] > 0.0);
        if (i > 0) CHECK(p.table.vbar[i] >= p.table.vbar[i - 1]);
    }
    // the closed curvature formula equals the derivative of the slope table
    // (central difference oracle); far out the table inherits the convex
    // growth of the cumulative e^{-I} envelope
    for (double r : {2.0, 3.5, 5.0}) {
        const double h = 1e-4;
        const double fd = (p.table.d1_at(r + h) - p.table.d1_at(r - h)) / (2.0 * h);
        CHECK(p.table.d2_at(r) == Catch::Approx(fd).epsilon(1e-6));
    }
    CHECK(p.table.vbar_d2.back() > 0.0);

    // continuity of the derivative across grid joints
    for (size_t i = 1; i + 1 < p.table.grid.size(); i += 7) {
        const double r = p.table.grid[i];
        const double eps = 1e-12 * std::max(1.0, r);
        const double left = p.table.d1_at(r - eps);
        const double right = p.table.d1_at(r + eps);
        CHECK(std::abs(left - right) <= 1e-8 * std::max(1.0, std::abs(right)));
    }
}

TEST_CASE("energy table: the comparison bound vbar <= cumulative e^{-I} holds") {
    const auto cosine = make_cosine_drift_model(1.0);
    const auto p = build_pipeline(cosine, rate_power(0.5), 1.0, 40.0, 157, 1.5);
    for (size_t i = 0; i < p.table.grid.size(); ++i) {
        const double r = p.table.grid[i];
        const double envelope = p.verdict.E.at(r);  // int_{r0}^r e^{-I}
        CHECK(p.table.vbar[i] <= envelope + 1e-9 * std::max(1.0, envelope));
    }
}

TEST_CASE("drift inequality: mean-reverting and oscillating models pass at 1e-6") {
    const auto ou = make_ou_model(1);
    const auto p1 = build_pipeline(ou, rate_power(0.5), 1.0, 32.0, 127, 1.5);
    const auto pts = radial_points(1.5, 15.0, 200);
    const auto c1 = verify_drift_inequality(p1.table, ou, pts, 1e-6);
    CHECK(c1.passed);
    CHECK(c1.max_violation <= 1e-6 + c1.remainder_budget);

    const auto cosine = make_cosine_drift_model(1.0);
    const auto p2 = build_pipeline(cosine, rate_power(0.5), 1.0, 40.0, 157, 1.5);
    const auto c2 = verify_drift_inequality(p2.table, cosine, pts, 1e-6);
    CHECK(c2.passed);
    CHECK(c2.max_violation <= 1e-6 + c2.remainder_budget);
}

TEST_CASE("drift inequality: corrupted table is caught") {
    const auto ou = make_ou_model(1);
    const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 12.0, 67, 1.5);
    auto corrupted = p.table;
    // break the decay bookkeeping: the asserted decay is 100x the one the
    // table was built for, so the inequality must surface a violation
    auto orig_ev = p.table.rate.eval;
    corrupted.rate.eval = [orig_ev](double t) { return 100.0 * orig_ev(t); };
    const auto check = verify_drift_inequality(corrupted, ou, radial_points(1.5, 6.0, 40),
                                               1e-6);
    CHECK_FALSE(check.passed);
    CHECK(check.max_violation > 1.0);

    // a table whose evaluation turns non-finite can never pass
    auto poisoned = p.table;
    poisoned.profile.gamma_of = [](double) { return -1.0; };
    const auto bad = verify_drift_inequality(poisoned, ou, radial_points(1.5, 6.0, 10),
                                             1e-6);
    CHECK_FALSE(bad.passed);
}

TEST_CASE("drift inequality rejects points inside the matching radius") {
    const auto ou = make_ou_model(1);
    const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 12.0, 67, 1.5);
    CHECK_THROWS_AS(verify_drift_inequality(p.table, ou, {v1(1.2)}, 1e-6),
                    std::invalid_argument);
}

// Cubic-confined drift with an exactly inverse-square linear-rate integrand:
// b(x) = -sgn(x)(1.5 x^2 + 1/|x|) gives iota(r) = -(3r^3 + 2), so the
// cumulative e^{-I} telescopes and (E+1)e^{I} = (1 + 2e^{-(r^3-1)})/(3r^2).
// Strong enough confinement for the linear-rate integral test to certify.
static CoefficientModel cubic_confined_model() {
    CoefficientModel m;
    m.dim = 1;
    m.drift = [](const Vec& x) {
        Vec b(1);
        const double r = std::abs(x[0]);
        b[0] = -sgn(x[0]) * (1.5 * r * r + 1.0 / std::max(r, 1e-12));
        return b;
    };
    m.diffusion = [](const Vec&) { return Mat(Mat::Identity(1, 1)); };
    m.sigma_constant = true;
    m.family = "cubic_confined";
    return m;
}

TEST_CASE("geometric branch: builds on the linear-rate verdict and passes") {
    const auto model = cubic_confined_model();
    // r_max past the near-base transient so the trailing-decade slope fits
    // see the clean power law
    Pipeline p;
    p.profile = radial_profile(model, Vec(Vec::Zero(1)), 1.0, linspace(1.0, 12.0, 67), 2);
    p.verdict = lambda_constant(p.profile, rate_identity(), 30.0);
    p.table = build_geometric(p.profile, p.verdict, 1.5);
    CHECK(p.verdict.finite);
    // analytic total: int_1^inf (1 + 2 e^{-(u^3-1)}) / (3u^2) du
    const double expect =
        1.0 / 3.0 + oracle::simpson_refined(
                        [](double u) {
                            return 2.0 * std::exp(-(u * u * u - 1.0)) / (3.0 * u * u);
                        },
                        1.0, 12.0, 1e-13);
    CHECK(p.verdict.value == Catch::Approx(expect).margin(1e-6));
    CHECK(p.table.kind == LyapunovKind::geometric);
    CHECK(p.table.lambda_used == p.verdict.value);  // bitwise bookkeeping
    const auto check =
        verify_drift_inequality(p.table, model, radial_points(1.5, 8.0, 200), 1e-6);
    CHECK(check.passed);

    // the linear-rate verdict gate
    const auto ou = make_ou_model(1);
    const auto prof = radial_profile(ou, v1(0.0), 1.0, linspace(1.0, 12.0, 67), 2);
    const auto half = lambda_constant(prof, rate_power(0.5), 12.0);
    CHECK_THROWS_AS(build_geometric(prof, half, 1.5), std::invalid_argument);
}

TEST_CASE("geometric branch: the linear-rate integrand of a linear drift is not summable") {
    // (E+1)e^{I} behaves like 1/(2u) for the mean-reverting linear model, so
    // the linear-rate integral test genuinely diverges; the verdict says so
    const auto ou = make_ou_model(1);
    const auto prof = radial_profile(ou, v1(0.0), 1.0, linspace(1.0, 12.0, 67), 2);
    const auto verdict = lambda_constant(prof, rate_identity(), 12.0);
    CHECK_FALSE(verdict.finite);
    CHECK(verdict.decay_exponent == Catch::Approx(-1.0).margin(0.1));
    CHECK_THROWS_AS(build_geometric(prof, verdict, 1.5), std::domain_error);
}

TEST_CASE("geometric branch: free motion has no energy function") {
    const auto bm = make_brownian_model(1);
    const auto prof = radial_profile(bm, v1(0.0), 1.0, linspace(1.0, 40.0, 99), 2);
    const auto verdict = lambda_constant(prof, rate_identity(), 40.0);
    CHECK_FALSE(verdict.finite);
    CHECK_THROWS_AS(build_geometric(prof, verdict, 1.5), std::domain_error);
}

TEST_CASE("doubling the normalization keeps the inequality satisfied") {
    const auto ou = make_ou_model(1);
    const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 12.0, 67, 1.5);
    auto scaled = p.verdict;
    scaled.value *= 2.0;
    const auto table2 = build_subgeometric(p.profile, scaled, rate_power(0.5), 1.5);
    const auto pts = radial_points(1.5, 10.0, 120);
    CHECK(verify_drift_inequality(p.table, ou, pts, 1e-6).passed);
    CHECK(verify_drift_inequality(table2, ou, pts, 1e-6).passed);
}

TEST_CASE("tabulated derivatives converge to finite differences at second order") {
    const auto ou = make_ou_model(1);
    // compare at radii shared by both grids so the local third derivative is
    // the same and the error ratio isolates the step size
    const std::vector<double> probes = {2.25, 3.5, 4.75};
    auto fd_error = [&](int grid_n) {
        const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 6.0, grid_n, 1.5);
        const double h = p.table.grid[1] - p.table.grid[0];
        double worst = 0.0;
        for (double r : probes) {
            const size_t i = size_t(std::lround((r - 1.0) / h));
            REQUIRE(std::abs(p.table.grid[i] - r) < 1e-12);
            const double fd = (p.table.vbar[i + 1] - p.table.vbar[i - 1]) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - p.table.vbar_d1[i]));
        }
        return worst;
    };
    const double coarse = fd_error(41);   // h = 0.125
    const double fine = fd_error(81);     // h = 0.0625
    CHECK(fine < coarse);
    const double order = std::log2(coarse / fine);
    CHECK(order > 1.6);
    CHECK(order < 2.4);
}

TEST_CASE("hitting bound: recurrent, transient, and boundary cases") {
    const auto ou = make_ou_model(1);
    const auto recurrent = hitting_bound(ou, v1(0.0), 1.0, v1(2.0));
    CHECK_FALSE(recurrent.vbar_finite);
    CHECK(recurrent.bound == 0.0);
    CHECK(recurrent.bound < 1.0);

    // outward drift: never-hitting probability bound in (0, 1), matched
    // against the closed-form Gaussian-tail ratio
    CoefficientModel outward = make_ou_model(1, -1.0);  // b(x) = +x
    outward.family = "outward";
    HittingOptions hopt;
    hopt.grid_n = 257;
    const auto escape = hitting_bound(outward, v1(0.0), 1.0, v1(2.0), hopt);
    CHECK(escape.vbar_finite);
    CHECK(escape.bound > 0.0);
    CHECK(escape.bound < 1.0);
    const double base = 0.9;
    const double expect = (std::erf(2.0) - std::erf(base)) / (1.0 - std::erf(base));
    CHECK(escape.bound == Catch::Approx(expect).margin(1e-6));

    // evaluation right at the ball radius: the stub integral over [r0-eps, r0]
    const auto stub = hitting_bound(outward, v1(0.0), 1.0, v1(1.0), hopt);
    CHECK(stub.bound > 0.0);
    CHECK(stub.bound < escape.bound);

    CHECK_THROWS_AS(hitting_bound(ou, v1(0.0), 1.0, v1(0.5)), std::invalid_argument);
}

TEST_CASE("table CSV export") {
    const auto ou = make_ou_model(1);
    const auto p = build_pipeline(ou, rate_power(0.5), 1.0, 6.0, 11, 1.5);
    const std::string path = "/tmp/subgeo_test_lyapunov.csv";
    write_lyapunov_csv(p.table, path);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "r,vbar,vbar_d1,vbar_d2");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 11);
    std::remove(path.c_str());
}
