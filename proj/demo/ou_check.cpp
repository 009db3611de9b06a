// Minimal library walkthrough: build the radial profile of the unit
// mean-reverting model, decide the integral test, construct the energy
// function and verify its drift inequality.

#include <cstdio>

#include "subgeo/drift.hpp"
#include "subgeo/lyapunov.hpp"

int main() {
    using namespace subgeo;
    const auto model = make_ou_model(1);
    const Vec x0 = Vec::Zero(1);
    const double r0 = 1.0;

    const auto profile = radial_profile(model, x0, r0, linspace(r0, 20.0, 97), 2);
    const auto rate = rate_power(0.5);
    const auto verdict = lambda_constant(profile, rate, 20.0);
    std::printf("integral test: %s, value %.6g (tail bound %.2g)\n",
                verdict.finite ? "finite" : "divergent", verdict.value,
                verdict.tail_bound);

    const auto table = build_subgeometric(profile, verdict, rate, 1.5);
    std::vector<Vec> points;
    for (double r : linspace(1.5, 15.0, 100)) {
        Vec p(1);
        p[0] = r;
        points.push_back(p);
    }
    const auto check = verify_drift_inequality(table, model, points, 1e-6);
    std::printf("drift inequality: max violation %.3g (budget %.3g) -> %s\n",
                check.max_violation, check.tolerance + check.remainder_budget,
                check.passed ? "pass" : "FAIL");

    Vec far(1);
    far[0] = 3.0;
    const auto hb = hitting_bound(model, x0, 1.0, far);
    std::printf("never-hit bound from |x|=3: %.3g (finite tail: %s)\n", hb.bound,
                hb.vbar_finite ? "yes" : "no");
    return check.passed && verdict.finite ? 0 : 1;
}
