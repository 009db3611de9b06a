#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/drift.hpp"
#include "subgeo/model.hpp"
#include "subgeo/quadrature.hpp"
#include "subgeo/rate.hpp"

namespace subgeo {

enum class LyapunovKind { subgeometric, geometric, hitting };

// Radial energy function table. For the subgeometric kind,
//   vbar'(r) = e^{-I(r)} * (Lambda - H(r)) / Lambda,
//   vbar''(r) = -(iota(r)/r) vbar'(r) - rate(E(r)+1) / (Lambda gamma(r)),
// with H the cumulative integral-test integrand and E the cumulative of
// e^{-I}; vbar is the cumulative of vbar' from the base radius. The geometric
// kind is the same construction with the identity rate.
struct LyapunovTable {
    LyapunovKind kind = LyapunovKind::subgeometric;
    RadialProfile profile;
    RateFunction rate;
    double r1 = 0;
    double lambda_used = 0;
    double tail_remainder = 0;  // remainder estimate of the truncated outer integral
    std::vector<double> grid;
    std::vector<double> vbar, vbar_d1, vbar_d2;
    detail::Cumulative I, E, Vbar;
    detail::LogCumulative LogE;
    detail::TailCumulative Htail;  // outer integral from r to the truncation radius

    double vbar_at(double r) const { return Vbar.at(r); }

    double d1_at(double r) const {
        return detail::exp_capped(-I.at(r)) * Htail.at(r) / lambda_used;
    }

    double d2_at(double r) const {
        double decay;
        if (rate.eval_ln) {
            decay = std::exp(rate.eval_ln(detail::logsumexp(LogE.ln_at(r), 0.0)) -
                             std::log(lambda_used) - std::log(profile.gamma_of(r)));
        } else {
            const double arg = std::min(E.at(r), detail::kEnormCap) + 1.0;
            decay = rate.eval(arg) / (lambda_used * profile.gamma_of(r));
        }
        return -profile.iota_of(r) / r * d1_at(r) - decay;
    }
};

namespace detail {

inline LyapunovTable build_energy_table(const RadialProfile& profile,
                                        const LambdaVerdict& verdict,
                                        const RateFunction& rate, double r1,
                                        LyapunovKind kind) {
    if (!verdict.finite)
        throw std::domain_error(
            "lyapunov: integral test verdict is not finite; no energy function exists "
            "for this rate");
    if (!(r1 > profile.base_radius))
        throw std::invalid_argument("lyapunov: r1 must exceed the profile base radius");

    LyapunovTable t;
    t.kind = kind;
    t.profile = profile;
    t.rate = rate;
    t.r1 = r1;
    t.lambda_used = verdict.value;
    t.tail_remainder = std::isfinite(verdict.tail_bound) ? verdict.tail_bound : 0.0;
    t.I = verdict.I;
    t.E = verdict.E;
    t.LogE = verdict.LogE;
    t.Htail = TailCumulative::from(verdict.H, verdict.tail_estimate);
    t.grid = profile.grid;

    auto d1 = [I = t.I, Htail = t.Htail, lambda = t.lambda_used](double r) {
        return exp_capped(-I.at(r)) * Htail.at(r) / lambda;
    };
    t.Vbar = Cumulative::build(d1, verdict.H.nodes);

    t.vbar.resize(t.grid.size());
    t.vbar_d1.resize(t.grid.size());
    t.vbar_d2.resize(t.grid.size());
    for (size_t i = 0; i < t.grid.size(); ++i) {
        const double r = t.grid[i];
        t.vbar[i] = t.Vbar.at(r);
        t.vbar_d1[i] = t.d1_at(r);
        t.vbar_d2[i] = t.d2_at(r);
    }
    return t;
}

}  // namespace detail

inline LyapunovTable build_subgeometric(const RadialProfile& profile,
                                        const LambdaVerdict& verdict,
                                        const RateFunction& rate, double r1) {
    if (verdict.rate_label != rate.label)
        throw std::invalid_argument(
            "build_subgeometric: verdict was computed for rate '" + verdict.rate_label +
            "', not '" + rate.label + "'");
    return detail::build_energy_table(profile, verdict, rate, r1,
                                      LyapunovKind::subgeometric);
}

inline LyapunovTable build_geometric(const RadialProfile& profile,
                                     const LambdaVerdict& linear_verdict, double r1) {
    if (linear_verdict.rate_label != "identity")
        throw std::invalid_argument(
            "build_geometric: verdict must be computed with the identity rate");
    return detail::build_energy_table(profile, linear_verdict, rate_identity(), r1,
                                      LyapunovKind::geometric);
}

// ---------------------------------------------------------------------------
// Drift-inequality verification: at sampled points outside r1 the generator
// applied to the radial energy function must not exceed the decay term,
//   L V(x) + decay(V(x)) <= tolerance + remainder budget,
// with decay = rate(V)/2Lambda for the subgeometric kind and V/2Lambda for the
// geometric one. Jump models are checked with the compensated B; the jump
// integral remainder is reported as a diagnostic bound, not added.
// ---------------------------------------------------------------------------

struct DriftCheck {
    double max_violation = -kInf;
    double argmax_radius = 0;
    double tolerance = 0;
    double remainder_budget = 0;
    double jump_remainder_bound = 0;  // second-order bound on the omitted jump term
    size_t n_points = 0;
    bool passed = false;
};

inline DriftCheck verify_drift_inequality(const LyapunovTable& table,
                                          const CoefficientModel& model,
                                          const std::vector<Vec>& points,
                                          double tolerance = 1e-6, int n_threads = 1) {
    if (table.kind == LyapunovKind::hitting)
        throw std::invalid_argument("verify_drift_inequality: table must be an energy table");
    DriftCheck out;
    out.tolerance = tolerance;
    out.remainder_budget = table.tail_remainder / table.lambda_used;
    out.n_points = points.size();

    std::vector<double> viol(points.size(), -kInf), jumps(points.size(), 0.0);
    detail::parallel_for(points.size(), n_threads, [&](size_t i) {
        const Vec& x = points[i];
        const double r = (x - table.profile.center).norm();
        if (r < table.r1 * (1.0 - 1e-12))
            throw std::invalid_argument(
                "verify_drift_inequality: point at radius " + std::to_string(r) +
                " lies inside r1 = " + std::to_string(table.r1));
        const auto pf = pointwise_functionals(model, table.profile.center, x);
        const double d1 = table.d1_at(r);
        const double d2 = table.d2_at(r);
        const double gen = 0.5 * pf.C * d2 +
                           d1 / (2.0 * r) * (2.0 * pf.A - pf.C + 2.0 * pf.B);
        const double v = table.vbar_at(r) + 1.0;
        const double decay = table.kind == LyapunovKind::geometric
                                 ? v / (2.0 * table.lambda_used)
                                 : 0.5 * table.rate.eval(v) / table.lambda_used;
        viol[i] = gen + decay;
        if (!model.jump.empty() && model.jump.second_moment) {
            const double trn = model.jump.second_moment(x).trace();
            const double rho = std::isfinite(model.jump.bounded_jump_radius)
                                   ? model.jump.bounded_jump_radius
                                   : 1.0;
            double curv = 0.0;
            for (double rr : linspace(std::max(table.profile.base_radius, r - rho),
                                      r + rho, 5)) {
                curv = std::max(curv, std::abs(table.d2_at(rr)));
                curv = std::max(curv, table.d1_at(rr) / rr);
            }
            jumps[i] = 0.5 * trn * curv;
        }
    });
    for (size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(viol[i])) {  // a non-finite generator value never passes
            out.max_violation = kInf;
            out.argmax_radius = (points[i] - table.profile.center).norm();
            break;
        }
        if (viol[i] > out.max_violation) {
            out.max_violation = viol[i];
            out.argmax_radius = (points[i] - table.profile.center).norm();
        }
        out.jump_remainder_bound = std::max(out.jump_remainder_bound, jumps[i]);
    }
    out.passed = out.max_violation <= tolerance + out.remainder_budget;
    return out;
}

// ---------------------------------------------------------------------------
// Hitting-probability bound: with vbar(r) = int_{base}^{r} e^{-I(u)} du built
// from base = r0 - epsilon, the chance of never reaching the ball of radius r0
// from x is at most vbar(|x - x0|) / vbar(inf); an infinite vbar(inf) means
// the bound is zero (the process is radially recurrent in this sense).
// ---------------------------------------------------------------------------

struct HittingBound {
    double bound = 0;
    double vbar_at_x = 0;
    double vbar_total = kInf;  // vbar(inf) estimate when finite
    bool vbar_finite = false;
    double decay_exponent = 0;
};

struct HittingOptions {
    double epsilon = -1;  // default r0 / 10
    int grid_n = 192;
    int sphere_samples = 256;
    double grid_reach = -1;  // default max(10 r0, 2 |x - x0|)
    QuadOptions quad{};
};

inline HittingBound hitting_bound(const CoefficientModel& model, const Vec& x0,
                                  double r0_ball, const Vec& x,
                                  const HittingOptions& opt = {}) {
    const double dist = (x - x0).norm();
    if (!(r0_ball > 0)) throw std::invalid_argument("hitting_bound: r0 must be positive");
    if (dist < r0_ball)
        throw std::invalid_argument("hitting_bound: x must lie outside the target ball");
    const double eps = opt.epsilon > 0 ? opt.epsilon : r0_ball / 10.0;
    if (!(eps < r0_ball))
        throw std::invalid_argument("hitting_bound: epsilon must be below r0");
    const double base = r0_ball - eps;
    const double reach =
        opt.grid_reach > 0 ? opt.grid_reach : std::max(10.0 * r0_ball, 2.0 * dist);

    const auto prof = radial_profile(model, x0, base,
                                     linspace(base, reach, opt.grid_n),
                                     opt.sphere_samples);
    const auto I_tab = prof.I;
    auto density = [I_tab](double u) { return detail::exp_capped(-I_tab.at(u)); };

    HittingBound out;
    out.vbar_at_x = integrate(density, base, dist, opt.quad);
    TailOptions topt;
    topt.doublings = 3;
    topt.rel_change_tol = 1e-9;
    topt.slope_threshold = -1.1;
    topt.tail_tol = kInf;
    const auto tail = detail::integrate_to_infinity_until_stable(
        density, base, reach, opt.quad, topt, /*max_doublings=*/5);
    out.decay_exponent = tail.decay_exponent;
    out.vbar_finite = tail.finite && std::isfinite(tail.tail_bound);
    if (!out.vbar_finite) {
        out.bound = 0.0;  // vbar(inf) = inf: hitting happens with probability one bound-wise
        out.vbar_total = kInf;
        return out;
    }
    out.vbar_total = tail.value + tail.tail_bound;
    if (!(out.vbar_total > 0))
        throw std::domain_error("hitting_bound: degenerate vanishing energy integral");
    out.bound = out.vbar_at_x / out.vbar_total;
    return out;
}

// CSV export of a table: r, vbar, vbar', vbar'' per row.
inline void write_lyapunov_csv(const LyapunovTable& table, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "r,vbar,vbar_d1,vbar_d2\n";
    os.precision(17);
    for (size_t i = 0; i < table.grid.size(); ++i)
        os << table.grid[i] << ',' << table.vbar[i] << ',' << table.vbar_d1[i] << ','
           << table.vbar_d2[i] << '\n';
}

}  // namespace subgeo
