#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/model.hpp"
#include "subgeo/quadrature.hpp"
#include "subgeo/rate.hpp"
#include "subgeo/rng.hpp"

namespace subgeo {

// Radial functionals of the drift/diffusion pair at a single point, relative
// to a center x0:
//   A = 1/2 Tr c(x),  B = <x - x0, b(x)>,  C = <x - x0, c(x)(x - x0)> / |x - x0|^2.
// When the model carries jump activity, B uses the compensated drift
// b(x) - int_{B1} y nu(x, dy).
struct PointFunctionals {
    double A = 0, B = 0, C = 0;
};

inline PointFunctionals pointwise_functionals(const CoefficientModel& model,
                                              const Vec& x0, const Vec& x) {
    Vec d = x - x0;
    const double r2 = d.squaredNorm();
    if (r2 == 0.0)
        throw std::domain_error("pointwise_functionals: x must differ from the center");
    const Mat c = model.covariance(x);
    PointFunctionals out;
    out.A = 0.5 * c.trace();
    if (!model.jump.empty() && model.jump.compensator_integral) {
        out.B = d.dot(model.drift(x) - model.jump.compensator_integral(x));
    } else {
        out.B = d.dot(model.drift(x));
    }
    out.C = d.dot(c * d) / r2;
    return out;
}

// ---------------------------------------------------------------------------
// Sphere sampling
// ---------------------------------------------------------------------------

namespace detail {

// Deterministic, well-spread unit directions. d = 1 is the exact two-point
// sphere; d = 2 uses equal angles; d = 3 a Fibonacci spiral; higher dimensions
// map a Kronecker low-discrepancy sequence through the normal quantile.
inline std::vector<Vec> sphere_directions(int dim, int count) {
    std::vector<Vec> dirs;
    if (dim < 1) throw std::invalid_argument("sphere_directions: dim must be >= 1");
    if (dim == 1) {
        Vec p(1), m(1);
        p[0] = 1.0;
        m[0] = -1.0;
        dirs = {p, m};
        return dirs;
    }
    if (count < 2) throw std::invalid_argument("sphere_directions: count must be >= 2");
    dirs.reserve(count);
    if (dim == 2) {
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * M_PI * (double(k) + 0.5) / count;
            Vec u(2);
            u << std::cos(th), std::sin(th);
            dirs.push_back(u);
        }
        return dirs;
    }
    if (dim == 3) {
        const double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (double(k) + 0.5) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double th = ga * k;
            Vec u(3);
            u << rho * std::cos(th), rho * std::sin(th), z;
            dirs.push_back(u);
        }
        return dirs;
    }
    // generalized golden-ratio Kronecker sequence
    double phi = 1.5;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
    std::vector<double> alpha(dim);
    double ap = 1.0;
    for (int i = 0; i < dim; ++i) {
        ap /= phi;
        alpha[i] = ap;
    }
    for (int k = 0; k < count; ++k) {
        Vec u(dim);
        for (int i = 0; i < dim; ++i) {
            double v = std::fmod(0.5 + (k + 1) * alpha[i], 1.0);
            v = std::min(std::max(v, 1e-12), 1.0 - 1e-12);
            u[i] = inverse_normal_cdf(v);
        }
        const double n = u.norm();
        if (n > 0) dirs.push_back(u / n);
    }
    return dirs;
}

inline std::uint64_t double_bits(double x) {
    std::uint64_t b;
    std::memcpy(&b, &x, sizeof b);
    return b;
}

}  // namespace detail

struct SphereSearchOptions {
    int refine_rounds = 8;
    int refine_probes = 12;
    double margin = 0.0;  // conservative inflation of the sampled extrema
    int n_threads = 1;
};

// ---------------------------------------------------------------------------
// Radial profile: gamma (sphere infimum of C), iota (sphere supremum of
// (2A - C + 2B)/C) and the cumulative log-drift integral I.
// ---------------------------------------------------------------------------

struct RadialProfile {
    Vec center;
    double base_radius = 0;
    std::vector<double> grid;
    std::vector<double> gamma_vals, iota_vals, I_vals;
    int sphere_samples = 2;
    bool gamma_all_positive = true;
    std::vector<double> nonpositive_gamma_radii;
    std::function<double(double)> gamma_of, iota_of;  // continuous radial evaluation
    detail::Cumulative I;                             // integral of iota(s)/s from base_radius

    double I_at(double r) const { return I.at(r); }
};

namespace detail {

struct SphereScan {
    double gamma;  // inf of C over the sphere (margin-deflated)
    double iota;   // sup of the drift ratio (margin-inflated); NaN if C <= 0 occurs
};

// One radius: scan the direction set, then locally refine both extremizers by
// shrinking spherical perturbations. Sampled extrema are inner approximations
// (the sampled inf overestimates the true inf); `margin` pads them outward.
template <class Functionals>
SphereScan sphere_scan(const Functionals& fn, const Vec& x0, double r,
                       const std::vector<Vec>& dirs, const SphereSearchOptions& opt) {
    struct Point {
        double c, ratio;
    };
    auto at = [&](const Vec& u) -> Point {
        const auto pf = fn(Vec(x0 + r * u));
        if (pf.C <= 0.0) return {pf.C, std::numeric_limits<double>::quiet_NaN()};
        return {pf.C, (2.0 * pf.A - pf.C + 2.0 * pf.B) / pf.C};
    };
    double c_min = kInf, ratio_max = -kInf;
    Vec arg_c = dirs.front(), arg_ratio = dirs.front();
    bool degenerate = false;
    for (const auto& u : dirs) {
        const Point p = at(u);
        if (p.c < c_min) {
            c_min = p.c;
            arg_c = u;
        }
        if (std::isnan(p.ratio)) {
            degenerate = true;
        } else if (p.ratio > ratio_max) {
            ratio_max = p.ratio;
            arg_ratio = u;
        }
    }
    const int dim = int(x0.size());
    if (dim > 1 && !degenerate && opt.refine_rounds > 0) {
        RngStream rng(0x737068657265ULL ^ double_bits(r), std::uint64_t(dim),
                      RngDomain::generic);
        auto refine = [&](Vec dir, bool maximize_ratio) {
            double best = maximize_ratio ? at(dir).ratio : at(dir).c;
            double eps = 0.5;
            for (int round = 0; round < opt.refine_rounds; ++round) {
                for (int probe = 0; probe < opt.refine_probes; ++probe) {
                    Vec cand(dim);
                    for (int i = 0; i < dim; ++i) cand[i] = rng.next_gaussian();
                    cand = dir + eps * cand;
                    const double n = cand.norm();
                    if (n == 0) continue;
                    cand /= n;
                    const Point p = at(cand);
                    if (std::isnan(p.ratio)) {
                        degenerate = true;
                        return best;
                    }
                    const double v = maximize_ratio ? p.ratio : p.c;
                    if (maximize_ratio ? v > best : v < best) {
                        best = v;
                        dir = cand;
                    }
                }
                eps *= 0.5;
            }
            return best;
        };
        c_min = std::min(c_min, refine(arg_c, false));
        if (!degenerate) ratio_max = std::max(ratio_max, refine(arg_ratio, true));
    }
    SphereScan out;
    out.gamma = c_min > 0 ? c_min * (1.0 - opt.margin) : c_min;
    out.iota = degenerate ? std::numeric_limits<double>::quiet_NaN()
                          : ratio_max + opt.margin * std::abs(ratio_max);
    return out;
}

}  // namespace detail

inline RadialProfile radial_profile(const CoefficientModel& model, const Vec& x0,
                                    double r0, std::vector<double> grid,
                                    int sphere_samples = 512,
                                    const SphereSearchOptions& opt = {}) {
    if (grid.size() < 2) throw std::invalid_argument("radial_profile: grid too small");
    if (std::abs(grid.front() - r0) > 1e-12 * std::max(1.0, r0))
        throw std::invalid_argument("radial_profile: grid must start at r0");
    grid.front() = r0;
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("radial_profile: grid must be increasing");
    if (!(r0 > 0)) throw std::invalid_argument("radial_profile: r0 must be positive");

    RadialProfile prof;
    prof.center = x0;
    prof.base_radius = r0;
    prof.grid = std::move(grid);
    prof.sphere_samples = model.dim == 1 ? 2 : sphere_samples;

    auto dirs = std::make_shared<const std::vector<Vec>>(
        detail::sphere_directions(model.dim, prof.sphere_samples));
    auto model_copy = std::make_shared<const CoefficientModel>(model);
    const Vec center = x0;
    const SphereSearchOptions sopt = opt;

    auto scan_at = [model_copy, center, dirs, sopt](double r) {
        auto fn = [&](const Vec& x) {
            return pointwise_functionals(*model_copy, center, x);
        };
        return detail::sphere_scan(fn, center, r, *dirs, sopt);
    };

    const size_t n = prof.grid.size();
    prof.gamma_vals.resize(n);
    prof.iota_vals.resize(n);
    detail::parallel_for(n, opt.n_threads, [&](size_t i) {
        const auto s = scan_at(prof.grid[i]);
        prof.gamma_vals[i] = s.gamma;
        prof.iota_vals[i] = s.iota;
    });
    for (size_t i = 0; i < n; ++i) {
        if (!(prof.gamma_vals[i] > 0.0)) {
            prof.gamma_all_positive = false;
            prof.nonpositive_gamma_radii.push_back(prof.grid[i]);
        }
    }

    prof.gamma_of = [scan_at](double r) { return scan_at(r).gamma; };
    prof.iota_of = [scan_at](double r) { return scan_at(r).iota; };

    auto iota_of = prof.iota_of;
    prof.I = detail::Cumulative::build([iota_of](double s) { return iota_of(s) / s; },
                                       prof.grid, QuadOptions{}, opt.n_threads,
                                       /*tolerate_nonfinite=*/true);
    prof.I_vals = prof.I.values;
    return prof;
}

// ---------------------------------------------------------------------------
// The integral test constant: Lambda = int_{r0}^inf rate(E(u) + 1) e^{I(u)} / gamma(u) du
// with E(u) = int_{r0}^u e^{-I}. Finiteness is decided by a reported criterion:
// at r_max and three upper-limit doublings past it, the tail-corrected value
// (truncated integral plus the power-law remainder extrapolated from the
// fitted log-log slope over the trailing decade) must move by < 1e-8 relative
// per doubling, the final slope must stay below -1.1, and the remainder
// uncertainty must stay below tail_tol. The value reports the tail-corrected
// estimate; tail_bound reports its uncertainty.
// ---------------------------------------------------------------------------

struct LambdaVerdict {
    double value = 0;
    bool finite = false;
    double tail_estimate = 0;  // extrapolated remainder, included in value
    double tail_bound = kInf;  // uncertainty of the remainder (gates the verdict)
    double decay_exponent = 0;
    std::array<double, 3> doubling_rel_changes{kInf, kInf, kInf};
    double r_max = 0;
    double truncation_radius = 0;
    double tail_tol = 1e-6;
    std::string rate_label;
    std::vector<std::pair<double, double>> diagnostics;  // (node, segment contribution)
    detail::Cumulative I, E, H;   // working tables, reused by the Lyapunov builders
    detail::LogCumulative LogE;   // ln E, exact where E leaves double range
};

struct LambdaOptions {
    double tail_tol = 1e-6;
    double slope_threshold = -1.1;
    double doubling_rel_tol = 1e-8;
    int extension_nodes_per_doubling = 12;
    QuadOptions quad{};
};

namespace detail {

inline double exp_capped(double z) { return std::exp(std::min(z, 690.0)); }

constexpr double kEnormCap = 1e300;

inline double fitted_log_slope(const std::function<double(double)>& f, double lo,
                               double hi, int n_points = 17) {
    std::vector<double> lx, ly;
    for (int i = 0; i < n_points; ++i) {
        const double u = lo * std::pow(hi / lo, double(i) / (n_points - 1));
        const double fu = f(u);
        if (std::isfinite(fu) && fu > 0) {
            lx.push_back(std::log(u));
            ly.push_back(std::log(fu));
        }
    }
    if (lx.size() < 3) return -kInf;  // integrand vanished along the decade
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = double(lx.size());
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (m * sxy - sx * sy) / std::max(m * sxx - sx * sx, 1e-300);
}

}  // namespace detail

inline LambdaVerdict lambda_constant(const RadialProfile& profile,
                                     const RateFunction& rate, double r_max,
                                     const LambdaOptions& opt = {}) {
    validate_rate(rate);
    if (!profile.gamma_all_positive) {
        throw std::domain_error(
            "lambda_constant: gamma is non-positive at radius " +
            std::to_string(profile.nonpositive_gamma_radii.front()) +
            "; the integral test requires positive-definite diffusion there");
    }
    const double r0 = profile.base_radius;
    const double u0 = std::max(r_max, profile.grid.back());

    std::vector<double> nodes = profile.grid;
    if (u0 > nodes.back()) {
        const auto bridge =
            logspace(nodes.back(), u0, opt.extension_nodes_per_doubling + 1);
        nodes.insert(nodes.end(), bridge.begin() + 1, bridge.end());
    }
    double upper = u0;
    for (int k = 0; k < 3; ++k) {
        const auto ext =
            logspace(upper, 2.0 * upper, opt.extension_nodes_per_doubling + 1);
        nodes.insert(nodes.end(), ext.begin() + 1, ext.end());
        upper *= 2.0;
    }

    LambdaVerdict v;
    v.rate_label = rate.label;
    v.r_max = u0;
    v.truncation_radius = upper;
    v.tail_tol = opt.tail_tol;

    auto iota_of = profile.iota_of;
    auto gamma_of = profile.gamma_of;
    v.I = detail::Cumulative::build([iota_of](double s) { return iota_of(s) / s; },
                                    nodes, opt.quad);
    const auto I_tab = v.I;
    v.E = detail::Cumulative::build(
        [I_tab](double w) { return detail::exp_capped(-I_tab.at(w)); }, nodes,
        opt.quad);
    v.LogE = detail::LogCumulative::build([I_tab](double w) { return -I_tab.at(w); },
                                          nodes, opt.quad);
    const auto E_tab = v.E;
    const auto LogE_tab = v.LogE;
    const RateFunction rate_copy = rate;
    auto integrand = [I_tab, E_tab, LogE_tab, gamma_of, rate_copy](double u) {
        const double g = gamma_of(u);
        if (!(g > 0))
            throw std::domain_error("lambda_constant: gamma(" + std::to_string(u) +
                                    ") is not positive");
        double ln_rate;
        if (rate_copy.eval_ln) {
            ln_rate = rate_copy.eval_ln(detail::logsumexp(LogE_tab.ln_at(u), 0.0));
        } else {
            const double arg = std::min(E_tab.at(u), detail::kEnormCap) + 1.0;
            const double rv = rate_copy.eval(arg);
            if (!(rv > 0))
                throw std::domain_error("lambda_constant: rate function non-positive at " +
                                        std::to_string(arg));
            ln_rate = std::log(rv);
        }
        return std::exp(ln_rate + I_tab.at(u) - std::log(g));
    };
    v.H = detail::Cumulative::build(integrand, nodes, opt.quad);

    for (size_t k = 1; k < v.H.nodes.size(); ++k)
        v.diagnostics.emplace_back(v.H.nodes[k], v.H.values[k] - v.H.values[k - 1]);

    // tail-corrected value at each doubling level
    std::array<double, 4> level_value{}, level_tail{}, level_slope{};
    double level = u0;
    for (int k = 0; k < 4; ++k) {
        const double slope =
            detail::fitted_log_slope(integrand, std::max(level / 10.0, r0 * 1.02), level);
        const double h_end = integrand(level);
        double tail;
        if (h_end <= 0)
            tail = 0.0;
        else if (slope < -1.0)
            tail = h_end * level / (-slope - 1.0);
        else
            tail = kInf;
        level_slope[k] = slope;
        level_tail[k] = tail;
        level_value[k] = v.H.at(level) + (std::isfinite(tail) ? tail : 0.0);
        if (!std::isfinite(tail)) level_value[k] = kInf;
        level *= 2.0;
    }
    for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(level_value[k]) || !std::isfinite(level_value[k + 1]))
            v.doubling_rel_changes[k] = kInf;
        else
            v.doubling_rel_changes[k] = std::abs(level_value[k + 1] - level_value[k]) /
                                        std::max(1.0, std::abs(level_value[k + 1]));
    }
    v.decay_exponent = level_slope[3];
    v.tail_estimate = std::isfinite(level_tail[3]) ? level_tail[3] : 0.0;
    if (!std::isfinite(level_value[3])) {
        v.tail_bound = kInf;
        v.value = v.H.values.back();
    } else {
        v.value = level_value[3];
        v.tail_bound = std::abs(level_value[3] - level_value[2]) +
                       v.tail_estimate *
                           std::min(1.0, std::abs(level_slope[3] - level_slope[2]));
    }

    const bool stable = v.doubling_rel_changes[0] < opt.doubling_rel_tol &&
                        v.doubling_rel_changes[1] < opt.doubling_rel_tol &&
                        v.doubling_rel_changes[2] < opt.doubling_rel_tol;
    const bool steep =
        v.decay_exponent <= opt.slope_threshold || v.tail_estimate == 0.0;
    v.finite = stable && steep && v.tail_bound < opt.tail_tol;
    return v;
}

// ---------------------------------------------------------------------------
// Classical polynomial-drift condition:
//   A(x) - (1 - gamma/2) C0(x) + B0(x) <= -Gamma_c |x|^{gamma alpha - gamma + 2},
// sampled over |x| >= r0. Also reports the largest Gamma_c that would make all
// sampled margins non-positive (feasibility is monotone in Gamma_c).
// ---------------------------------------------------------------------------

struct ClassicalVerdict {
    bool feasible = false;
    double worst_margin = -kInf;
    double worst_radius = 0;
    double sup_feasible_Gamma = 0;
    std::vector<double> violation_radii;
    double alpha = 0, gamma_exp = 0, Gamma_c = 0, r0 = 0;
};

struct ClassicalOptions {
    double probe_radius = 100.0;
    int n_radii = 20000;
    int sphere_samples = 128;
    int n_threads = 1;
};

inline ClassicalVerdict check_classical_condition(const CoefficientModel& model,
                                                  double alpha, double gamma_exp,
                                                  double Gamma_c, double r0,
                                                  const ClassicalOptions& opt = {}) {
    if (!(alpha > 0 && alpha < 1))
        throw std::invalid_argument("check_classical_condition: alpha must lie in (0,1)");
    if (!(gamma_exp > 0) || !(Gamma_c > 0))
        throw std::invalid_argument("check_classical_condition: gamma and Gamma must be positive");
    const double expo = gamma_exp * alpha - gamma_exp + 2.0;
    const Vec x0 = Vec::Zero(model.dim);
    const auto dirs = detail::sphere_directions(
        model.dim, model.dim == 1 ? 2 : opt.sphere_samples);

    ClassicalVerdict out;
    out.alpha = alpha;
    out.gamma_exp = gamma_exp;
    out.Gamma_c = Gamma_c;
    out.r0 = r0;

    const auto radii = linspace(r0, opt.probe_radius, opt.n_radii);
    std::vector<double> lhs_sup(radii.size(), -kInf);
    detail::parallel_for(radii.size(), opt.n_threads, [&](size_t i) {
        const double r = radii[i];
        double sup = -kInf;
        for (const auto& u : dirs) {
            const Vec x = x0 + r * u;
            const auto pf = pointwise_functionals(model, x0, x);
            sup = std::max(sup, pf.A - (1.0 - 0.5 * gamma_exp) * pf.C + pf.B);
        }
        lhs_sup[i] = sup;
    });

    double sup_gamma = kInf;
    for (size_t i = 0; i < radii.size(); ++i) {
        const double pw = std::pow(radii[i], expo);
        const double margin = lhs_sup[i] + Gamma_c * pw;
        if (margin > out.worst_margin) {
            out.worst_margin = margin;
            out.worst_radius = radii[i];
        }
        if (margin > 0 && out.violation_radii.size() < 10000)
            out.violation_radii.push_back(radii[i]);
        sup_gamma = std::min(sup_gamma, -lhs_sup[i] / pw);
    }
    out.feasible = out.worst_margin <= 0.0;
    out.sup_feasible_Gamma = std::max(0.0, std::isfinite(sup_gamma) ? sup_gamma : 0.0);
    return out;
}

// Pipeline check: under gamma_exp < 2/(1-alpha) and Delta^{-1} <= C0 <= Delta
// on the probed region, the classical condition implies a finite integral
// test; both verdicts are reported side by side.
struct ImplicationReport {
    ClassicalVerdict classical;
    bool c0_bounds_ok = false;
    double c0_min = kInf, c0_max = -kInf;
    bool lambda_finite = false;
    double lambda_value = 0;
};

inline ImplicationReport check_classical_implies_integral(
    const CoefficientModel& model, double alpha, double gamma_exp, double Gamma_c,
    double r0, double Delta_bound, const std::vector<double>& profile_grid,
    int sphere_samples = 128, const ClassicalOptions& copt = {},
    const LambdaOptions& lopt = {}) {
    if (!(gamma_exp < 2.0 / (1.0 - alpha)))
        throw std::invalid_argument(
            "check_classical_implies_integral: requires gamma < 2/(1-alpha)");
    if (!(Delta_bound >= 1.0))
        throw std::invalid_argument("check_classical_implies_integral: Delta must be >= 1");

    ImplicationReport rep;
    const Vec x0 = Vec::Zero(model.dim);
    const auto dirs = detail::sphere_directions(
        model.dim, model.dim == 1 ? 2 : sphere_samples);
    for (double r : linspace(r0, copt.probe_radius, 200)) {
        for (const auto& u : dirs) {
            const auto pf = pointwise_functionals(model, x0, Vec(x0 + r * u));
            rep.c0_min = std::min(rep.c0_min, pf.C);
            rep.c0_max = std::max(rep.c0_max, pf.C);
        }
    }
    rep.c0_bounds_ok =
        rep.c0_min >= 1.0 / Delta_bound - 1e-9 && rep.c0_max <= Delta_bound + 1e-9;
    if (!rep.c0_bounds_ok)
        throw std::domain_error(
            "check_classical_implies_integral: C0 leaves [1/Delta, Delta] on the probed "
            "region (observed " +
            std::to_string(rep.c0_min) + " .. " + std::to_string(rep.c0_max) + ")");

    rep.classical = check_classical_condition(model, alpha, gamma_exp, Gamma_c, r0, copt);
    const auto prof = radial_profile(model, x0, r0, profile_grid, sphere_samples);
    const auto verdict = lambda_constant(prof, rate_power(alpha), profile_grid.back(), lopt);
    rep.lambda_finite = verdict.finite;
    rep.lambda_value = verdict.value;
    return rep;
}

// ---------------------------------------------------------------------------
// Weighted tail bound (sufficient condition for the integral test): with
//   Delta = sup_{r >= r0} rho(int_{r0}^r g + c)^{1+beta} int_r^inf f,
// the weighted tail integral int_r^inf rho(int g + c) f is bounded by the
// clause (i) curve for beta > 0 and the clause (ii) logarithmic curve for
// beta = 0 (which needs int g < inf or bounded rho).
// ---------------------------------------------------------------------------

struct TailProductBound {
    double Delta = 0;
    int clause = 1;
    std::vector<double> radii;
    std::vector<double> bound_curve;
    std::vector<double> lhs_values;  // direct quadrature of the weighted tail (diagnostic)
};

struct TailProductOptions {
    double probe_max = 200.0;
    int n_radii = 64;
    bool rho_bounded_hint = false;
    QuadOptions quad{};
};

inline TailProductBound weighted_tail_bound(const std::function<double(double)>& rho,
                                            const std::function<double(double)>& f_tail,
                                            const std::function<double(double)>& g,
                                            double c, double beta, double r0,
                                            const TailProductOptions& opt = {}) {
    if (!(beta >= 0)) throw std::invalid_argument("weighted_tail_bound: beta must be >= 0");
    TailProductBound out;
    out.radii = linspace(r0, opt.probe_max, opt.n_radii);

    const auto G = detail::Cumulative::build(g, out.radii, opt.quad);
    const auto f_verdict = detail::integrate_to_infinity_until_stable(
        f_tail, out.radii.back(), 2.0 * out.radii.back(), opt.quad,
        detail::modulus_tail_options());
    if (!f_verdict.finite)
        throw std::domain_error("weighted_tail_bound: int_r^inf f does not converge");

    // backward cumulative F(r) = int_r^inf f
    std::vector<double> F(out.radii.size());
    F.back() = f_verdict.value + f_verdict.tail_bound;
    for (size_t i = out.radii.size() - 1; i > 0; --i)
        F[i - 1] = F[i] + integrate(f_tail, out.radii[i - 1], out.radii[i], opt.quad);

    double g_total = kInf;
    bool g_tail_finite = false;
    if (beta == 0.0) {
        const auto g_verdict = detail::integrate_to_infinity_until_stable(
            g, r0, 2.0 * std::max(r0, 1.0), opt.quad, detail::modulus_tail_options());
        g_tail_finite = g_verdict.finite;
        if (g_tail_finite) g_total = g_verdict.value + g_verdict.tail_bound;
        if (!g_tail_finite && !opt.rho_bounded_hint)
            throw std::domain_error(
                "weighted_tail_bound: beta = 0 requires int g < inf or bounded rho");
    }

    for (size_t i = 0; i < out.radii.size(); ++i) {
        const double w = rho(G.values[i] + c);
        out.Delta = std::max(out.Delta, std::pow(w, 1.0 + beta) * F[i]);
    }

    // diagnostic left-hand sides by direct quadrature
    std::vector<double> lhs_inc(out.radii.size(), 0.0);
    for (size_t i = 0; i + 1 < out.radii.size(); ++i) {
        lhs_inc[i] = integrate(
            [&](double u) { return rho(G.at(u) + c) * f_tail(u); }, out.radii[i],
            out.radii[i + 1], opt.quad);
    }
    const double rho_end = rho(G.values.back() + c);
    std::vector<double> lhs(out.radii.size());
    lhs.back() = rho_end * F.back();  // tail weighted by its left endpoint (f beyond probe_max is tiny)
    for (size_t i = out.radii.size() - 1; i > 0; --i) lhs[i - 1] = lhs[i] + lhs_inc[i - 1];
    out.lhs_values = lhs;

    out.bound_curve.resize(out.radii.size());
    if (beta > 0) {
        out.clause = 1;
        for (size_t i = 0; i < out.radii.size(); ++i)
            out.bound_curve[i] = out.Delta * (1.0 + beta) / beta *
                                 std::pow(rho(G.values[i] + c), -beta);
    } else {
        out.clause = 2;
        const double rho_inf =
            g_tail_finite ? rho(g_total + c) : rho(G.values.back() + c);
        for (size_t i = 0; i < out.radii.size(); ++i)
            out.bound_curve[i] =
                out.Delta + out.Delta * std::log(rho_inf / rho(G.values[i] + c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Jump-moment profile: when 2A - C + 2B <= 0 on the probed region, gamma and
// iota may be rebuilt with the second-moment-augmented quadratic form
// N(x) = <x-x0, (c(x) + n(x))(x-x0)> / |x-x0|^2 in place of C, shifting the
// positive-definiteness requirement to c + n.
// ---------------------------------------------------------------------------

inline RadialProfile jump_moment_profile(const CoefficientModel& model, const Vec& x0,
                                         double r0, std::vector<double> grid,
                                         int sphere_samples = 512,
                                         const SphereSearchOptions& opt = {}) {
    if (model.jump.empty() || !model.jump.second_moment)
        throw std::invalid_argument("jump_moment_profile: model has no jump second moments");

    // hypothesis gate: 2A - C + 2B <= 0 on sampled spheres
    const auto dirs = detail::sphere_directions(
        model.dim, model.dim == 1 ? 2 : sphere_samples);
    double worst = -kInf, worst_r = 0;
    for (double r : linspace(r0, grid.back(), 64)) {
        for (const auto& u : dirs) {
            const auto pf = pointwise_functionals(model, x0, Vec(x0 + r * u));
            const double val = 2.0 * pf.A - pf.C + 2.0 * pf.B;
            if (val > worst) {
                worst = val;
                worst_r = r;
            }
        }
    }
    if (worst > 1e-9)
        throw std::domain_error(
            "jump_moment_profile: hypothesis 2A - C + 2B <= 0 fails at radius " +
            std::to_string(worst_r) + " (value " + std::to_string(worst) + ")");

    const auto second_moment = model.jump.second_moment;
    const CoefficientModel base = model;
    // The scan computes inf C' and sup (2A' - C' + 2B')/C'. Feed it C' = N and
    // A' = A + (N - C)/2 so the ratio equals (2A - C + 2B)/N with the original
    // numerator while the infimum and the positivity requirement land on N.
    auto fn = [base, second_moment, x0](const Vec& x) {
        PointFunctionals pf = pointwise_functionals(base, x0, x);
        const Vec d = x - x0;
        const double r2 = d.squaredNorm();
        const Mat n = second_moment(x);
        const double N = pf.C + d.dot(n * d) / r2;
        PointFunctionals out;
        out.A = pf.A + 0.5 * (N - pf.C);
        out.B = pf.B;
        out.C = N;
        return out;
    };

    RadialProfile prof;
    prof.center = x0;
    prof.base_radius = r0;
    prof.grid = std::move(grid);
    prof.sphere_samples = model.dim == 1 ? 2 : sphere_samples;
    if (std::abs(prof.grid.front() - r0) > 1e-12 * std::max(1.0, r0))
        throw std::invalid_argument("jump_moment_profile: grid must start at r0");

    auto dirs_ptr = std::make_shared<const std::vector<Vec>>(dirs);
    const SphereSearchOptions sopt = opt;
    const Vec center = x0;
    auto scan_at = [fn, center, dirs_ptr, sopt](double r) {
        return detail::sphere_scan(fn, center, r, *dirs_ptr, sopt);
    };
    const size_t n = prof.grid.size();
    prof.gamma_vals.resize(n);
    prof.iota_vals.resize(n);
    detail::parallel_for(n, opt.n_threads, [&](size_t i) {
        const auto s = scan_at(prof.grid[i]);
        prof.gamma_vals[i] = s.gamma;
        prof.iota_vals[i] = s.iota;
    });
    for (size_t i = 0; i < n; ++i) {
        if (!(prof.gamma_vals[i] > 0.0)) {
            prof.gamma_all_positive = false;
            prof.nonpositive_gamma_radii.push_back(prof.grid[i]);
        }
    }
    prof.gamma_of = [scan_at](double r) { return scan_at(r).gamma; };
    prof.iota_of = [scan_at](double r) { return scan_at(r).iota; };
    auto iota_of = prof.iota_of;
    prof.I = detail::Cumulative::build([iota_of](double s) { return iota_of(s) / s; },
                                       prof.grid, QuadOptions{}, opt.n_threads,
                                       /*tolerate_nonfinite=*/true);
    prof.I_vals = prof.I.values;
    return prof;
}

// ---------------------------------------------------------------------------
// Asymptotic-flatness certification: the largest Gamma such that
//   f'(|x-y|) <x-y, b(x)-b(y)>  <=  -Gamma |x-y| psi(f(|x-y|))   on f <= gamma
// holds over a sampled pair grid (and the zero branch holds past gamma).
// ---------------------------------------------------------------------------

struct ContractionCertificate {
    bool feasible = false;
    double Gamma = 0;             // infimum of the sampled ratio
    double worst_pair_distance = 0;
    size_t pairs_checked = 0;
    bool zero_branch_ok = true;   // f > gamma branch: f' <x-y, db> <= 0
};

inline ContractionCertificate certify_contraction(const CoefficientModel& model,
                                                  const ModulusPair& mod,
                                                  double box_radius = 5.0,
                                                  int n_grid = 200,
                                                  std::uint64_t seed = 0xC0FFEEULL) {
    ContractionCertificate cert;
    double ratio_min = kInf;
    auto consider = [&](const Vec& x, const Vec& y) {
        const Vec d = x - y;
        const double dist = d.norm();
        if (dist == 0) return;
        const double fd = mod.f(dist);
        const double lhs = mod.f_deriv(dist) * d.dot(model.drift(x) - model.drift(y));
        ++cert.pairs_checked;
        if (fd > mod.gamma_threshold) {
            if (lhs > 1e-12) cert.zero_branch_ok = false;
            return;
        }
        const double denom = dist * mod.psi(fd);
        if (denom <= 0) return;
        const double ratio = -lhs / denom;
        if (ratio < ratio_min) {
            ratio_min = ratio;
            cert.worst_pair_distance = dist;
        }
    };
    if (model.dim == 1) {
        const auto xs = linspace(-box_radius, box_radius, n_grid);
        for (size_t i = 0; i < xs.size(); ++i) {
            Vec x(1);
            x[0] = xs[i];
            for (size_t j = i + 1; j < xs.size(); ++j) {
                Vec y(1);
                y[0] = xs[j];
                consider(x, y);
            }
        }
    } else {
        RngStream rng(seed, 1, RngDomain::generic);
        const int n_pairs = n_grid * n_grid / 2;
        for (int k = 0; k < n_pairs; ++k) {
            Vec x(model.dim), y(model.dim);
            for (int i = 0; i < model.dim; ++i) {
                x[i] = box_radius * (2.0 * rng.next_uniform() - 1.0);
                y[i] = box_radius * (2.0 * rng.next_uniform() - 1.0);
            }
            consider(x, y);
        }
    }
    cert.Gamma = std::isfinite(ratio_min) ? ratio_min : 0.0;
    cert.feasible = cert.zero_branch_ok && cert.Gamma > 0.0;
    return cert;
}

}  // namespace subgeo
