#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/config.hpp"
#include "subgeo/distance.hpp"
#include "subgeo/drift.hpp"
#include "subgeo/lyapunov.hpp"
#include "subgeo/model.hpp"
#include "subgeo/rate.hpp"
#include "subgeo/simulate.hpp"
#include "subgeo/subordinate.hpp"

namespace subgeo {

struct CheckResult {
    std::string name;
    bool passed = false;
    json details;
    std::vector<std::string> warnings;
};

struct AnalysisReport {
    std::string command;
    std::string tool_version = "0.1.0";
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    json effective_config;
    std::vector<CheckResult> checks;
    std::vector<std::string> warnings;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    json to_json() const {
        json j;
        j["command"] = command;
        j["tool_version"] = tool_version;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["effective_config"] = effective_config;
        j["warnings"] = warnings;
        j["checks"] = json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name},
                                   {"passed", c.passed},
                                   {"details", c.details},
                                   {"warnings", c.warnings}});
        return j;
    }

    // The text rendering prints the very same serialized numbers as the JSON
    // one (both go through the same shortest-round-trip formatting).
    std::string to_text() const {
        std::ostringstream os;
        os << command << " report (tool " << tool_version << ", config hash "
           << config_hash << ", seed " << seed << ")\n";
        for (const auto& c : checks) {
            os << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << "\n";
            for (const auto& [k, v] : c.details.items())
                os << "    " << k << " = " << v.dump() << "\n";
            for (const auto& w : c.warnings) os << "    warning: " << w << "\n";
        }
        for (const auto& w : warnings) os << "warning: " << w << "\n";
        os << (all_passed() ? "ALL CHECKS PASSED\n" : "CHECKS FAILED\n");
        return os.str();
    }
};

namespace detail {

inline bool wants(const RunConfig& c, const std::string& check) {
    for (const auto& x : c.checks)
        if (x == check) return true;
    return false;
}

inline bool has_format(const RunConfig& c, const std::string& f) {
    for (const auto& x : c.formats)
        if (x == f) return true;
    return false;
}

inline int pick_record_stride(int n_steps, int target_points) {
    int s = std::max(1, n_steps / std::max(1, target_points));
    while (s > 1 && n_steps % s != 0) --s;
    return s;
}

inline std::vector<Vec> verification_points(const Vec& x0, double r1, int count,
                                            int dim) {
    const auto dirs = sphere_directions(dim, dim == 1 ? 2 : 16);
    const auto radii = linspace(r1, 10.0 * r1, count);
    std::vector<Vec> pts;
    pts.reserve(radii.size());
    for (size_t i = 0; i < radii.size(); ++i)
        pts.push_back(Vec(x0 + radii[i] * dirs[i % dirs.size()]));
    return pts;
}

inline std::string sweep_tag(const Vec& x0, double r0) {
    std::ostringstream os;
    os << "[x0=(";
    for (Eigen::Index i = 0; i < x0.size(); ++i)
        os << (i ? "," : "") << x0[i];
    os << "),r0=" << r0 << "]";
    return os.str();
}

inline Vec to_vec(const std::vector<double>& v) {
    Vec x(v.size());
    for (size_t i = 0; i < v.size(); ++i) x[Eigen::Index(i)] = v[i];
    return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// check-tv: radial profile -> integral-test verdict -> energy table -> drift
// verification -> rate curve. Sweeps the configured (x0, r0) list; the check
// passes if any swept base point passes. Also hosts the classical checker and
// the hitting bound when requested.
// ---------------------------------------------------------------------------

inline AnalysisReport check_tv(const RunConfig& c) {
    AnalysisReport rep;
    rep.command = "check-tv";
    rep.effective_config = c.effective();
    rep.config_hash = c.hash();
    rep.seed = c.seed;

    CoefficientModel model;
    try {
        model = model_from_config(c);
    } catch (const std::exception& e) {
        rep.checks.push_back({"model", false, json{{"stage", "model"}, {"error", e.what()}}, {}});
        return rep;
    }

    const auto growth = check_coefficient_growth(
        model, 1e3, {1.0, 5.0, std::max(10.0, c.grid_r_max / 2.0)});
    if (!growth.locally_bounded)
        rep.warnings.push_back("coefficients appear unbounded on a probed ball");
    if (!growth.linear_growth)
        rep.warnings.push_back("mean-square linear growth margin positive: " +
                               std::to_string(growth.worst_growth_margin));

    const double tol = c.tolerance * c.tolerance_scale;
    const bool want_tv = detail::wants(c, "tv_condition");
    const bool want_lyap = detail::wants(c, "lyapunov_verify");
    const bool geometric = parse_scalar_family(c.rate_spec).name == "identity";

    std::filesystem::create_directories(c.out_dir);

    if (want_tv || want_lyap) {
        bool any_tv_pass = false, any_ly_pass = false;
        json best_tv, best_ly;
        std::vector<CheckResult> sweep_results;
        int sweep_idx = 0;
        for (const auto& x0v : c.x0_list) {
            for (double r0 : c.r0_list) {
                const Vec x0 = detail::to_vec(x0v);
                const std::string tag = detail::sweep_tag(x0, r0);
                CheckResult tv{"tv_sweep" + tag, false, json::object(), {}};
                CheckResult ly{"lyapunov_sweep" + tag, false, json::object(), {}};
                std::string stage = "radial_profile";
                try {
                    if (!(c.grid_r_max > r0))
                        throw std::invalid_argument("grid_r_max must exceed r0");
                    const auto grid = c.grid_spacing == "log"
                                          ? logspace(r0, c.grid_r_max, c.grid_n)
                                          : linspace(r0, c.grid_r_max, c.grid_n);
                    SphereSearchOptions sopt;
                    sopt.n_threads = c.n_threads;
                    const auto profile = (!model.jump.empty() && model.jump.second_moment)
                                             ? jump_moment_profile(model, x0, r0, grid,
                                                                   c.sphere_samples, sopt)
                                             : radial_profile(model, x0, r0, grid,
                                                              c.sphere_samples, sopt);
                    stage = "lambda_constant";
                    const RateFunction rate =
                        geometric ? rate_identity() : rate_from_name(c.rate_spec);
                    LambdaOptions lopt;
                    lopt.tail_tol = std::max(1e-12, tol);
                    const auto verdict = lambda_constant(profile, rate, c.grid_r_max, lopt);
                    tv.details["rate"] = rate.label;
                    tv.details["lambda"] = verdict.value;
                    tv.details["lambda_finite"] = verdict.finite;
                    tv.details["tail_bound"] = verdict.tail_bound;
                    tv.details["decay_exponent"] = verdict.decay_exponent;
                    tv.details["branch"] = geometric ? "geometric" : "subgeometric";
                    if (!verdict.finite) {
                        tv.details["failure"] = "integral test not finite; no rate emitted";
                        ly.details["failure"] = "integral test not finite";
                    } else {
                        stage = "lyapunov_build";
                        const double r1 = c.r1_factor * r0;
                        const auto table =
                            geometric ? build_geometric(profile, verdict, r1)
                                      : build_subgeometric(profile, verdict, rate, r1);
                        stage = "verify_drift_inequality";
                        const auto pts =
                            detail::verification_points(x0, r1, 200, model.dim);
                        const auto check = verify_drift_inequality(table, model, pts, tol,
                                                                   c.n_threads);
                        ly.details["max_violation"] = check.max_violation;
                        ly.details["argmax_radius"] = check.argmax_radius;
                        ly.details["tolerance"] = check.tolerance;
                        ly.details["remainder_budget"] = check.remainder_budget;
                        ly.details["jump_remainder_bound"] = check.jump_remainder_bound;
                        ly.passed = check.passed;
                        tv.passed = verdict.finite && check.passed;
                        if (detail::has_format(c, "csv")) {
                            stage = "emit";
                            write_lyapunov_csv(
                                table, c.out_dir + "/lyapunov_" + std::to_string(sweep_idx) +
                                           ".csv");
                            if (!geometric) {
                                std::ofstream os(c.out_dir + "/rate_curve_" +
                                                 std::to_string(sweep_idx) + ".csv");
                                os << "t,rate\n";
                                os.precision(17);
                                for (double t : logspace(1e-2, 1e4, 121))
                                    os << t << ',' << tv_rate_at(rate, t) << '\n';
                            }
                        }
                    }
                } catch (const std::exception& e) {
                    tv.details["stage"] = stage;
                    tv.details["error"] = e.what();
                    ly.details["stage"] = stage;
                    ly.details["error"] = e.what();
                }
                if (tv.passed && !any_tv_pass) best_tv = tv.details;
                if (ly.passed && !any_ly_pass) best_ly = ly.details;
                any_tv_pass = any_tv_pass || tv.passed;
                any_ly_pass = any_ly_pass || ly.passed;
                if (want_tv) sweep_results.push_back(tv);
                if (want_lyap) sweep_results.push_back(ly);
                ++sweep_idx;
            }
        }
        // one admissible (x0, r0) suffices for the conclusion: per-sweep rows
        // stay informational, the summary rows carry the verdicts
        for (auto& r : sweep_results) rep.checks.push_back(std::move(r));
        if (want_tv) {
            json d{{"swept_entries", sweep_idx}};
            if (!best_tv.is_null()) d["passing_entry"] = best_tv;
            rep.checks.push_back({"tv_condition", any_tv_pass, d, {}});
        }
        if (want_lyap) {
            json d{{"swept_entries", sweep_idx}};
            if (!best_ly.is_null()) d["passing_entry"] = best_ly;
            rep.checks.push_back({"lyapunov_verify", any_ly_pass, d, {}});
        }
    }

    if (detail::wants(c, "classical_subgeo")) {
        CheckResult cr{"classical_subgeo", false, json::object(), {}};
        try {
            ClassicalOptions copt;
            copt.probe_radius = c.classical_probe_radius;
            copt.n_radii = c.classical_n_radii;
            copt.n_threads = c.n_threads;
            const auto v = check_classical_condition(model, c.classical_alpha,
                                                     c.classical_gamma_exp,
                                                     c.classical_Gamma, c.classical_r0, copt);
            cr.passed = v.feasible;
            cr.details["feasible"] = v.feasible;
            cr.details["worst_margin"] = v.worst_margin;
            cr.details["worst_radius"] = v.worst_radius;
            cr.details["sup_feasible_Gamma"] = v.sup_feasible_Gamma;
            cr.details["n_violations"] = v.violation_radii.size();
            if (!v.violation_radii.empty()) {
                json vr = json::array();
                for (size_t i = 0; i < std::min<size_t>(v.violation_radii.size(), 32); ++i)
                    vr.push_back(v.violation_radii[i]);
                cr.details["violation_radii_head"] = vr;
            }
        } catch (const std::exception& e) {
            cr.details["error"] = e.what();
        }
        rep.checks.push_back(cr);
    }

    if (detail::wants(c, "hitting_bound")) {
        for (size_t i = 0; i < c.hitting_points.size(); ++i) {
            CheckResult hr{"hitting_bound[point " + std::to_string(i) + "]", false,
                           json::object(), {}};
            try {
                HittingOptions hopt;
                hopt.epsilon = c.hitting_epsilon_factor * c.hitting_r0;
                hopt.sphere_samples = c.sphere_samples;
                const Vec x0 = detail::to_vec(c.x0_list.front());
                const auto hb = hitting_bound(model, x0, c.hitting_r0,
                                              detail::to_vec(c.hitting_points[i]), hopt);
                hr.details["bound"] = hb.bound;
                hr.details["vbar_finite"] = hb.vbar_finite;
                hr.details["vbar_at_x"] = hb.vbar_at_x;
                hr.details["decay_exponent"] = hb.decay_exponent;
                hr.passed = hb.bound < 1.0;
            } catch (const std::exception& e) {
                hr.details["error"] = e.what();
            }
            rep.checks.push_back(hr);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// check-wass: synchronous-coupling contraction against the predicted inverse
// decay curves, with the chaining multiplier past the modulus threshold.
// ---------------------------------------------------------------------------

inline AnalysisReport check_wass(const RunConfig& c) {
    AnalysisReport rep;
    rep.command = "check-wass";
    rep.effective_config = c.effective();
    rep.config_hash = c.hash();
    rep.seed = c.seed;
    std::filesystem::create_directories(c.out_dir);

    CoefficientModel model;
    ModulusPair mod;
    std::string stage = "model";
    try {
        model = model_from_config(c);
        if (!model.sigma_constant)
            throw std::invalid_argument(
                "wasserstein contraction requires a constant diffusion coefficient");
        stage = "modulus";
        mod = make_modulus(c.f_spec, c.psi_spec, c.gamma_threshold, c.contraction_const);
        validate_modulus(mod);
    } catch (const std::exception& e) {
        rep.checks.push_back(
            {"wasserstein_contraction", false,
             json{{"stage", stage}, {"error", e.what()}}, {}});
        return rep;
    }

    double Gamma_used = c.contraction_const;
    json cert_details;
    if (c.certify_contraction_flag) {
        const auto cert = certify_contraction(model, mod, c.certify_box, c.certify_grid);
        cert_details = {{"Gamma", cert.Gamma},
                        {"feasible", cert.feasible},
                        {"pairs_checked", cert.pairs_checked},
                        {"zero_branch_ok", cert.zero_branch_ok}};
        if (!cert.feasible) {
            rep.checks.push_back({"wasserstein_contraction", false,
                                  json{{"stage", "certify_contraction"},
                                       {"certificate", cert_details},
                                       {"error", "asymptotic flatness failed on the pair grid"}},
                                  {}});
            return rep;
        }
        Gamma_used = cert.Gamma;
        mod.contraction_const = Gamma_used;
    }

    const double p = c.wasserstein_p;
    for (size_t pi = 0; pi < c.pairs.size(); ++pi) {
        CheckResult res{"wasserstein_contraction[pair " + std::to_string(pi) + "]", false,
                        json::object(), {}};
        try {
            const Vec x = detail::to_vec(c.pairs[pi].at(0));
            const Vec y = detail::to_vec(c.pairs[pi].at(1));
            const double d0 = (x - y).norm();
            const double fd0 = mod.f(d0);
            const int n_steps = int(std::llround(c.horizon / c.dt));
            SimOptions sopt;
            sopt.n_threads = c.n_threads;
            sopt.record_stride = detail::pick_record_stride(n_steps, 400);
            const auto ens = synchronous_pair(model, x, y, c.horizon, c.dt, c.n_paths,
                                              c.seed, -1, sopt);

            std::vector<double> emp(ens.n_times);
            for (int ti = 0; ti < ens.n_times; ++ti)
                emp[ti] = coupling_cost(ens, mod, p, ti);

            const double delta = chaining_delta(mod);
            const int multiplier =
                fd0 > mod.gamma_threshold ? int(std::ceil(delta * d0)) : 1;
            const double kappa_used = fd0 > mod.gamma_threshold ? mod.gamma_threshold : fd0;
            std::vector<double> bound(ens.n_times, 0.0);
            if (d0 > 0) {
                std::vector<double> targets(ens.n_times);
                for (int ti = 0; ti < ens.n_times; ++ti)
                    targets[ti] = Gamma_used * ens.times[ti];
                const auto inv = modulus_inverse_curve(mod, kappa_used, targets);
                for (int ti = 0; ti < ens.n_times; ++ti) bound[ti] = multiplier * inv[ti];
                bound[0] = multiplier * kappa_used;
            }

            double max_excess = -kInf;
            int argmax = 0;
            for (int ti = 0; ti < ens.n_times; ++ti) {
                const double e = emp[ti] - bound[ti];
                if (e > max_excess) {
                    max_excess = e;
                    argmax = ti;
                }
            }
            // Monte Carlo standard error of the coupling cost at the worst time
            double se = 0.0;
            {
                const int B = 8;
                std::vector<double> bmeans(B, 0.0);
                std::vector<int> bn(B, 0);
                for (int pp = 0; pp < ens.n_paths; ++pp) {
                    if (ens.flagged[pp]) continue;
                    const int b = pp % B;
                    bmeans[b] += std::pow(mod.f(ens.pair_distance(pp, argmax)), p);
                    bn[b]++;
                }
                double mean = 0;
                int nb = 0;
                for (int b = 0; b < B; ++b)
                    if (bn[b]) {
                        bmeans[b] /= bn[b];
                        mean += bmeans[b];
                        ++nb;
                    }
                mean /= std::max(nb, 1);
                double var = 0;
                for (int b = 0; b < nb; ++b) var += (bmeans[b] - mean) * (bmeans[b] - mean);
                var /= std::max(nb - 1, 1);
                const double se_mean = std::sqrt(var / std::max(nb, 1));
                se = mean > 0 ? se_mean / p * std::pow(mean, 1.0 / p - 1.0) : 0.0;
            }
            const double budget = 10.0 * c.dt * c.tolerance_scale + 2.0 * se;

            res.details["Gamma_used"] = Gamma_used;
            if (!cert_details.is_null()) res.details["certificate"] = cert_details;
            res.details["initial_distance"] = d0;
            res.details["chaining_multiplier"] = multiplier;
            res.details["kappa"] = kappa_used;
            res.details["max_excess"] = max_excess;
            res.details["excess_budget"] = budget;
            res.details["argmax_time"] = ens.times[argmax];
            res.details["eps_c"] = ens.eps_c;
            int coupled_count = 0;
            for (double ct : ens.coupling_times)
                if (std::isfinite(ct)) ++coupled_count;
            res.details["coupled_fraction"] = double(coupled_count) / ens.n_paths;
            res.details["flagged_paths"] = ens.n_flagged;
            res.passed = max_excess <= budget;

            // decay fit on the empirical curve (informational)
            try {
                const auto psi_fam = parse_scalar_family(c.psi_spec);
                if (psi_fam.name == "identity") {
                    const auto fit =
                        decay_fit(ens.times, emp, DecayModel::exponential);
                    res.details["fit"] = {{"model", "exponential"},
                                          {"Gamma", fit.params.at("Gamma")},
                                          {"residual", fit.residual}};
                } else {
                    PsiInverseSpec spec{mod, kappa_used};
                    const auto fit =
                        decay_fit(ens.times, emp, DecayModel::psi_inverse, &spec);
                    res.details["fit"] = {{"model", "psi_inverse"},
                                          {"Gamma", fit.params.at("Gamma")},
                                          {"residual", fit.residual}};
                }
            } catch (const std::exception& e) {
                res.warnings.push_back(std::string("decay fit skipped: ") + e.what());
            }

            if (detail::has_format(c, "csv"))
                write_decay_csv(c.out_dir + "/wass_pair_" + std::to_string(pi) + ".csv",
                                ens.times, emp, bound);
        } catch (const std::exception& e) {
            res.details["error"] = e.what();
        }
        rep.checks.push_back(res);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// simulate / subordinate commands
// ---------------------------------------------------------------------------

inline AnalysisReport run_simulate(const RunConfig& c) {
    AnalysisReport rep;
    rep.command = "simulate";
    rep.effective_config = c.effective();
    rep.config_hash = c.hash();
    rep.seed = c.seed;
    std::filesystem::create_directories(c.out_dir);
    CheckResult res{"simulate", false, json::object(), {}};
    try {
        const auto model = model_from_config(c);
        if (!model.jump.empty())
            throw std::invalid_argument(
                "simulate: state-dependent jump models are analysis-only; "
                "path simulation covers diffusion models");
        std::vector<Vec> starts;
        for (const auto& v : c.x0_list) starts.push_back(detail::to_vec(v));
        const int n_steps = int(std::llround(c.horizon / c.dt));
        SimOptions sopt;
        sopt.n_threads = c.n_threads;
        sopt.record_stride = detail::pick_record_stride(n_steps, 400);
        const auto ens =
            euler_maruyama(model, starts, c.horizon, c.dt, c.n_paths, c.seed, sopt);
        write_ensemble_binary(ens, c.out_dir + "/ensemble.bin");
        if (detail::has_format(c, "csv"))
            write_ensemble_summary_csv(ens, c.out_dir + "/ensemble_summary.csv");
        res.details["n_paths"] = ens.n_paths;
        res.details["n_times"] = ens.n_times;
        res.details["flagged_paths"] = ens.n_flagged;
        res.passed = ens.n_flagged == 0;
    } catch (const std::exception& e) {
        res.details["error"] = e.what();
    }
    rep.checks.push_back(res);
    return rep;
}

inline AnalysisReport run_subordinate(const RunConfig& c) {
    AnalysisReport rep;
    rep.command = "subordinate";
    rep.effective_config = c.effective();
    rep.config_hash = c.hash();
    rep.seed = c.seed;
    std::filesystem::create_directories(c.out_dir);
    CheckResult res{"subordinate", false, json::object(), {}};
    try {
        SubordinatorSpec spec;
        if (c.sub_family == "gamma")
            spec.family = SubordinatorSpec::Family::gamma;
        else if (c.sub_family == "drift_only")
            spec.family = SubordinatorSpec::Family::drift_only;
        else if (c.sub_family == "compound_poisson")
            spec.family = SubordinatorSpec::Family::compound_poisson;
        else
            throw std::invalid_argument("unknown subordinator family " + c.sub_family);
        spec.a = c.sub_a;
        spec.b = c.sub_b;
        spec.drift = c.sub_drift;
        spec.cp_rate = c.sub_cp_rate;

        SubordinatedRate sr;
        sr.base_rate = base_rate_from_spec(c.sub_base_rate);
        sr.spec = spec;
        sr.p = c.sub_p;
        sr.method = c.sub_method == "density_quadrature"
                        ? SubordinatedRate::Method::density_quadrature
                        : SubordinatedRate::Method::monte_carlo;
        sr.mc_n = c.sub_mc_n;
        sr.mc_seed = c.seed;

        json rows = json::array();
        bool ok = true;
        for (double t : c.sub_times) {
            const auto rv = subordinate_rate(sr, t);
            rows.push_back({{"t", t},
                            {"value", rv.value},
                            {"std_error", rv.std_error},
                            {"variance_warning", rv.variance_warning}});
            if (!std::isfinite(rv.value)) ok = false;
            if (rv.variance_warning)
                res.warnings.push_back("heavy-tail variance heuristic tripped at t=" +
                                       std::to_string(t));
        }
        res.details["family"] = spec.label();
        res.details["bernstein_at_1"] = spec.bernstein(1.0);
        res.details["rows"] = rows;
        if (detail::has_format(c, "csv"))
            write_subordinated_csv(sr, c.sub_times, c.out_dir + "/subordinated_rate.csv");
        res.passed = ok;
    } catch (const std::exception& e) {
        res.details["error"] = e.what();
    }
    rep.checks.push_back(res);
    return rep;
}

// ---------------------------------------------------------------------------
// report: consolidate prior run artifacts; exit contract is 0 iff every
// requested check passed and every artifact was present.
// ---------------------------------------------------------------------------

inline void write_report(const AnalysisReport& rep, const RunConfig& c) {
    std::filesystem::create_directories(c.out_dir);
    std::string base = c.out_dir + "/report_" + rep.command;
    for (auto& ch : base)
        if (ch == '-') ch = '_';
    if (detail::has_format(c, "json")) {
        std::ofstream os(base + ".json");
        os << rep.to_json().dump(2) << "\n";
    }
    if (detail::has_format(c, "text")) {
        std::ofstream os(base + ".txt");
        os << rep.to_text();
    }
}

inline AnalysisReport consolidate_report(const RunConfig& c) {
    AnalysisReport rep;
    rep.command = "report";
    rep.effective_config = c.effective();
    rep.config_hash = c.hash();
    rep.seed = c.seed;

    std::map<std::string, std::string> artifact_of = {
        {"tv_condition", "report_check_tv.json"},
        {"classical_subgeo", "report_check_tv.json"},
        {"lyapunov_verify", "report_check_tv.json"},
        {"hitting_bound", "report_check_tv.json"},
        {"wasserstein_contraction", "report_check_wass.json"},
        {"subordinate", "report_subordinate.json"}};

    std::set<std::string> needed;
    for (const auto& chk : c.checks) needed.insert(artifact_of.at(chk));
    std::vector<std::string> missing;
    std::map<std::string, json> loaded;
    for (const auto& file : needed) {
        const std::string path = c.out_dir + "/" + file;
        std::ifstream is(path);
        if (!is) {
            missing.push_back(path);
            continue;
        }
        is >> loaded[file];
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw std::runtime_error("report: missing artifacts: " + list);
    }
    for (const auto& chk : c.checks) {
        const auto& src = loaded.at(artifact_of.at(chk));
        bool found = false;
        for (const auto& item : src.at("checks")) {
            const std::string name = item.at("name").get<std::string>();
            if (name.rfind(chk, 0) == 0) {
                CheckResult r;
                r.name = name;
                r.passed = item.at("passed").get<bool>();
                r.details = item.at("details");
                for (const auto& w : item.at("warnings"))
                    r.warnings.push_back(w.get<std::string>());
                rep.checks.push_back(std::move(r));
                found = true;
            }
        }
        if (!found)
            rep.checks.push_back({chk, false,
                                  json{{"error", "no result for this check in artifacts"}},
                                  {}});
    }
    return rep;
}

}  // namespace subgeo
