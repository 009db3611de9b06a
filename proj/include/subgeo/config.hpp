#pragma once

#include <dlfcn.h>

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "subgeo/model.hpp"
#include "subgeo/rate.hpp"

namespace subgeo {

using nlohmann::json;

// C ABI for user-supplied coefficient plugins, loaded with dlopen by symbol
// name. The factory returns a struct that must stay alive for the process.
extern "C" {
struct subgeo_model_v1 {
    int dim;
    int sigma_constant;
    void (*drift)(const double* x, double* out, void* ctx);
    void (*diffusion)(const double* x, double* out_row_major, void* ctx);  // dim x dim
    void* ctx;
};
typedef subgeo_model_v1* (*subgeo_model_factory_v1)();
}

namespace detail {

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
    if (obj.contains(key)) return obj.at(key).get<T>();
    return fallback;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

struct RunConfig {
    // model
    std::string model_family = "ou";
    int dim = 1;
    std::map<std::string, double> model_params;
    std::string plugin_library, plugin_symbol;

    // analysis
    std::vector<std::string> checks = {"tv_condition"};
    std::string rate_spec = "power(0.5)";
    std::string f_spec = "identity";
    std::string psi_spec = "power(2)";
    double gamma_threshold = 4.0;
    double contraction_const = 0.5;
    bool certify_contraction_flag = true;
    double certify_box = 5.0;
    int certify_grid = 200;
    double wasserstein_p = 2.0;
    std::vector<std::vector<double>> x0_list = {{0.0}};
    std::vector<double> r0_list = {1.0};
    double r1_factor = 1.5;
    double classical_alpha = 0.5;
    double classical_gamma_exp = 2.0;
    double classical_Gamma = 0.1;
    double classical_r0 = 1.0;
    double classical_probe_radius = 60.0;
    int classical_n_radii = 20000;
    std::vector<std::vector<std::vector<double>>> pairs = {{{1.0}, {-1.0}}};
    double hitting_r0 = 1.0;
    double hitting_epsilon_factor = 0.1;
    std::vector<std::vector<double>> hitting_points = {{2.0}};
    std::string sub_family = "gamma";
    double sub_a = 1.0, sub_b = 1.0, sub_drift = 0.0, sub_cp_rate = 0.0;
    double sub_p = 1.0;
    std::string sub_base_rate = "exp(1)";
    std::string sub_method = "monte_carlo";
    std::vector<double> sub_times = {0.5, 1.0, 2.0};
    int sub_mc_n = 100000;

    // numeric
    double grid_r_max = 50.0;
    int grid_n = 256;
    std::string grid_spacing = "linear";
    int sphere_samples = 512;
    double tolerance = 1e-6;
    double tolerance_scale = 1.0;
    double dt = 1e-3;
    int n_paths = 1000;
    double horizon = 20.0;
    std::uint64_t seed = 12345;
    int n_threads = 2;

    // output
    std::string out_dir = "out";
    std::vector<std::string> formats = {"json", "text", "csv"};

    static RunConfig parse(const json& root);
    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("config: cannot open " + path);
        json root;
        is >> root;
        return parse(root);
    }

    json effective() const;
    std::uint64_t hash() const { return detail::fnv1a(effective().dump()); }
};

inline RunConfig RunConfig::parse(const json& root) {
    using detail::get_or;
    using detail::require_keys;
    require_keys(root, {"schema_version", "model", "analysis", "numeric", "output"}, "root");
    if (!root.contains("schema_version") || root.at("schema_version").get<int>() != 1)
        throw std::invalid_argument("config: schema_version 1 required");

    RunConfig c;
    if (root.contains("model")) {
        const auto& m = root.at("model");
        require_keys(m, {"family", "dim", "params", "plugin"}, "model");
        c.model_family = get_or<std::string>(m, "family", c.model_family);
        c.dim = get_or<int>(m, "dim", c.dim);
        if (m.contains("params")) {
            for (const auto& [k, v] : m.at("params").items())
                c.model_params[k] = v.get<double>();
        }
        if (m.contains("plugin")) {
            require_keys(m.at("plugin"), {"library", "symbol"}, "model.plugin");
            c.plugin_library = get_or<std::string>(m.at("plugin"), "library", "");
            c.plugin_symbol = get_or<std::string>(m.at("plugin"), "symbol", "");
            c.model_family = "plugin";
        }
    }
    if (root.contains("analysis")) {
        const auto& a = root.at("analysis");
        require_keys(a,
                     {"checks", "rate", "modulus", "x0_list", "r0_list", "r1_factor",
                      "classical", "pairs", "hitting", "subordinate", "wasserstein_p"},
                     "analysis");
        if (a.contains("checks")) c.checks = a.at("checks").get<std::vector<std::string>>();
        const std::set<std::string> known = {"tv_condition",    "classical_subgeo",
                                             "wasserstein_contraction", "lyapunov_verify",
                                             "hitting_bound",   "subordinate"};
        for (const auto& ch : c.checks)
            if (!known.count(ch))
                throw std::invalid_argument("config: unknown check '" + ch + "'");
        if (a.contains("rate")) c.rate_spec = a.at("rate").get<std::string>();
        if (a.contains("modulus")) {
            const auto& mo = a.at("modulus");
            require_keys(mo,
                         {"f", "psi", "gamma_threshold", "contraction_const", "certify",
                          "certify_box", "certify_grid"},
                         "analysis.modulus");
            c.f_spec = get_or<std::string>(mo, "f", c.f_spec);
            c.psi_spec = get_or<std::string>(mo, "psi", c.psi_spec);
            c.gamma_threshold = get_or<double>(mo, "gamma_threshold", c.gamma_threshold);
            c.contraction_const = get_or<double>(mo, "contraction_const", c.contraction_const);
            c.certify_contraction_flag = get_or<bool>(mo, "certify", c.certify_contraction_flag);
            c.certify_box = get_or<double>(mo, "certify_box", c.certify_box);
            c.certify_grid = get_or<int>(mo, "certify_grid", c.certify_grid);
        }
        c.wasserstein_p = get_or<double>(a, "wasserstein_p", c.wasserstein_p);
        if (a.contains("x0_list"))
            c.x0_list = a.at("x0_list").get<std::vector<std::vector<double>>>();
        if (a.contains("r0_list")) c.r0_list = a.at("r0_list").get<std::vector<double>>();
        c.r1_factor = get_or<double>(a, "r1_factor", c.r1_factor);
        if (a.contains("classical")) {
            const auto& cl = a.at("classical");
            require_keys(cl, {"alpha", "gamma_exp", "Gamma_c", "r0", "probe_radius", "n_radii"},
                         "analysis.classical");
            c.classical_alpha = get_or<double>(cl, "alpha", c.classical_alpha);
            c.classical_gamma_exp = get_or<double>(cl, "gamma_exp", c.classical_gamma_exp);
            c.classical_Gamma = get_or<double>(cl, "Gamma_c", c.classical_Gamma);
            c.classical_r0 = get_or<double>(cl, "r0", c.classical_r0);
            c.classical_probe_radius =
                get_or<double>(cl, "probe_radius", c.classical_probe_radius);
            c.classical_n_radii = get_or<int>(cl, "n_radii", c.classical_n_radii);
        }
        if (a.contains("pairs"))
            c.pairs = a.at("pairs").get<std::vector<std::vector<std::vector<double>>>>();
        if (a.contains("hitting")) {
            const auto& h = a.at("hitting");
            require_keys(h, {"r0_ball", "points", "epsilon_factor"}, "analysis.hitting");
            c.hitting_r0 = get_or<double>(h, "r0_ball", c.hitting_r0);
            c.hitting_epsilon_factor =
                get_or<double>(h, "epsilon_factor", c.hitting_epsilon_factor);
            if (h.contains("points"))
                c.hitting_points = h.at("points").get<std::vector<std::vector<double>>>();
        }
        if (a.contains("subordinate")) {
            const auto& s = a.at("subordinate");
            require_keys(s,
                         {"family", "a", "b", "drift", "cp_rate", "p", "base_rate", "method",
                          "times", "mc_n"},
                         "analysis.subordinate");
            c.sub_family = get_or<std::string>(s, "family", c.sub_family);
            c.sub_a = get_or<double>(s, "a", c.sub_a);
            c.sub_b = get_or<double>(s, "b", c.sub_b);
            c.sub_drift = get_or<double>(s, "drift", c.sub_drift);
            c.sub_cp_rate = get_or<double>(s, "cp_rate", c.sub_cp_rate);
            c.sub_p = get_or<double>(s, "p", c.sub_p);
            c.sub_base_rate = get_or<std::string>(s, "base_rate", c.sub_base_rate);
            c.sub_method = get_or<std::string>(s, "method", c.sub_method);
            if (s.contains("times")) c.sub_times = s.at("times").get<std::vector<double>>();
            c.sub_mc_n = get_or<int>(s, "mc_n", c.sub_mc_n);
        }
    }
    if (root.contains("numeric")) {
        const auto& n = root.at("numeric");
        require_keys(n,
                     {"grid_r_max", "grid_n", "grid_spacing", "sphere_samples", "tolerance",
                      "tolerance_scale", "dt", "n_paths", "horizon", "seed", "n_threads"},
                     "numeric");
        c.grid_r_max = get_or<double>(n, "grid_r_max", c.grid_r_max);
        c.grid_n = get_or<int>(n, "grid_n", c.grid_n);
        c.grid_spacing = get_or<std::string>(n, "grid_spacing", c.grid_spacing);
        c.sphere_samples = get_or<int>(n, "sphere_samples", c.sphere_samples);
        c.tolerance = get_or<double>(n, "tolerance", c.tolerance);
        c.tolerance_scale = get_or<double>(n, "tolerance_scale", c.tolerance_scale);
        c.dt = get_or<double>(n, "dt", c.dt);
        c.n_paths = get_or<int>(n, "n_paths", c.n_paths);
        c.horizon = get_or<double>(n, "horizon", c.horizon);
        c.seed = get_or<std::uint64_t>(n, "seed", c.seed);
        c.n_threads = get_or<int>(n, "n_threads", c.n_threads);
    }
    if (root.contains("output")) {
        const auto& o = root.at("output");
        require_keys(o, {"directory", "formats"}, "output");
        c.out_dir = get_or<std::string>(o, "directory", c.out_dir);
        if (o.contains("formats"))
            c.formats = o.at("formats").get<std::vector<std::string>>();
    }
    return c;
}

inline json RunConfig::effective() const {
    json root;
    root["schema_version"] = 1;
    json m;
    m["family"] = model_family;
    m["dim"] = dim;
    m["params"] = json::object();
    for (const auto& [k, v] : model_params) m["params"][k] = v;
    if (!plugin_library.empty())
        m["plugin"] = {{"library", plugin_library}, {"symbol", plugin_symbol}};
    root["model"] = m;

    json a;
    a["checks"] = checks;
    a["rate"] = rate_spec;
    a["modulus"] = {{"f", f_spec},
                    {"psi", psi_spec},
                    {"gamma_threshold", gamma_threshold},
                    {"contraction_const", contraction_const},
                    {"certify", certify_contraction_flag},
                    {"certify_box", certify_box},
                    {"certify_grid", certify_grid}};
    a["wasserstein_p"] = wasserstein_p;
    a["x0_list"] = x0_list;
    a["r0_list"] = r0_list;
    a["r1_factor"] = r1_factor;
    a["classical"] = {{"alpha", classical_alpha},
                      {"gamma_exp", classical_gamma_exp},
                      {"Gamma_c", classical_Gamma},
                      {"r0", classical_r0},
                      {"probe_radius", classical_probe_radius},
                      {"n_radii", classical_n_radii}};
    a["pairs"] = pairs;
    a["hitting"] = {{"r0_ball", hitting_r0},
                    {"points", hitting_points},
                    {"epsilon_factor", hitting_epsilon_factor}};
    a["subordinate"] = {{"family", sub_family}, {"a", sub_a},
                        {"b", sub_b},           {"drift", sub_drift},
                        {"cp_rate", sub_cp_rate}, {"p", sub_p},
                        {"base_rate", sub_base_rate}, {"method", sub_method},
                        {"times", sub_times},   {"mc_n", sub_mc_n}};
    root["analysis"] = a;

    root["numeric"] = {{"grid_r_max", grid_r_max},
                       {"grid_n", grid_n},
                       {"grid_spacing", grid_spacing},
                       {"sphere_samples", sphere_samples},
                       {"tolerance", tolerance},
                       {"tolerance_scale", tolerance_scale},
                       {"dt", dt},
                       {"n_paths", n_paths},
                       {"horizon", horizon},
                       {"seed", seed},
                       {"n_threads", n_threads}};
    root["output"] = {{"directory", out_dir}, {"formats", formats}};
    return root;
}

// ---------------------------------------------------------------------------
// Model construction from config (built-in families or dlopen plugin).
// ---------------------------------------------------------------------------

inline CoefficientModel load_plugin_model(const std::string& library,
                                          const std::string& symbol) {
    void* handle = dlopen(library.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle)
        throw std::runtime_error("plugin: cannot load " + library + ": " + dlerror());
    auto factory =
        reinterpret_cast<subgeo_model_factory_v1>(dlsym(handle, symbol.c_str()));
    if (!factory)
        throw std::runtime_error("plugin: symbol '" + symbol + "' not found in " + library);
    subgeo_model_v1* pm = factory();
    if (!pm || pm->dim < 1 || !pm->drift || !pm->diffusion)
        throw std::runtime_error("plugin: factory returned an invalid model");
    CoefficientModel m;
    m.dim = pm->dim;
    m.sigma_constant = pm->sigma_constant != 0;
    m.family = "plugin:" + symbol;
    m.drift = [pm](const Vec& x) {
        Vec out(pm->dim);
        pm->drift(x.data(), out.data(), pm->ctx);
        return out;
    };
    m.diffusion = [pm](const Vec& x) {
        Mat out(pm->dim, pm->dim);
        std::vector<double> buf(size_t(pm->dim) * pm->dim);
        pm->diffusion(x.data(), buf.data(), pm->ctx);
        for (int i = 0; i < pm->dim; ++i)
            for (int j = 0; j < pm->dim; ++j) out(i, j) = buf[size_t(i) * pm->dim + j];
        return out;
    };
    return m;
}

inline CoefficientModel model_from_config(const RunConfig& c) {
    auto param = [&](const std::string& k, double fallback) {
        const auto it = c.model_params.find(k);
        return it == c.model_params.end() ? fallback : it->second;
    };
    if (c.model_family == "ou")
        return make_ou_model(c.dim, param("theta", 1.0), param("sigma", 1.0));
    if (c.model_family == "brownian") return make_brownian_model(c.dim, param("sigma", 1.0));
    if (c.model_family == "power_drift")
        return make_power_drift_model(c.dim, param("p", 2.0), param("sigma", 1.0));
    if (c.model_family == "cosine_drift")
        return make_cosine_drift_model(param("rho", 1.0), param("sigma", 1.0));
    if (c.model_family == "example_e3") return make_example_e3_model();
    if (c.model_family == "plugin")
        return load_plugin_model(c.plugin_library, c.plugin_symbol);
    throw std::invalid_argument("config: unknown model family '" + c.model_family + "'");
}

// Base-rate curves for the subordination command: "exp(lambda)" falls as
// e^{-lambda t}, "power(q)" as (1+t)^{-q}, "tv_rate(alpha)" is the increasing
// ergodicity rate curve of the power rate family.
inline std::function<double(double)> base_rate_from_spec(const std::string& spec) {
    const auto fam = parse_scalar_family(spec);
    if (fam.name == "exp") {
        const double lam = fam.has_param ? fam.param : 1.0;
        return [lam](double t) { return std::exp(-lam * t); };
    }
    if (fam.name == "power") {
        const double q = fam.has_param ? fam.param : 1.0;
        return [q](double t) { return std::pow(1.0 + t, -q); };
    }
    if (fam.name == "tv_rate") {
        const double alpha = fam.has_param ? fam.param : 0.5;
        const RateFunction r = rate_power(alpha);
        return [r](double t) { return tv_rate_at(r, t); };
    }
    throw std::invalid_argument("config: unknown base rate '" + spec + "'");
}

}  // namespace subgeo
