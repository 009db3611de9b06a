#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/quadrature.hpp"
#include "subgeo/rate.hpp"
#include "subgeo/simulate.hpp"

namespace subgeo {

// Rate transform under a random time change: value(t) = (E[r^p(S_t)])^{1/p}
// where S is the subordinator. Rates are plain callables so curves produced
// elsewhere (tv_rate_at, gronwall_bound) compose directly.
struct SubordinatedRate {
    std::function<double(double)> base_rate;
    SubordinatorSpec spec;
    double p = 1.0;
    enum class Method { monte_carlo, density_quadrature } method = Method::monte_carlo;
    int mc_n = 100000;
    int mc_batches = 16;
    std::uint64_t mc_seed = 0;
};

struct RateValue {
    double value = 0;
    double std_error = 0;
    bool variance_warning = false;  // top-decile heuristic tripped
};

namespace detail {

inline RateValue subordinate_rate_mc(const SubordinatedRate& sr, double t) {
    const auto s = subordinator_sample(sr.spec, t, sr.mc_n, sr.mc_seed);
    std::vector<double> rp(s.size());
    for (size_t i = 0; i < s.size(); ++i) rp[i] = std::pow(sr.base_rate(s[i]), sr.p);

    const int B = std::max(2, sr.mc_batches);
    const size_t per = rp.size() / B;
    std::vector<double> bm(B, 0.0);
    for (int b = 0; b < B; ++b) {
        for (size_t i = b * per; i < (b + 1) * per; ++i) bm[b] += rp[i];
        bm[b] /= double(per);
    }
    double mean = 0;
    for (double v : bm) mean += v;
    mean /= B;
    double var = 0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= double(B - 1);
    const double se_mean = std::sqrt(var / B);

    RateValue out;
    out.value = std::pow(mean, 1.0 / sr.p);
    out.std_error = sr.p == 1.0
                        ? se_mean
                        : se_mean / sr.p * std::pow(std::max(mean, 1e-300), 1.0 / sr.p - 1.0);

    std::vector<double> sorted = rp;
    std::sort(sorted.begin(), sorted.end());
    double total = 0, top = 0;
    for (double v : sorted) total += v;
    for (size_t i = sorted.size() - sorted.size() / 10; i < sorted.size(); ++i)
        top += sorted[i];
    out.variance_warning = total > 0 && top > 0.9 * total;
    return out;
}

inline RateValue subordinate_rate_gamma_quadrature(const SubordinatedRate& sr, double t) {
    const double shape = sr.spec.a * t;
    const double rate = sr.spec.b;
    RateValue out;
    if (t == 0) {
        out.value = sr.base_rate(0.0);
        return out;
    }
    auto rp = [&](double s) { return std::pow(sr.base_rate(s), sr.p); };
    const double lognorm = shape * std::log(rate) - std::lgamma(shape);
    const double split = std::min(1.0, shape / rate);
    double mass = 0.0;
    if (shape >= 1.0) {
        mass += integrate(
            [&](double s) {
                return rp(s) * std::exp(lognorm + (shape - 1.0) * std::log(s) - rate * s);
            },
            0.0, split);
    } else {
        // substitute v = s^shape to flatten the endpoint singularity
        mass += integrate(
            [&](double v) {
                const double s = std::pow(v, 1.0 / shape);
                return rp(s) * std::exp(lognorm - rate * s) / shape;
            },
            0.0, std::pow(split, shape));
    }
    const auto tail = detail::integrate_to_infinity_until_stable(
        [&](double s) {
            return rp(s) * std::exp(lognorm + (shape - 1.0) * std::log(s) - rate * s);
        },
        split, std::max(2.0 * split, 2.0 * shape / rate + 2.0), QuadOptions{},
        detail::modulus_tail_options());
    mass += tail.value + tail.tail_bound;
    out.value = std::pow(mass, 1.0 / sr.p);
    return out;
}

}  // namespace detail

inline RateValue subordinate_rate(const SubordinatedRate& sr, double t) {
    if (!(t >= 0)) throw std::invalid_argument("subordinate_rate: t must be >= 0");
    if (!(sr.p >= 1)) throw std::invalid_argument("subordinate_rate: p must be >= 1");
    if (!sr.base_rate) throw std::invalid_argument("subordinate_rate: missing base rate");
    if (sr.method == SubordinatedRate::Method::density_quadrature) {
        if (sr.spec.family != SubordinatorSpec::Family::gamma)
            throw std::invalid_argument(
                "subordinate_rate: density quadrature supports the gamma family only");
        return detail::subordinate_rate_gamma_quadrature(sr, t);
    }
    return detail::subordinate_rate_mc(sr, t);
}

// CSV: t, value, std_error per requested time.
inline void write_subordinated_csv(const SubordinatedRate& sr,
                                   const std::vector<double>& times,
                                   const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "t,rate,std_error\n";
    os.precision(17);
    for (double t : times) {
        const auto rv = subordinate_rate(sr, t);
        os << t << ',' << rv.value << ',' << rv.std_error << '\n';
    }
}

}  // namespace subgeo
