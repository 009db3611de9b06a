#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/detail/parallel.hpp"

namespace subgeo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Thrown when an integrand returns NaN/Inf; carries the offending abscissa.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double abscissa)
        : std::runtime_error(what + " at x = " + std::to_string(abscissa)),
          abscissa_(abscissa) {}
    double abscissa() const { return abscissa_; }

private:
    double abscissa_;
};

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_intervals = 4000;
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (positive half; symmetric).
inline constexpr std::array<double, 8> kK15Nodes = {
    0.000000000000000000, 0.207784955007898468, 0.405845151377397167,
    0.586087235467691130, 0.741531185599394440, 0.864864423359769073,
    0.949107912342758525, 0.991455371120812639};
inline constexpr std::array<double, 8> kK15Weights = {
    0.209482141084727828, 0.204432940075298892, 0.190350578064785410,
    0.169004726639267903, 0.140653259715525919, 0.104790010322250184,
    0.063092092629978553, 0.022935322010529225};
// Gauss-7 weights aligned with kK15Nodes indices 0,2,4,6.
inline constexpr std::array<double, 4> kG7Weights = {
    0.417959183673469388, 0.381830050505118945, 0.279705391489276668,
    0.129484966168869693};

template <class F>
inline void gk15(F&& f, double a, double b, double& value, double& err) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fc = f(mid);
    if (!std::isfinite(fc)) throw QuadratureError("non-finite integrand sample", mid);
    double k15 = kK15Weights[0] * fc;
    double g7 = kG7Weights[0] * fc;
    for (int i = 1; i < 8; ++i) {
        const double dx = half * kK15Nodes[i];
        const double xm = mid - dx, xp = mid + dx;
        const double fm = f(xm);
        if (!std::isfinite(fm)) throw QuadratureError("non-finite integrand sample", xm);
        const double fp = f(xp);
        if (!std::isfinite(fp)) throw QuadratureError("non-finite integrand sample", xp);
        k15 += kK15Weights[i] * (fm + fp);
        if (i % 2 == 0) g7 += kG7Weights[i / 2] * (fm + fp);
    }
    value = half * k15;
    const double diff = half * std::abs(k15 - g7);
    // quadpack-style sharpened error estimate
    err = diff * std::min(1.0, std::pow(200.0 * diff / std::max(std::abs(value), 1e-300), 1.5));
    if (!std::isfinite(err)) err = diff;
}

struct Interval {
    double a, b, value, err;
    bool operator<(const Interval& o) const { return err < o.err; }
};

}  // namespace detail

// Adaptive Gauss-Kronrod integration of f over [a, b]. Worst-error interval is
// bisected until the summed error estimate meets abs/rel tolerance.
template <class F>
double integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    if (a == b) return 0.0;
    if (!(a < b)) throw std::invalid_argument("integrate: requires a < b");
    std::priority_queue<detail::Interval> heap;
    double value, err;
    detail::gk15(f, a, b, value, err);
    heap.push({a, b, value, err});
    double total = value, total_err = err;
    int n = 1;
    while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) &&
           n < opt.max_intervals) {
        detail::Interval worst = heap.top();
        heap.pop();
        total -= worst.value;
        total_err -= worst.err;
        const double m = 0.5 * (worst.a + worst.b);
        if (m <= worst.a || m >= worst.b) {  // interval exhausted at double precision
            total += worst.value;
            total_err += worst.err;
            heap.push(worst);
            break;
        }
        double v1, e1, v2, e2;
        detail::gk15(f, worst.a, m, v1, e1);
        detail::gk15(f, m, worst.b, v2, e2);
        heap.push({worst.a, m, v1, e1});
        heap.push({m, worst.b, v2, e2});
        total += v1 + v2;
        total_err += e1 + e2;
        ++n;
    }
    return total;
}

// Verdict for an improper integral over [a, inf).
struct TailVerdict {
    double value = 0;           // integral up to truncation_radius
    double tail_bound = 0;      // estimated remainder past truncation_radius
    bool finite = false;
    double decay_exponent = 0;  // fitted log-log slope over the last decade
    double last_rel_change = 0; // relative change of the final doubling
    double truncation_radius = 0;
    std::vector<std::pair<double, double>> segments;  // (upper limit, cumulative)
};

struct TailOptions {
    int doublings = 3;
    double rel_change_tol = 1e-8;   // all doublings must move the value less than this
    double slope_threshold = -1.1;  // fitted decay exponent must be below this
    double tail_tol = 1e-6;         // finite additionally requires tail_bound < tail_tol
    int fit_points = 17;
};

// Integrates a non-negative integrand from `a`, doubling the upper limit from
// `u0`; declares the integral finite when successive doublings stop moving the
// value and the fitted local decay exponent is steep enough. The remainder is
// estimated from the fitted power law at the final truncation radius.
template <class F>
TailVerdict integrate_to_infinity(F&& f, double a, double u0,
                                  const QuadOptions& qopt = {},
                                  const TailOptions& topt = {}) {
    if (!(u0 > a)) throw std::invalid_argument("integrate_to_infinity: u0 must exceed a");
    TailVerdict v;
    double upper = u0;
    double cum = integrate(f, a, upper, qopt);
    v.segments.emplace_back(upper, cum);
    bool stable = true;
    for (int k = 0; k < topt.doublings; ++k) {
        const double next = 2.0 * upper;
        const double inc = integrate(f, upper, next, qopt);
        upper = next;
        cum += inc;
        v.segments.emplace_back(upper, cum);
        v.last_rel_change = std::abs(inc) / std::max(1.0, std::abs(cum));
        if (v.last_rel_change >= topt.rel_change_tol) stable = false;
    }
    v.value = cum;
    v.truncation_radius = upper;

    // log-log slope over the last decade before the first doubling point
    const double lo = u0 / 10.0 > a ? u0 / 10.0 : 0.5 * (a + u0);
    std::vector<double> lx, ly;
    for (int i = 0; i < topt.fit_points; ++i) {
        const double u = lo * std::pow(u0 / lo, double(i) / (topt.fit_points - 1));
        const double fu = f(u);
        if (std::isfinite(fu) && fu > 0) {
            lx.push_back(std::log(u));
            ly.push_back(std::log(fu));
        }
    }
    bool tail_is_zero = lx.size() < 3;  // integrand underflowed along the decade
    double slope = -kInf;
    if (!tail_is_zero) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = double(lx.size());
        for (size_t i = 0; i < lx.size(); ++i) {
            sx += lx[i];
            sy += ly[i];
            sxx += lx[i] * lx[i];
            sxy += lx[i] * ly[i];
        }
        slope = (m * sxy - sx * sy) / std::max(m * sxx - sx * sx, 1e-300);
    }
    v.decay_exponent = slope;

    const double f_end = f(upper);
    if (tail_is_zero || f_end <= 0) {
        v.tail_bound = 0.0;
    } else if (slope < -1.0) {
        v.tail_bound = f_end * upper / (-slope - 1.0);
    } else {
        v.tail_bound = kInf;
    }
    v.finite = stable && (tail_is_zero || slope <= topt.slope_threshold) &&
               v.tail_bound < topt.tail_tol;
    return v;
}

// Root of g(x) = target for monotone g on [lo, hi]: bisection to relative
// width 1e-12, then two Newton polish steps when a derivative is supplied.
template <class G>
double invert_monotone(G&& g, double target, double lo, double hi,
                       const std::function<double(double)>& deriv = nullptr,
                       double width_tol = 1e-12) {
    double glo = g(lo), ghi = g(hi);
    if (!std::isfinite(glo) || !std::isfinite(ghi))
        throw std::runtime_error("invert_monotone: non-finite bracket values");
    const bool increasing = ghi >= glo;
    auto below = [&](double gv) { return increasing ? gv < target : gv > target; };
    if (below(ghi) || !below(glo)) {
        if (glo == target) return lo;
        if (ghi == target) return hi;
        if (!below(glo)) return lo;  // target at or before lo
        throw std::domain_error("invert_monotone: target outside bracket");
    }
    while (hi - lo > width_tol * std::max(1.0, std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (below(g(mid)))
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    if (deriv) {
        for (int i = 0; i < 2; ++i) {
            const double d = deriv(x);
            if (!std::isfinite(d) || d == 0.0) break;
            const double step = (g(x) - target) / d;
            const double xn = x - step;
            if (xn >= lo && xn <= hi) x = xn;
        }
    }
    return x;
}

namespace detail {

// Piecewise cumulative integral: values[k] = int_{nodes[0]}^{nodes[k]} density.
// Evaluation at arbitrary r adds an adaptive partial-segment integral; no state
// is mutated after build, so instances are safe to share across threads.
// Segment integrals are independent, so the build parallelizes over segments
// with a thread-count-independent result. A tolerant build records NaN for
// segments whose integrand turns non-finite instead of throwing (degenerate
// regions are reported by the caller, not fatal at table construction).
struct Cumulative {
    std::vector<double> nodes;
    std::vector<double> values;
    std::vector<double> increments;  // raw per-segment integrals (increments[0] = 0)
    std::function<double(double)> density;
    QuadOptions quad;
    bool tolerate_nonfinite = false;

    static Cumulative build(std::function<double(double)> density,
                            std::vector<double> nodes, const QuadOptions& q = {},
                            int n_threads = 1, bool tolerate_nonfinite = false);

    double front() const { return nodes.front(); }
    double back() const { return nodes.back(); }

    double at(double r) const {
        if (r <= nodes.front()) return 0.0;
        if (r >= nodes.back())
            return r == nodes.back()
                       ? values.back()
                       : values.back() + piece(nodes.back(), r);
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
        const size_t j = size_t(it - nodes.begin()) - 1;
        if (r == nodes[j]) return values[j];
        return values[j] + piece(nodes[j], r);
    }

private:
    double piece(double a, double b) const {
        if (!tolerate_nonfinite) return integrate(density, a, b, quad);
        try {
            return integrate(density, a, b, quad);
        } catch (const QuadratureError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    }
};

inline Cumulative Cumulative::build(std::function<double(double)> density,
                                    std::vector<double> nodes, const QuadOptions& q,
                                    int n_threads, bool tolerate_nonfinite) {
    Cumulative c;
    c.density = std::move(density);
    c.nodes = std::move(nodes);
    c.quad = q;
    c.tolerate_nonfinite = tolerate_nonfinite;
    c.values.assign(c.nodes.size(), 0.0);
    c.increments.assign(c.nodes.size(), 0.0);
    parallel_for(c.nodes.size() - 1, n_threads, [&](std::size_t k) {
        c.increments[k + 1] = c.piece(c.nodes[k], c.nodes[k + 1]);
    });
    for (std::size_t k = 1; k < c.nodes.size(); ++k)
        c.values[k] = c.values[k - 1] + c.increments[k];
    return c;
}

inline double logsumexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Log-space cumulative of exp(g): ln_at(r) = ln int_{nodes[0]}^{r} e^{g(v)} dv,
// usable when the integrand spans far beyond double range. Each segment is
// integrated with the local maximum of g factored out.
struct LogCumulative {
    std::vector<double> nodes;
    std::vector<double> ln_values;  // ln_values[0] = -inf
    std::function<double(double)> g;
    QuadOptions quad;

    static LogCumulative build(std::function<double(double)> g,
                               std::vector<double> nodes, const QuadOptions& q = {},
                               int n_threads = 1) {
        LogCumulative c;
        c.g = std::move(g);
        c.nodes = std::move(nodes);
        c.quad = q;
        c.ln_values.assign(c.nodes.size(), -kInf);
        std::vector<double> ln_inc(c.nodes.size(), -kInf);
        parallel_for(c.nodes.size() - 1, n_threads, [&](std::size_t k) {
            ln_inc[k + 1] = c.ln_piece(c.nodes[k], c.nodes[k + 1]);
        });
        for (std::size_t k = 1; k < c.nodes.size(); ++k)
            c.ln_values[k] = logsumexp(c.ln_values[k - 1], ln_inc[k]);
        return c;
    }

    double ln_at(double r) const {
        if (r <= nodes.front()) return -kInf;
        if (r >= nodes.back())
            return r == nodes.back()
                       ? ln_values.back()
                       : logsumexp(ln_values.back(), ln_piece(nodes.back(), r));
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
        const std::size_t j = std::size_t(it - nodes.begin()) - 1;
        if (r == nodes[j]) return ln_values[j];
        return logsumexp(ln_values[j], ln_piece(nodes[j], r));
    }

    double ln_piece(double a, double b) const {
        // pure relative tolerance: after the shift the mass may concentrate in
        // an exponentially thin sliver that an absolute floor would hide
        QuadOptions q = quad;
        q.abs_tol = 0.0;
        q.rel_tol = std::min(quad.rel_tol, 1e-10);
        // shrink toward the dominant exponent until the sampled spread is a
        // few hundred log units (the discarded remainder is then beyond
        // double-range smaller); only then hand the window to the quadrature
        double aa = a, bb = b;
        std::array<double, 5> gs{};
        for (int iter = 0; iter < 400; ++iter) {
            double s = -kInf;
            for (int i = 0; i < 5; ++i) {
                gs[i] = g(aa + 0.25 * i * (bb - aa));
                s = std::max(s, gs[i]);
            }
            if (s == -kInf) return -kInf;
            if (s - std::min(gs[0], gs[4]) <= 600.0) {
                const double val = integrate(
                    [&](double v) { return std::exp(std::min(g(v) - s, 690.0)); }, aa,
                    bb, q);
                return val > 0 ? s + std::log(val) : -kInf;
            }
            const double mid = 0.5 * (aa + bb);
            if (!(mid > aa && mid < bb)) return s;
            const double left_max = std::max({gs[0], gs[1], gs[2]});
            const double right_max = std::max({gs[2], gs[3], gs[4]});
            if (right_max >= left_max)
                aa = mid;
            else
                bb = mid;
        }
        return -kInf;
    }
};

// Right tail of a non-negative integrand: T(nodes[k]) = sum of the remaining
// segment increments plus an extrapolated remainder past the last node.
// Accumulating right-to-left keeps the tail relatively accurate where the
// forward difference total - cumulative would cancel catastrophically.
struct TailCumulative {
    std::vector<double> nodes;
    std::vector<double> values;  // values[k] = T(nodes[k])
    std::function<double(double)> density;
    QuadOptions quad;
    double remainder = 0;  // contribution past nodes.back()

    static TailCumulative from(const Cumulative& cum, double remainder_past_end) {
        TailCumulative t;
        t.nodes = cum.nodes;
        t.density = cum.density;
        t.quad = cum.quad;
        t.remainder = remainder_past_end;
        t.values.assign(t.nodes.size(), remainder_past_end);
        for (std::size_t k = t.nodes.size() - 1; k > 0; --k)
            t.values[k - 1] = t.values[k] + cum.increments[k];
        return t;
    }

    double at(double r) const {
        if (r <= nodes.front()) return values.front();
        if (r >= nodes.back())
            return r == nodes.back()
                       ? values.back()
                       : std::max(values.back() - integrate(density, nodes.back(), r, quad),
                                  0.0);
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
        const std::size_t j = std::size_t(it - nodes.begin()) - 1;
        if (r == nodes[j]) return values[j];
        return values[j + 1] + integrate(density, r, nodes[j + 1], quad);
    }
};

}  // namespace detail

// Evenly spaced grid helpers used throughout.
inline std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw std::invalid_argument("linspace: need at least 2 points");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = a + (b - a) * double(i) / (n - 1);
    g.back() = b;
    return g;
}

inline std::vector<double> logspace(double a, double b, int n) {
    if (!(a > 0 && b > a)) throw std::invalid_argument("logspace: need 0 < a < b");
    if (n < 2) throw std::invalid_argument("logspace: need at least 2 points");
    std::vector<double> g(n);
    const double la = std::log(a), lb = std::log(b);
    for (int i = 0; i < n; ++i) g[i] = std::exp(la + (lb - la) * double(i) / (n - 1));
    g.front() = a;
    g.back() = b;
    return g;
}

}  // namespace subgeo
