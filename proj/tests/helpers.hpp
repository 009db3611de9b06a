#pragma once

// Test-only oracles, kept independent of the library's adaptive quadrature
// and inversion paths: fixed-step composite Simpson, a classical RK4 stepper
// for comparison ODEs, and normal-quantile reference samples.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

// Composite Simpson with a fixed even panel count.
template <class F>
double simpson(F&& f, double a, double b, int n) {
    if (n % 2 != 0) throw std::invalid_argument("simpson: n must be even");
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; i += 2) acc += 4.0 * f(a + i * h);
    for (int i = 2; i < n; i += 2) acc += 2.0 * f(a + i * h);
    return acc * h / 3.0;
}

// Richardson-stabilized Simpson: refine until the half-step answer moves by
// less than tol, then return the finer value.
template <class F>
double simpson_refined(F&& f, double a, double b, double tol = 1e-12,
                       int n0 = 64, int n_max = 1 << 22) {
    double coarse = simpson(f, a, b, n0);
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        const double fine = simpson(f, a, b, n);
        if (std::abs(fine - coarse) <= tol * std::max(1.0, std::abs(fine))) return fine;
        coarse = fine;
    }
    return coarse;
}

// Classical fourth-order Runge-Kutta for scalar autonomous ODEs y' = g(y).
inline std::vector<double> rk4(const std::function<double(double)>& g, double y0,
                               const std::vector<double>& times) {
    std::vector<double> out(times.size());
    out[0] = y0;
    double y = y0;
    for (size_t i = 1; i < times.size(); ++i) {
        const double span = times[i] - times[i - 1];
        const int substeps = std::max(1, int(std::ceil(span / 1e-4)));
        const double h = span / substeps;
        for (int s = 0; s < substeps; ++s) {
            const double k1 = g(y);
            const double k2 = g(y + 0.5 * h * k1);
            const double k3 = g(y + 0.5 * h * k2);
            const double k4 = g(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out[i] = y;
    }
    return out;
}

// Acklam's inverse normal CDF (reference-sample generation only).
inline double norm_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    if (!(p > 0 && p < 1)) throw std::invalid_argument("norm_quantile: p in (0,1)");
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 0.97575) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1 + 0.5 * x * u);
}

// Equally spaced quantile samples of N(mean, variance).
inline std::vector<double> gaussian_quantile_samples(int n, double mean, double variance) {
    std::vector<double> out(n);
    const double sd = std::sqrt(variance);
    for (int i = 0; i < n; ++i)
        out[i] = mean + sd * norm_quantile((i + 0.5) / double(n));
    return out;
}

inline std::mt19937_64 test_rng(std::uint64_t seed = 0xBEEF) { return std::mt19937_64(seed); }

}  // namespace oracle
