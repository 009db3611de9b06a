#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/quadrature.hpp"
#include "subgeo/rng.hpp"

namespace subgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// State-dependent jump activity. Analysis needs only two integrals of the
// kernel over the unit ball: the compensator and the second-moment matrix;
// generic multi-dimensional measure quadrature is deliberately not attempted.
struct JumpKernel {
    enum class Kind { none, levy_translation_invariant, state_dependent };
    Kind kind = Kind::none;
    std::function<Vec(const Vec&)> compensator_integral;  // x -> int_{B1} y nu(x,dy)
    std::function<Mat(const Vec&)> second_moment;         // x -> [int_{B1} yi yj nu(x,dy)]
    // Mass escaping the ball B_{|x|}(-x); must vanish for |x| >= bounded_jump_radius
    // (inward bounded jumps). Built-ins supply exact values.
    std::function<double(const Vec&)> escape_mass;
    double bounded_jump_radius = std::numeric_limits<double>::quiet_NaN();
    std::string description;

    bool empty() const { return kind == Kind::none; }
};

struct CoefficientModel {
    int dim = 1;
    std::function<Vec(const Vec&)> drift;      // b(x)
    std::function<Mat(const Vec&)> diffusion;  // sigma(x), d x n
    JumpKernel jump;
    bool sigma_constant = false;
    bool drift_locally_bounded = true;
    std::string family;
    std::map<std::string, double> params;

    Mat covariance(const Vec& x) const {  // c(x) = sigma sigma^T
        const Mat s = diffusion(x);
        return s * s.transpose();
    }
};

// ---------------------------------------------------------------------------
// Built-in coefficient families
// ---------------------------------------------------------------------------

inline CoefficientModel make_ou_model(int dim = 1, double theta = 1.0,
                                      double sigma = 1.0) {
    CoefficientModel m;
    m.dim = dim;
    m.drift = [theta](const Vec& x) { return Vec(-theta * x); };
    m.diffusion = [dim, sigma](const Vec&) {
        return Mat(sigma * Mat::Identity(dim, dim));
    };
    m.sigma_constant = true;
    m.family = "ou";
    m.params = {{"theta", theta}, {"sigma", sigma}};
    return m;
}

inline CoefficientModel make_brownian_model(int dim = 1, double sigma = 1.0) {
    CoefficientModel m;
    m.dim = dim;
    m.drift = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
    m.diffusion = [dim, sigma](const Vec&) {
        return Mat(sigma * Mat::Identity(dim, dim));
    };
    m.sigma_constant = true;
    m.family = "brownian";
    m.params = {{"sigma", sigma}};
    return m;
}

// b_i(x) = -sgn(x_i) |x_i|^p with constant diffusion.
inline CoefficientModel make_power_drift_model(int dim, double p, double sigma = 1.0) {
    if (!(p > 0)) throw std::invalid_argument("power_drift: exponent must be positive");
    CoefficientModel m;
    m.dim = dim;
    m.drift = [p](const Vec& x) {
        Vec b(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            b[i] = -sgn(x[i]) * std::pow(std::abs(x[i]), p);
        return b;
    };
    m.diffusion = [dim, sigma](const Vec&) {
        return Mat(sigma * Mat::Identity(dim, dim));
    };
    m.sigma_constant = true;
    m.family = "power_drift";
    m.params = {{"p", p}, {"sigma", sigma}};
    return m;
}

// d = 1, b(x) = -sgn(x)(cos x + rho): the inward push vanishes periodically,
// so classical polynomial-drift conditions fail while the integral test holds.
inline CoefficientModel make_cosine_drift_model(double rho = 1.0, double sigma = 1.0) {
    CoefficientModel m;
    m.dim = 1;
    m.drift = [rho](const Vec& x) {
        Vec b(1);
        b[0] = -sgn(x[0]) * (std::cos(x[0]) + rho);
        return b;
    };
    m.diffusion = [sigma](const Vec&) {
        Mat s(1, 1);
        s(0, 0) = sigma;
        return s;
    };
    m.sigma_constant = true;
    m.family = "cosine_drift";
    m.params = {{"rho", rho}, {"sigma", sigma}};
    return m;
}

// d = 1 jump diffusion driven by a uniform-[0,1] jump amplitude scaled by a
// bounded odd saturation Phi(x) (-1 past x >= 1), unit Gaussian part. The
// kernel integrals have closed forms: jumps at x are Phi(x) * U, so the
// compensator is Phi(x)/2 and the second moment Phi(x)^2/3; jumps always point
// inward for |x| >= 1.
inline CoefficientModel make_example_e3_model() {
    auto saturation = [](double x) {
        if (x >= 1.0) return -1.0;
        if (x <= -1.0) return 1.0;
        return -x;
    };
    CoefficientModel m;
    m.dim = 1;
    m.drift = [saturation](const Vec& x) {
        Vec b(1);
        b[0] = saturation(x[0]);
        return b;
    };
    m.diffusion = [](const Vec&) {
        Mat s(1, 1);
        s(0, 0) = 1.0;
        return s;
    };
    m.sigma_constant = true;
    m.family = "example_e3";

    JumpKernel k;
    k.kind = JumpKernel::Kind::state_dependent;
    k.compensator_integral = [saturation](const Vec& x) {
        Vec c(1);
        c[0] = 0.5 * saturation(x[0]);
        return c;
    };
    k.second_moment = [saturation](const Vec& x) {
        Mat n(1, 1);
        const double phi = saturation(x[0]);
        n(0, 0) = phi * phi / 3.0;
        return n;
    };
    k.escape_mass = [](const Vec&) { return 0.0; };
    k.bounded_jump_radius = 1.0;
    k.description = "uniform inward jumps, amplitude saturating at 1";
    m.jump = k;
    return m;
}

// Translation-invariant 1-d kernel given by a density on [lo, hi]. The
// compensator and second moment are computed by quadrature once per call.
inline JumpKernel make_levy_density_kernel(std::function<double(double)> density,
                                           double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("levy kernel: need lo < hi");
    JumpKernel k;
    k.kind = JumpKernel::Kind::levy_translation_invariant;
    // nu({0}) = 0 and finiteness of int (1 ^ y^2) nu(dy) on the family
    const double m2 = integrate(
        [&](double y) { return std::min(1.0, y * y) * density(y); }, lo, hi);
    if (!std::isfinite(m2))
        throw std::invalid_argument("levy kernel: int (1 ^ y^2) nu(dy) not finite");
    k.compensator_integral = [density, lo, hi](const Vec& x) {
        Vec c(1);
        const double a = std::max(lo, -1.0), b = std::min(hi, 1.0);
        c[0] = a < b ? integrate([&](double y) { return y * density(y); }, a, b) : 0.0;
        (void)x;
        return c;
    };
    k.second_moment = [density, lo, hi](const Vec& x) {
        Mat n(1, 1);
        const double a = std::max(lo, -1.0), b = std::min(hi, 1.0);
        n(0, 0) = a < b ? integrate([&](double y) { return y * y * density(y); }, a, b) : 0.0;
        (void)x;
        return n;
    };
    return k;
}

// ---------------------------------------------------------------------------
// Coefficient growth checks (local boundedness and mean-square linear growth)
// ---------------------------------------------------------------------------

struct GrowthCheck {
    bool locally_bounded = true;   // sup over sampled balls of |b| + ||sigma||_HS finite
    bool linear_growth = true;     // 2<x,b> + ||sigma||^2 <= Gamma (1 + |x|^2) on samples
    double worst_growth_margin = -kInf;
    double worst_radius = 0;
    std::vector<std::pair<double, double>> ball_sups;  // (radius, sup |b|+||sigma||)
};

inline GrowthCheck check_coefficient_growth(const CoefficientModel& model,
                                            double Gamma,
                                            const std::vector<double>& probe_radii,
                                            int samples_per_ball = 128,
                                            std::uint64_t seed = 0x5eedULL) {
    GrowthCheck out;
    RngStream rng(seed, 0, RngDomain::generic);
    for (double r : probe_radii) {
        double ball_sup = 0.0;
        for (int s = 0; s < samples_per_ball; ++s) {
            Vec x(model.dim);
            for (int i = 0; i < model.dim; ++i) x[i] = rng.next_gaussian();
            const double nrm = x.norm();
            const double radius = r * std::pow(rng.next_uniform(), 1.0 / model.dim);
            if (nrm > 0) x *= radius / nrm;
            const Vec b = model.drift(x);
            const Mat sig = model.diffusion(x);
            const double hs2 = sig.squaredNorm();
            const double mag = b.norm() + std::sqrt(hs2);
            if (!std::isfinite(mag)) out.locally_bounded = false;
            ball_sup = std::max(ball_sup, mag);
            const double margin =
                2.0 * x.dot(b) + hs2 - Gamma * (1.0 + x.squaredNorm());
            if (margin > out.worst_growth_margin) {
                out.worst_growth_margin = margin;
                out.worst_radius = radius;
            }
        }
        out.ball_sups.emplace_back(r, ball_sup);
    }
    out.linear_growth = out.worst_growth_margin <= 1e-9;
    return out;
}

}  // namespace subgeo
