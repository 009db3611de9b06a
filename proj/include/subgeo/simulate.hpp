#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/model.hpp"
#include "subgeo/rng.hpp"

namespace subgeo {

// Simulated sample paths on a uniform time grid. Ensembles are a pure
// function of (model, numeric parameters, seed): every path owns Philox
// substreams addressed by its index, so serial and parallel runs agree
// bitwise. Layout: states[(p * n_times + ti) * dim + k].
struct PathEnsemble {
    std::vector<double> times;
    int n_paths = 0, n_times = 0, dim = 0;
    double dt = 0;
    std::uint64_t seed = 0;
    std::string scheme = "euler_maruyama";
    int record_stride = 1;
    std::vector<double> states;
    std::vector<double> partner;          // coupled companion, same layout
    std::vector<double> coupling_times;   // first grid time with distance <= eps_c
    std::vector<double> coupling_distances;  // pre-glue distance at that time
    double eps_c = 0;
    std::vector<std::uint8_t> flagged;    // explosion proxy tripped
    int n_flagged = 0;
    std::vector<std::vector<double>> jump_times;

    bool coupled() const { return !partner.empty(); }

    double at(int p, int ti, int k) const {
        return states[(size_t(p) * n_times + ti) * dim + k];
    }
    Vec state(int p, int ti) const {
        return Eigen::Map<const Vec>(&states[(size_t(p) * n_times + ti) * dim], dim);
    }
    Vec partner_state(int p, int ti) const {
        return Eigen::Map<const Vec>(&partner[(size_t(p) * n_times + ti) * dim], dim);
    }
    double pair_distance(int p, int ti) const {
        return (state(p, ti) - partner_state(p, ti)).norm();
    }
};

struct SimOptions {
    int record_stride = 1;
    int n_threads = 1;
    double explosion_threshold = 1e12;
};

namespace detail {

inline int checked_step_count(double T, double dt) {
    if (!(dt > 0)) throw std::invalid_argument("simulate: dt must be positive");
    const double steps = T / dt;
    const long long n = std::llround(steps);
    if (n < 1 || std::abs(steps - double(n)) > 1e-9 * std::max(1.0, steps))
        throw std::invalid_argument("simulate: T must be an integral multiple of dt");
    return int(n);
}

inline void fill_gaussians(RngStream& rng, Vec& xi) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.next_gaussian();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Euler-Maruyama for the continuous model
// ---------------------------------------------------------------------------

inline PathEnsemble euler_maruyama(const CoefficientModel& model,
                                   const std::vector<Vec>& starts, double T,
                                   double dt, int n_paths, std::uint64_t seed,
                                   const SimOptions& opt = {}) {
    if (!model.jump.empty())
        throw std::invalid_argument("euler_maruyama: model has a jump part; use jump_sde");
    if (starts.empty()) throw std::invalid_argument("euler_maruyama: no start points");
    const int n_steps = detail::checked_step_count(T, dt);
    const int stride = std::max(1, opt.record_stride);
    if (n_steps % stride != 0)
        throw std::invalid_argument("euler_maruyama: record_stride must divide the step count");
    const int n_rec = n_steps / stride + 1;
    const int dim = model.dim;
    const int n_noise = int(model.diffusion(starts[0]).cols());

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.n_times = n_rec;
    ens.dim = dim;
    ens.dt = dt;
    ens.seed = seed;
    ens.record_stride = stride;
    ens.times.resize(n_rec);
    for (int i = 0; i < n_rec; ++i) ens.times[i] = double(i) * stride * dt;
    ens.states.assign(size_t(n_paths) * n_rec * dim, 0.0);
    ens.flagged.assign(n_paths, 0);

    const double sq_dt = std::sqrt(dt);
    detail::parallel_for(size_t(n_paths), opt.n_threads, [&](size_t p) {
        RngStream rng(seed, p, RngDomain::gaussian);
        Vec x = starts[p % starts.size()];
        Vec xi(n_noise);
        auto record = [&](int slot) {
            std::copy(x.data(), x.data() + dim,
                      &ens.states[(p * size_t(n_rec) + slot) * dim]);
        };
        record(0);
        bool dead = false;
        for (int k = 0; k < n_steps; ++k) {
            if (!dead) {
                detail::fill_gaussians(rng, xi);
                x += model.drift(x) * dt + model.diffusion(x) * (sq_dt * xi);
                if (!x.allFinite() || x.norm() > opt.explosion_threshold) {
                    ens.flagged[p] = 1;
                    dead = true;
                }
            }
            if ((k + 1) % stride == 0) record((k + 1) / stride);
        }
    });
    for (auto f : ens.flagged) ens.n_flagged += f;
    return ens;
}

// ---------------------------------------------------------------------------
// Synchronous coupling: two solutions driven by the same Brownian increments.
// Requires constant diffusion; once the pair distance falls below eps_c the
// companion is glued to the leader (the exact hitting time of the continuous
// construction is replaced by this threshold; its value and the pre-glue
// distances are recorded so the effect can be inspected).
// ---------------------------------------------------------------------------

inline PathEnsemble synchronous_pair(const CoefficientModel& model, const Vec& x,
                                     const Vec& y, double T, double dt, int n_paths,
                                     std::uint64_t seed, double eps_c = -1,
                                     const SimOptions& opt = {}) {
    if (!model.jump.empty())
        throw std::invalid_argument("synchronous_pair: model has a jump part");
    if (!model.sigma_constant)
        throw std::invalid_argument(
            "synchronous_pair: requires a constant diffusion coefficient");
    {
        const Mat s0 = model.diffusion(x);
        const Mat s1 = model.diffusion(y);
        Vec probe = 0.5 * (x + y);
        probe.array() += 1.0;
        const Mat s2 = model.diffusion(probe);
        if (s0 != s1 || s0 != s2)
            throw std::invalid_argument(
                "synchronous_pair: diffusion coefficient varies across probe points");
    }
    const int n_steps = detail::checked_step_count(T, dt);
    const int stride = std::max(1, opt.record_stride);
    if (n_steps % stride != 0)
        throw std::invalid_argument("synchronous_pair: record_stride must divide the step count");
    const int n_rec = n_steps / stride + 1;
    const int dim = model.dim;
    const Mat sigma = model.diffusion(x);
    const int n_noise = int(sigma.cols());
    const double init_dist = (x - y).norm();
    const double glue_eps = eps_c > 0 ? eps_c : 1e-9 * std::max(init_dist, 1e-30);

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.n_times = n_rec;
    ens.dim = dim;
    ens.dt = dt;
    ens.seed = seed;
    ens.scheme = "euler_maruyama.synchronous";
    ens.record_stride = stride;
    ens.eps_c = glue_eps;
    ens.times.resize(n_rec);
    for (int i = 0; i < n_rec; ++i) ens.times[i] = double(i) * stride * dt;
    ens.states.assign(size_t(n_paths) * n_rec * dim, 0.0);
    ens.partner.assign(size_t(n_paths) * n_rec * dim, 0.0);
    ens.coupling_times.assign(n_paths, kInf);
    ens.coupling_distances.assign(n_paths, 0.0);
    ens.flagged.assign(n_paths, 0);

    const double sq_dt = std::sqrt(dt);
    detail::parallel_for(size_t(n_paths), opt.n_threads, [&](size_t p) {
        RngStream rng(seed, p, RngDomain::gaussian);
        Vec xc = x, zc = y;
        Vec xi(n_noise);
        bool glued = init_dist <= glue_eps;
        if (glued) {
            ens.coupling_times[p] = 0.0;
            ens.coupling_distances[p] = init_dist;
            zc = xc;
        }
        auto record = [&](int slot) {
            std::copy(xc.data(), xc.data() + dim,
                      &ens.states[(p * size_t(n_rec) + slot) * dim]);
            std::copy(zc.data(), zc.data() + dim,
                      &ens.partner[(p * size_t(n_rec) + slot) * dim]);
        };
        record(0);
        bool dead = false;
        for (int k = 0; k < n_steps; ++k) {
            if (!dead) {
                detail::fill_gaussians(rng, xi);
                const Vec noise = sigma * (sq_dt * xi);
                xc += model.drift(xc) * dt + noise;
                if (glued) {
                    zc = xc;
                } else {
                    zc += model.drift(zc) * dt + noise;
                    const double dist = (xc - zc).norm();
                    if (dist <= glue_eps) {
                        glued = true;
                        ens.coupling_times[p] = (k + 1) * dt;
                        ens.coupling_distances[p] = dist;
                        zc = xc;
                    }
                }
                if (!xc.allFinite() || !zc.allFinite() ||
                    xc.norm() > opt.explosion_threshold ||
                    zc.norm() > opt.explosion_threshold) {
                    ens.flagged[p] = 1;
                    dead = true;
                }
            }
            if ((k + 1) % stride == 0) record((k + 1) / stride);
        }
    });
    for (auto f : ens.flagged) ens.n_flagged += f;
    return ens;
}

// ---------------------------------------------------------------------------
// Jump SDE dX = b(X) dt + dY with Y a Levy process with finite jump activity:
// exact exponential jump clocks, Euler increments between events, jump sizes
// from the normalized measure. Infinite-activity measures are out of scope.
// ---------------------------------------------------------------------------

struct LevyTriplet {
    Vec beta;                 // deterministic drift of Y
    Mat gauss_cov;            // covariance of the Gaussian part
    double jump_rate = 0;     // nu(R^d), must be finite
    std::function<Vec(RngStream&)> jump_sampler;  // draws from nu / nu(R^d)
    std::string family;
};

inline LevyTriplet levy_point_jumps(int dim, double rate, const Vec& jump) {
    LevyTriplet t;
    t.beta = Vec::Zero(dim);
    t.gauss_cov = Mat::Zero(dim, dim);
    t.jump_rate = rate;
    t.jump_sampler = [jump](RngStream&) { return jump; };
    t.family = "point";
    return t;
}

inline LevyTriplet levy_uniform_jumps(double rate, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("levy_uniform_jumps: need lo < hi");
    LevyTriplet t;
    t.beta = Vec::Zero(1);
    t.gauss_cov = Mat::Zero(1, 1);
    t.jump_rate = rate;
    t.jump_sampler = [lo, hi](RngStream& rng) {
        Vec j(1);
        j[0] = lo + (hi - lo) * rng.next_uniform();
        return j;
    };
    t.family = "uniform";
    return t;
}

struct JumpSdeSpec {
    int dim = 1;
    std::function<Vec(const Vec&)> drift;
    LevyTriplet levy;
    bool one_sided_lipschitz = true;  // declared regularity of the drift
    bool linear_growth = true;
};

inline PathEnsemble jump_sde(const JumpSdeSpec& spec, const std::vector<Vec>& starts,
                             double T, double dt, int n_paths, std::uint64_t seed,
                             const SimOptions& opt = {}) {
    if (starts.empty()) throw std::invalid_argument("jump_sde: no start points");
    if (!(spec.levy.jump_rate >= 0) || !std::isfinite(spec.levy.jump_rate))
        throw std::invalid_argument("jump_sde: jump measure mass must be finite");
    if (spec.levy.jump_rate > 0 && !spec.levy.jump_sampler)
        throw std::invalid_argument("jump_sde: missing jump sampler");
    const int n_steps = detail::checked_step_count(T, dt);
    const int stride = std::max(1, opt.record_stride);
    if (n_steps % stride != 0)
        throw std::invalid_argument("jump_sde: record_stride must divide the step count");
    const int n_rec = n_steps / stride + 1;
    const int dim = spec.dim;

    // symmetric square root of the Gaussian covariance
    Mat noise_map = Mat::Zero(dim, dim);
    bool has_gauss = spec.levy.gauss_cov.size() > 0 && spec.levy.gauss_cov.norm() > 0;
    if (has_gauss) {
        Eigen::SelfAdjointEigenSolver<Mat> es(spec.levy.gauss_cov);
        if (es.info() != Eigen::Success)
            throw std::invalid_argument("jump_sde: Gaussian covariance not diagonalizable");
        Vec ev = es.eigenvalues();
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev[i] < -1e-12) throw std::invalid_argument("jump_sde: covariance not PSD");
            ev[i] = std::sqrt(std::max(ev[i], 0.0));
        }
        noise_map = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        // exact identity covariance keeps an exact identity map
        if (spec.levy.gauss_cov == Mat::Identity(dim, dim))
            noise_map = Mat::Identity(dim, dim);
    }
    const bool has_beta = spec.levy.beta.size() > 0 && spec.levy.beta.norm() > 0;

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.n_times = n_rec;
    ens.dim = dim;
    ens.dt = dt;
    ens.seed = seed;
    ens.scheme = "jump_euler";
    ens.record_stride = stride;
    ens.times.resize(n_rec);
    for (int i = 0; i < n_rec; ++i) ens.times[i] = double(i) * stride * dt;
    ens.states.assign(size_t(n_paths) * n_rec * dim, 0.0);
    ens.flagged.assign(n_paths, 0);
    ens.jump_times.assign(n_paths, {});

    const double sq_dt = std::sqrt(dt);
    detail::parallel_for(size_t(n_paths), opt.n_threads, [&](size_t p) {
        RngStream grng(seed, p, RngDomain::gaussian);
        RngStream jrng(seed, p, RngDomain::jump);
        Vec x = starts[p % starts.size()];
        Vec xi(dim);
        auto drift_at = [&](const Vec& v) {
            Vec b = spec.drift(v);
            if (has_beta) b += spec.levy.beta;
            return b;
        };
        auto euler_to = [&](double h) {
            detail::fill_gaussians(grng, xi);
            x += drift_at(x) * h;
            if (has_gauss) x += noise_map * (std::sqrt(h) * xi);
        };
        double next_jump = spec.levy.jump_rate > 0
                               ? -std::log(jrng.next_uniform()) / spec.levy.jump_rate
                               : kInf;
        auto record = [&](int slot) {
            std::copy(x.data(), x.data() + dim,
                      &ens.states[(p * size_t(n_rec) + slot) * dim]);
        };
        record(0);
        bool dead = false;
        for (int k = 0; k < n_steps; ++k) {
            if (!dead) {
                double cur = k * dt;
                const double end = (k + 1) * dt;
                if (next_jump > end) {
                    // jump-free step: exactly the plain scheme's update
                    detail::fill_gaussians(grng, xi);
                    if (has_gauss)
                        x += drift_at(x) * dt + noise_map * (sq_dt * xi);
                    else
                        x += drift_at(x) * dt;
                } else {
                    while (next_jump <= end) {
                        if (next_jump > cur) euler_to(next_jump - cur);
                        x += spec.levy.jump_sampler(jrng);
                        ens.jump_times[p].push_back(next_jump);
                        cur = next_jump;
                        next_jump += -std::log(jrng.next_uniform()) / spec.levy.jump_rate;
                    }
                    if (end > cur) euler_to(end - cur);
                }
                if (!x.allFinite() || x.norm() > opt.explosion_threshold) {
                    ens.flagged[p] = 1;
                    dead = true;
                }
            }
            if ((k + 1) % stride == 0) record((k + 1) / stride);
        }
    });
    for (auto f : ens.flagged) ens.n_flagged += f;
    return ens;
}

// ---------------------------------------------------------------------------
// Subordinators: families with exactly sampleable marginals only.
// ---------------------------------------------------------------------------

struct SubordinatorSpec {
    enum class Family { gamma, drift_only, compound_poisson };
    enum class JumpLaw { point, exponential, uniform };

    Family family = Family::gamma;
    double a = 1.0, b = 1.0;  // gamma marginal: shape a*t, rate b
    double drift = 0.0;
    double cp_rate = 0.0;
    JumpLaw cp_jump_law = JumpLaw::point;
    double cp_p1 = 1.0, cp_p2 = 0.0;  // point: value; exponential: mean; uniform: [p1, p2]

    // Laplace exponent of the family.
    double bernstein(double u) const {
        switch (family) {
            case Family::gamma:
                return a * std::log1p(u / b);
            case Family::drift_only:
                return drift * u;
            case Family::compound_poisson: {
                double laplace;  // E[e^{-u J}]
                switch (cp_jump_law) {
                    case JumpLaw::point:
                        laplace = std::exp(-u * cp_p1);
                        break;
                    case JumpLaw::exponential:
                        laplace = 1.0 / (1.0 + u * cp_p1);
                        break;
                    case JumpLaw::uniform:
                        laplace = u > 0 ? (std::exp(-u * cp_p1) - std::exp(-u * cp_p2)) /
                                              (u * (cp_p2 - cp_p1))
                                        : 1.0;
                        break;
                    default:
                        throw std::invalid_argument("unknown jump law");
                }
                return drift * u + cp_rate * (1.0 - laplace);
            }
        }
        throw std::invalid_argument("unknown subordinator family");
    }

    std::string label() const {
        switch (family) {
            case Family::gamma:
                return "gamma(" + std::to_string(a) + "," + std::to_string(b) + ")";
            case Family::drift_only:
                return "drift_only(" + std::to_string(drift) + ")";
            case Family::compound_poisson:
                return "compound_poisson(" + std::to_string(cp_rate) + ")";
        }
        return "?";
    }
};

inline std::vector<double> subordinator_sample(const SubordinatorSpec& spec, double t,
                                               int n, std::uint64_t seed) {
    if (!(t >= 0)) throw std::invalid_argument("subordinator_sample: t must be >= 0");
    if (n < 1) throw std::invalid_argument("subordinator_sample: n must be positive");
    std::vector<double> out(static_cast<std::size_t>(n));
    RngStream rng(seed, 0x5ab0ULL, RngDomain::generic);
    switch (spec.family) {
        case SubordinatorSpec::Family::gamma: {
            if (!(spec.a > 0) || !(spec.b > 0))
                throw std::invalid_argument("subordinator_sample: gamma needs a, b > 0");
            if (t == 0) {
                std::fill(out.begin(), out.end(), 0.0);
                return out;
            }
            std::gamma_distribution<double> g(spec.a * t, 1.0 / spec.b);
            for (auto& v : out) v = g(rng);
            return out;
        }
        case SubordinatorSpec::Family::drift_only: {
            if (!(spec.drift >= 0))
                throw std::invalid_argument("subordinator_sample: drift must be >= 0");
            std::fill(out.begin(), out.end(), spec.drift * t);
            return out;
        }
        case SubordinatorSpec::Family::compound_poisson: {
            if (!(spec.cp_rate >= 0) || !(spec.drift >= 0))
                throw std::invalid_argument(
                    "subordinator_sample: compound poisson needs rate, drift >= 0");
            std::poisson_distribution<int> pois(spec.cp_rate * t);
            for (auto& v : out) {
                double s = spec.drift * t;
                const int nj = spec.cp_rate * t > 0 ? pois(rng) : 0;
                for (int j = 0; j < nj; ++j) {
                    switch (spec.cp_jump_law) {
                        case SubordinatorSpec::JumpLaw::point:
                            s += spec.cp_p1;
                            break;
                        case SubordinatorSpec::JumpLaw::exponential:
                            s += -spec.cp_p1 * std::log(rng.next_uniform());
                            break;
                        case SubordinatorSpec::JumpLaw::uniform:
                            s += spec.cp_p1 + (spec.cp_p2 - spec.cp_p1) * rng.next_uniform();
                            break;
                    }
                }
                v = s;
            }
            return out;
        }
    }
    throw std::invalid_argument("subordinator_sample: unsupported family");
}

// ---------------------------------------------------------------------------
// Ensemble export: binary columnar dump plus CSV summaries.
// ---------------------------------------------------------------------------

inline void write_ensemble_binary(const PathEnsemble& ens, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    const char magic[4] = {'S', 'G', 'E', '1'};
    os.write(magic, 4);
    const std::uint32_t np = ens.n_paths, nt = ens.n_times, d = ens.dim,
                        coupled = ens.coupled() ? 1 : 0;
    os.write(reinterpret_cast<const char*>(&np), 4);
    os.write(reinterpret_cast<const char*>(&nt), 4);
    os.write(reinterpret_cast<const char*>(&d), 4);
    os.write(reinterpret_cast<const char*>(&coupled), 4);
    os.write(reinterpret_cast<const char*>(&ens.dt), 8);
    os.write(reinterpret_cast<const char*>(&ens.seed), 8);
    os.write(reinterpret_cast<const char*>(ens.states.data()),
             std::streamsize(ens.states.size() * 8));
    if (ens.coupled())
        os.write(reinterpret_cast<const char*>(ens.partner.data()),
                 std::streamsize(ens.partner.size() * 8));
}

inline void write_ensemble_summary_csv(const PathEnsemble& ens, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "t,q05,q25,q50,q75,q95,mean,norm_mean\n";
    os.precision(12);
    std::vector<double> col(ens.n_paths);
    for (int ti = 0; ti < ens.n_times; ++ti) {
        double mean = 0, norm_mean = 0;
        for (int p = 0; p < ens.n_paths; ++p) {
            col[p] = ens.at(p, ti, 0);
            mean += col[p];
            norm_mean += ens.state(p, ti).norm();
        }
        mean /= ens.n_paths;
        norm_mean /= ens.n_paths;
        std::sort(col.begin(), col.end());
        auto q = [&](double f) {
            const double pos = f * (col.size() - 1);
            const size_t i = size_t(pos);
            const double w = pos - double(i);
            return i + 1 < col.size() ? (1 - w) * col[i] + w * col[i + 1] : col[i];
        };
        os << ens.times[ti] << ',' << q(0.05) << ',' << q(0.25) << ',' << q(0.50) << ','
           << q(0.75) << ',' << q(0.95) << ',' << mean << ',' << norm_mean << '\n';
    }
}

inline void write_coupling_histogram_csv(const PathEnsemble& ens, const std::string& path,
                                         int n_bins = 40) {
    if (!ens.coupled()) throw std::invalid_argument("ensemble is not coupled");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    double tmax = 0;
    int uncoupled = 0;
    for (double ct : ens.coupling_times) {
        if (std::isfinite(ct))
            tmax = std::max(tmax, ct);
        else
            ++uncoupled;
    }
    os << "# eps_c=" << ens.eps_c << " uncoupled=" << uncoupled << "\n";
    os << "bin_lo,bin_hi,count\n";
    if (tmax == 0) tmax = ens.times.back();
    std::vector<int> counts(n_bins, 0);
    for (double ct : ens.coupling_times) {
        if (!std::isfinite(ct)) continue;
        int b = int(ct / tmax * n_bins);
        counts[std::min(b, n_bins - 1)]++;
    }
    for (int b = 0; b < n_bins; ++b)
        os << b * tmax / n_bins << ',' << (b + 1) * tmax / n_bins << ',' << counts[b]
           << '\n';
}

}  // namespace subgeo
