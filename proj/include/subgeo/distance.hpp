#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgeo/rate.hpp"
#include "subgeo/rng.hpp"
#include "subgeo/simulate.hpp"

namespace subgeo {

struct EmpiricalMeasure {
    Mat samples;  // n x d
    Vec weights;  // non-negative, sums to one

    static EmpiricalMeasure from_samples(Mat s) {
        EmpiricalMeasure m;
        m.weights = Vec::Constant(s.rows(), 1.0 / double(s.rows()));
        m.samples = std::move(s);
        m.validate();
        return m;
    }

    static EmpiricalMeasure from_vector(const std::vector<double>& xs) {
        Mat s(xs.size(), 1);
        for (size_t i = 0; i < xs.size(); ++i) s(Eigen::Index(i), 0) = xs[i];
        return from_samples(std::move(s));
    }

    int n() const { return int(samples.rows()); }
    int dim() const { return int(samples.cols()); }

    void validate() const {
        if (samples.rows() == 0) throw std::invalid_argument("empirical measure is empty");
        if (!samples.allFinite())
            throw std::invalid_argument("empirical measure has non-finite samples");
        if (weights.size() != samples.rows())
            throw std::invalid_argument("weights/samples size mismatch");
        if ((weights.array() < 0).any())
            throw std::invalid_argument("weights must be non-negative");
        if (std::abs(weights.sum() - 1.0) > 1e-12)
            throw std::invalid_argument("weights must sum to one");
    }
};

// Marginal cloud of an ensemble at a recorded time index (flagged paths are
// excluded from the cloud).
inline EmpiricalMeasure ensemble_marginal(const PathEnsemble& ens, int t_index,
                                          bool partner = false) {
    if (t_index < 0 || t_index >= ens.n_times)
        throw std::invalid_argument("ensemble_marginal: bad time index");
    std::vector<int> alive;
    for (int p = 0; p < ens.n_paths; ++p)
        if (!ens.flagged[p]) alive.push_back(p);
    if (alive.empty()) throw std::invalid_argument("ensemble_marginal: all paths flagged");
    Mat s(alive.size(), ens.dim);
    for (size_t i = 0; i < alive.size(); ++i)
        s.row(Eigen::Index(i)) =
            (partner ? ens.partner_state(alive[i], t_index) : ens.state(alive[i], t_index))
                .transpose();
    return EmpiricalMeasure::from_samples(std::move(s));
}

// ---------------------------------------------------------------------------
// Exact 1-d Wasserstein: the quantile coupling is optimal for convex costs.
// Equal-size uniform clouds reduce to the sorted pairing; general weights go
// through the merged-quantile construction.
// ---------------------------------------------------------------------------

inline double wasserstein_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                             double p = 1.0) {
    mu.validate();
    nu.validate();
    if (mu.dim() != 1 || nu.dim() != 1)
        throw std::invalid_argument("wasserstein_1d: requires d = 1 (use the assignment variant)");
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_1d: p must be >= 1");

    std::vector<int> ia(mu.n()), ib(nu.n());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::sort(ia.begin(), ia.end(),
              [&](int l, int r) { return mu.samples(l, 0) < mu.samples(r, 0); });
    std::sort(ib.begin(), ib.end(),
              [&](int l, int r) { return nu.samples(l, 0) < nu.samples(r, 0); });

    const bool uniform_equal =
        mu.n() == nu.n() &&
        (mu.weights.array() == mu.weights[0]).all() &&
        (nu.weights.array() == nu.weights[0]).all();
    double cost = 0.0;
    if (uniform_equal) {
        for (int i = 0; i < mu.n(); ++i)
            cost += std::pow(std::abs(mu.samples(ia[i], 0) - nu.samples(ib[i], 0)), p) /
                    double(mu.n());
    } else {
        size_t i = 0, j = 0;
        double wa = mu.weights[ia[0]], wb = nu.weights[ib[0]];
        while (i < ia.size() && j < ib.size()) {
            const double step = std::min(wa, wb);
            if (step > 0)
                cost += step *
                        std::pow(std::abs(mu.samples(ia[i], 0) - nu.samples(ib[j], 0)), p);
            wa -= step;
            wb -= step;
            if (wa <= 1e-15 && i + 1 <= ia.size()) {
                if (++i < ia.size()) wa = mu.weights[ia[i]];
            }
            if (wb <= 1e-15 && j + 1 <= ib.size()) {
                if (++j < ib.size()) wb = nu.weights[ib[j]];
            }
        }
    }
    return std::pow(cost, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Exact assignment solver (shortest augmenting paths with potentials, O(n^3)),
// desk-scale by design: refuses n > 1024.
// ---------------------------------------------------------------------------

namespace detail {

inline double assignment_cost(const Mat& cost) {
    const int n = int(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0;
    for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
    return total;
}

}  // namespace detail

inline double wasserstein_assignment(const EmpiricalMeasure& mu,
                                     const EmpiricalMeasure& nu, double p = 1.0) {
    mu.validate();
    nu.validate();
    if (mu.n() != nu.n())
        throw std::invalid_argument("wasserstein_assignment: clouds must have equal size");
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("wasserstein_assignment: dimension mismatch");
    if (mu.n() > 1024)
        throw std::invalid_argument(
            "wasserstein_assignment: size cap 1024 exceeded (use sub-sampling)");
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_assignment: p must be >= 1");
    const int n = mu.n();
    Mat cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost(i, j) = std::pow((mu.samples.row(i) - nu.samples.row(j)).norm(), p);
    return std::pow(detail::assignment_cost(cost) / double(n), 1.0 / p);
}

// Median of repeated sub-sampled assignment distances for clouds past the cap.
inline double wasserstein_subsampled(const EmpiricalMeasure& mu,
                                     const EmpiricalMeasure& nu, double p = 1.0,
                                     int cap = 1024, int reps = 8,
                                     std::uint64_t seed = 0x5a5aULL) {
    if (mu.n() <= cap && nu.n() <= cap && mu.n() == nu.n())
        return wasserstein_assignment(mu, nu, p);
    std::vector<double> vals(reps);
    for (int r = 0; r < reps; ++r) {
        RngStream rng(seed, std::uint64_t(r), RngDomain::generic);
        Mat a(cap, mu.dim()), b(cap, nu.dim());
        for (int i = 0; i < cap; ++i) {
            a.row(i) = mu.samples.row(int(rng.next_u64() % std::uint64_t(mu.n())));
            b.row(i) = nu.samples.row(int(rng.next_u64() % std::uint64_t(nu.n())));
        }
        vals[r] = wasserstein_assignment(EmpiricalMeasure::from_samples(a),
                                         EmpiricalMeasure::from_samples(b), p);
    }
    std::sort(vals.begin(), vals.end());
    return 0.5 * (vals[(reps - 1) / 2] + vals[reps / 2]);
}

// ---------------------------------------------------------------------------
// Coupling cost: (mean f(|X_t - Z_t|)^p)^{1/p} over a coupled ensemble; an
// upper-bound estimator of the transport distance between the two marginals.
// ---------------------------------------------------------------------------

inline double coupling_cost(const PathEnsemble& ens, const ModulusPair& mod, double p,
                            int t_index) {
    if (!ens.coupled()) throw std::invalid_argument("coupling_cost: ensemble is not coupled");
    if (t_index < 0 || t_index >= ens.n_times)
        throw std::invalid_argument("coupling_cost: bad time index");
    if (!(p >= 1.0)) throw std::invalid_argument("coupling_cost: p must be >= 1");
    double acc = 0.0;
    int n = 0;
    for (int pth = 0; pth < ens.n_paths; ++pth) {
        if (ens.flagged[pth]) continue;
        acc += std::pow(mod.f(ens.pair_distance(pth, t_index)), p);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("coupling_cost: all paths flagged");
    return std::pow(acc / double(n), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Histogram total-variation estimate (half L1 distance of binned densities).
// Underestimates for coarse bins and turns noisy for fine ones; the
// Freedman-Diaconis default balances the two on pooled samples.
// ---------------------------------------------------------------------------

struct BinRule {
    enum class Kind { freedman_diaconis, fixed } kind = Kind::freedman_diaconis;
    int nx = 64, ny = 64;
};

namespace detail {

inline double fd_width(std::vector<double> pooled) {
    std::sort(pooled.begin(), pooled.end());
    const size_t n = pooled.size();
    auto q = [&](double f) { return pooled[size_t(f * double(n - 1))]; };
    double iqr = q(0.75) - q(0.25);
    if (iqr <= 0) iqr = (pooled.back() - pooled.front()) / std::sqrt(double(n));
    return 2.0 * iqr / std::cbrt(double(n));
}

}  // namespace detail

inline double tv_histogram(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const BinRule& rule = {}) {
    mu.validate();
    nu.validate();
    if (mu.dim() != nu.dim()) throw std::invalid_argument("tv_histogram: dimension mismatch");
    const int d = mu.dim();
    if (d > 2) throw std::invalid_argument("tv_histogram: default binning covers d <= 2");

    std::array<int, 2> nbins{1, 1};
    std::array<double, 2> lo{0, 0}, width{1, 1};
    for (int k = 0; k < d; ++k) {
        std::vector<double> pooled;
        pooled.reserve(mu.n() + nu.n());
        for (int i = 0; i < mu.n(); ++i) pooled.push_back(mu.samples(i, k));
        for (int i = 0; i < nu.n(); ++i) pooled.push_back(nu.samples(i, k));
        const auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
        const double span = std::max(*mx - *mn, 1e-300);
        double h;
        if (rule.kind == BinRule::Kind::fixed) {
            h = span / double(k == 0 ? rule.nx : rule.ny);
        } else {
            h = detail::fd_width(pooled);
            if (!(h > 0)) h = span;
        }
        lo[k] = *mn;
        nbins[k] = std::max(1, std::min<int>(int(std::ceil(span / h)), 4096));
        width[k] = span / nbins[k] * (1.0 + 1e-12);
    }
    const int total = nbins[0] * nbins[1];
    std::vector<double> pm(total, 0.0), qm(total, 0.0);
    auto slot = [&](const EmpiricalMeasure& m, int i) {
        int ix = int((m.samples(i, 0) - lo[0]) / width[0]);
        ix = std::clamp(ix, 0, nbins[0] - 1);
        int iy = 0;
        if (d == 2) {
            iy = int((m.samples(i, 1) - lo[1]) / width[1]);
            iy = std::clamp(iy, 0, nbins[1] - 1);
        }
        return ix * nbins[1] + iy;
    };
    for (int i = 0; i < mu.n(); ++i) pm[slot(mu, i)] += mu.weights[i];
    for (int i = 0; i < nu.n(); ++i) qm[slot(nu, i)] += nu.weights[i];
    double acc = 0.0;
    for (int b = 0; b < total; ++b) acc += std::abs(pm[b] - qm[b]);
    return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Decay-curve fitting on the model's natural (log) scale.
// ---------------------------------------------------------------------------

enum class DecayModel { exponential, power, psi_inverse };

struct DecayFit {
    DecayModel model = DecayModel::exponential;
    std::map<std::string, double> params;
    double residual = 0;  // RMS residual on the log scale
    int dropped_points = 0;
    std::vector<std::string> warnings;
};

struct PsiInverseSpec {
    ModulusPair mod;
    double kappa = 1.0;
};

inline DecayFit decay_fit(std::vector<double> times, std::vector<double> distances,
                          DecayModel model, const PsiInverseSpec* psi_spec = nullptr) {
    if (times.size() != distances.size())
        throw std::invalid_argument("decay_fit: size mismatch");
    DecayFit fit;
    fit.model = model;
    std::vector<double> ts, ds;
    for (size_t i = 0; i < times.size(); ++i) {
        const bool needs_positive_t = model == DecayModel::power;
        if (distances[i] > 0 && (!needs_positive_t || times[i] > 0)) {
            ts.push_back(times[i]);
            ds.push_back(distances[i]);
        } else {
            ++fit.dropped_points;
        }
    }
    if (fit.dropped_points > 0)
        fit.warnings.push_back(std::to_string(fit.dropped_points) +
                               " non-positive points dropped from the log-scale fit");
    if (ts.size() < 5)
        throw std::invalid_argument("decay_fit: needs at least 5 usable points");

    auto linear_fit = [](const std::vector<double>& x, const std::vector<double>& y,
                         double& slope, double& intercept) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = double(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        intercept = (sy - slope * sx) / n;
    };
    auto rms = [&](auto&& predict_log) {
        double acc = 0;
        for (size_t i = 0; i < ts.size(); ++i) {
            const double r = std::log(ds[i]) - predict_log(ts[i]);
            acc += r * r;
        }
        return std::sqrt(acc / double(ts.size()));
    };

    switch (model) {
        case DecayModel::exponential: {
            std::vector<double> ly(ts.size());
            for (size_t i = 0; i < ts.size(); ++i) ly[i] = std::log(ds[i]);
            double slope, icept;
            linear_fit(ts, ly, slope, icept);
            fit.params["Gamma"] = -slope;
            fit.params["kappa"] = std::exp(icept);
            fit.residual = rms([&](double t) { return icept + slope * t; });
            break;
        }
        case DecayModel::power: {
            std::vector<double> lx(ts.size()), ly(ts.size());
            for (size_t i = 0; i < ts.size(); ++i) {
                lx[i] = std::log(ts[i]);
                ly[i] = std::log(ds[i]);
            }
            double slope, icept;
            linear_fit(lx, ly, slope, icept);
            fit.params["exponent"] = slope;  // d ~ c t^{exponent}
            fit.params["c"] = std::exp(icept);
            fit.residual = rms([&](double t) { return icept + slope * std::log(t); });
            break;
        }
        case DecayModel::psi_inverse: {
            if (!psi_spec)
                throw std::invalid_argument("decay_fit: psi_inverse model needs its spec");
            // order times for the warm-started inverse curve, keep the map back
            std::vector<size_t> order(ts.size());
            std::iota(order.begin(), order.end(), size_t(0));
            std::sort(order.begin(), order.end(),
                      [&](size_t a, size_t b) { return ts[a] < ts[b]; });
            std::vector<double> t_sorted(ts.size()), d_sorted(ts.size());
            for (size_t i = 0; i < order.size(); ++i) {
                t_sorted[i] = ts[order[i]];
                d_sorted[i] = ds[order[i]];
            }
            auto objective = [&](double gamma_rate) {
                std::vector<double> targets(t_sorted.size());
                for (size_t i = 0; i < t_sorted.size(); ++i)
                    targets[i] = gamma_rate * t_sorted[i];
                const auto bounds =
                    modulus_inverse_curve(psi_spec->mod, psi_spec->kappa, targets);
                double acc = 0;
                for (size_t i = 0; i < bounds.size(); ++i) {
                    const double r = std::log(d_sorted[i]) - std::log(bounds[i]);
                    acc += r * r;
                }
                return acc;
            };
            // golden-section on log Gamma
            const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
            double a = std::log(1e-6), b = std::log(1e6);
            double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
            double f1 = objective(std::exp(c1)), f2 = objective(std::exp(c2));
            for (int it = 0; it < 80; ++it) {
                if (f1 < f2) {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - gr * (b - a);
                    f1 = objective(std::exp(c1));
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + gr * (b - a);
                    f2 = objective(std::exp(c2));
                }
            }
            const double gamma_rate = std::exp(0.5 * (a + b));
            fit.params["Gamma"] = gamma_rate;
            fit.params["kappa"] = psi_spec->kappa;
            fit.residual = std::sqrt(objective(gamma_rate) / double(ts.size()));
            break;
        }
    }
    return fit;
}

// CSV export: t, empirical, predicted bound, excess per row.
inline void write_decay_csv(const std::string& path, const std::vector<double>& times,
                            const std::vector<double>& empirical,
                            const std::vector<double>& predicted) {
    if (times.size() != empirical.size() || times.size() != predicted.size())
        throw std::invalid_argument("write_decay_csv: size mismatch");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "t,empirical,predicted_bound,excess\n";
    os.precision(17);
    for (size_t i = 0; i < times.size(); ++i)
        os << times[i] << ',' << empirical[i] << ',' << predicted[i] << ','
           << empirical[i] - predicted[i] << '\n';
}

}  // namespace subgeo
