#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "iterkit/fit.hpp"
#include "iterkit/models.hpp"
#include "iterkit/parallel.hpp"
#include "iterkit/rng.hpp"

namespace iterkit {

// ---------------------------------------------------------------------------
// Var(S_n)/n across independent stationary paths.
// ---------------------------------------------------------------------------
struct VarianceGrowth {
    std::vector<std::uint64_t> n;
    std::vector<double> var_over_n;  // sample variance of S_n, divided by n
    std::vector<double> se;          // normal-theory se of the variance / n
    std::uint64_t reps = 0;
};

template <class Model>
VarianceGrowth variance_growth(const Model& model,
                               std::vector<std::uint64_t> n_grid,
                               std::uint64_t reps, std::uint64_t seed,
                               unsigned n_threads = 1) {
    if (n_grid.empty() || reps < 8)
        throw std::invalid_argument("variance_growth: empty grid or reps < 8");
    std::sort(n_grid.begin(), n_grid.end());
    if (n_grid.front() == 0)
        throw std::invalid_argument("variance_growth: n >= 1 required");
    const std::uint64_t n_max = n_grid.back();

    struct Acc {
        std::vector<double> sum, sum2;
        std::uint64_t n = 0;
    };
    auto total = parallel_paths(
        reps, n_threads,
        [&] {
            Acc a;
            a.sum.assign(n_grid.size(), 0.0);
            a.sum2.assign(n_grid.size(), 0.0);
            return a;
        },
        [&](Acc& a, std::uint64_t path) {
            rng::Stream g(seed, 0x51, path);
            auto w = model.sample_stationary(g);
            double s = 0;
            std::size_t gi = 0;
            for (std::uint64_t t = 1; t <= n_max; ++t) {
                const auto e = model.sample_innovation(g);
                s += model.observe(e, w);
                w = model.step(e, w);
                while (gi < n_grid.size() && n_grid[gi] == t) {
                    a.sum[gi] += s;
                    a.sum2[gi] += s * s;
                    ++gi;
                }
            }
            ++a.n;
        },
        [](Acc& a, Acc&& b) {
            for (std::size_t i = 0; i < a.sum.size(); ++i) {
                a.sum[i] += b.sum[i];
                a.sum2[i] += b.sum2[i];
            }
            a.n += b.n;
        });

    VarianceGrowth out;
    out.n = n_grid;
    out.reps = reps;
    const double N = double(total.n);
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const double var = std::max(
            0.0, (total.sum2[i] - total.sum[i] * total.sum[i] / N) / (N - 1));
        out.var_over_n.push_back(var / double(n_grid[i]));
        out.se.push_back(var * std::sqrt(2.0 / (N - 1)) / double(n_grid[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral long-run variance from one long stationary path:
// sigma^2 = c_0 + 2 sum_l w(l/L) c_l with the flat-top taper
// w(x) = 1 for x <= 1/2, 2(1-x) for 1/2 < x <= 1.
// ---------------------------------------------------------------------------
struct SpectralEstimate {
    double sigma2 = 0;
    double se = 0;  // ~ sigma^2 sqrt(2 L_w / L)
    std::uint64_t lag_window = 0, path_length = 0;
};

template <class Model>
SpectralEstimate sigma2_spectral(const Model& model, std::uint64_t lag_window,
                                 std::uint64_t path_length,
                                 std::uint64_t seed) {
    if (path_length < 100)
        throw std::invalid_argument("sigma2_spectral: path_length >= 100");
    if (lag_window == 0)
        lag_window = std::uint64_t(std::ceil(std::cbrt(double(path_length))));
    if (lag_window >= path_length / 10)
        throw std::invalid_argument(
            "sigma2_spectral: lag window must be < path_length / 10");

    rng::Stream g(seed, 0x52, 0);
    auto w = model.sample_stationary(g);
    std::vector<double> x(path_length);
    for (auto& xi : x) {
        const auto e = model.sample_innovation(g);
        xi = model.observe(e, w);
        w = model.step(e, w);
    }
    double mean = 0;
    for (double xi : x) mean += xi;
    mean /= double(path_length);
    for (auto& xi : x) xi -= mean;

    const auto cov = [&](std::uint64_t l) {
        double c = 0;
        for (std::uint64_t t = 0; t + l < path_length; ++t)
            c += x[t] * x[t + l];
        return c / double(path_length);
    };
    const auto taper = [&](double r) {
        return r <= 0.5 ? 1.0 : 2.0 * (1.0 - r);
    };
    SpectralEstimate out;
    out.lag_window = lag_window;
    out.path_length = path_length;
    out.sigma2 = cov(0);
    for (std::uint64_t l = 1; l <= lag_window; ++l)
        out.sigma2 += 2.0 * taper(double(l) / double(lag_window)) * cov(l);
    out.se = std::abs(out.sigma2) *
             std::sqrt(2.0 * double(lag_window) / double(path_length));
    return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov check of S_n / sqrt(n sigma^2) against N(0,1); the mean
// and sigma^2 are supplied externally (analytic or independently estimated)
// so the statistic keeps its simple-null distribution.
// ---------------------------------------------------------------------------
inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double ks_statistic_vs_normal(std::vector<double> z) {
    std::sort(z.begin(), z.end());
    const double N = double(z.size());
    double d = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double F = std_normal_cdf(z[i]);
        d = std::max(d, std::max(double(i + 1) / N - F, F - double(i) / N));
    }
    return d;
}

struct CLTReport {
    std::uint64_t n = 0, reps = 0;
    double ks = 0;
    double sigma2_used = 0;
    bool degenerate = false;  // sigma^2 below 1e-12: statistic not formed
};

template <class Model>
CLTReport clt_check(const Model& model, std::uint64_t n, std::uint64_t reps,
                    double mean, double sigma2, std::uint64_t seed,
                    unsigned n_threads = 1) {
    CLTReport out;
    out.n = n;
    out.reps = reps;
    out.sigma2_used = sigma2;
    if (sigma2 < 1e-12) {
        out.degenerate = true;
        return out;
    }
    auto z = parallel_paths(
        reps, n_threads, [] { return std::vector<double>{}; },
        [&](std::vector<double>& acc, std::uint64_t path) {
            rng::Stream g(seed, 0x53, path);
            auto w = model.sample_stationary(g);
            double s = 0;
            for (std::uint64_t t = 0; t < n; ++t) {
                const auto e = model.sample_innovation(g);
                s += model.observe(e, w) - mean;
                w = model.step(e, w);
            }
            acc.push_back(s / std::sqrt(double(n) * sigma2));
        },
        [](std::vector<double>& a, std::vector<double>&& b) {
            a.insert(a.end(), b.begin(), b.end());
        });
    out.ks = ks_statistic_vs_normal(std::move(z));
    return out;
}

// ---------------------------------------------------------------------------
// Rate fits on tabulated positive sequences.
// ---------------------------------------------------------------------------
struct DecayFit {
    enum class Kind { power, exponential } kind = Kind::power;
    double log_a = 0, rate = 0, r2 = 0;
    std::size_t points = 0;
};

inline DecayFit decay_fit(const std::vector<std::uint64_t>& n,
                          const std::vector<double>& values,
                          DecayFit::Kind kind) {
    if (n.size() != values.size())
        throw std::invalid_argument("decay_fit: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (!(values[i] > 0)) continue;
        xs.push_back(kind == DecayFit::Kind::power ? std::log(double(n[i]))
                                                   : double(n[i]));
        ys.push_back(std::log(values[i]));
    }
    if (xs.size() < 2)
        throw std::invalid_argument("decay_fit: need >= 2 positive values");
    const auto fit = least_squares(xs, ys);
    DecayFit out;
    out.kind = kind;
    out.log_a = fit.intercept;
    out.rate = fit.slope;
    out.r2 = fit.r2;
    out.points = xs.size();
    return out;
}

}  // namespace iterkit
