#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "iterkit/fit.hpp"
#include "iterkit/models.hpp"
#include "iterkit/parallel.hpp"
#include "iterkit/quantile.hpp"
#include "iterkit/rng.hpp"

namespace iterkit {

// ---------------------------------------------------------------------------
// Block plans
// ---------------------------------------------------------------------------
struct BlockParams {
    double p = 0;
    std::string scheme;  // "thm1" or "thm2"
    double q = 0, eps = 0;
    std::uint64_t k_lo = 0, k_hi = 0;
    std::vector<double> M;            // truncation levels, index k - k_lo
    std::vector<std::uint64_t> m;     // window widths
    // thm2 extras
    double u1 = 0;
    std::uint64_t K0 = 0;
    std::vector<double> v;

    double M_at(std::uint64_t k) const { return M.at(k - k_lo); }
    std::uint64_t m_at(std::uint64_t k) const { return m.at(k - k_lo); }
};

// M_k = 3^{k/p}, m_k = floor(3^{2(1-eps)k/p})
inline BlockParams plan_blocks_thm1(double p, double q, double eps,
                                    std::uint64_t k_lo, std::uint64_t k_hi) {
    if (!(p > 2)) throw std::invalid_argument("plan_blocks_thm1: p > 2 required");
    if (!(q > (p - 1) / 2))
        throw std::invalid_argument("plan_blocks_thm1: q > (p-1)/2 required");
    const double bound = std::min(1.0 - (p - 1) / (2 * q), 0.5);
    if (!(eps > 0) || !(eps < bound))
        throw std::invalid_argument(
            "plan_blocks_thm1: eps must lie in (0, " + std::to_string(bound) +
            ")");
    if (k_lo < 1 || k_hi < k_lo)
        throw std::invalid_argument("plan_blocks_thm1: bad k range");
    BlockParams bp;
    bp.p = p;
    bp.scheme = "thm1";
    bp.q = q;
    bp.eps = eps;
    bp.k_lo = k_lo;
    bp.k_hi = k_hi;
    for (std::uint64_t k = k_lo; k <= k_hi; ++k) {
        bp.M.push_back(std::pow(3.0, double(k) / p));
        bp.m.push_back(std::uint64_t(
            std::floor(std::pow(3.0, 2.0 * (1.0 - eps) * double(k) / p) +
                       1e-9)));
    }
    return bp;
}

// v_k = inf{u in [0, u1] : R(u) <= 3^{k/p}}, M_k = Q(v_k),
// m_k = inf{n >= 0 : gamma(n) <= v_k}; M_k = m_k = 1 below K0.
inline BlockParams plan_blocks_thm2(double p, const QuantileTable& q,
                                    const GammaTables& g, std::uint64_t k_lo,
                                    std::uint64_t k_hi) {
    if (!(p > 2)) throw std::invalid_argument("plan_blocks_thm2: p > 2 required");
    if (k_lo < 1 || k_hi < k_lo)
        throw std::invalid_argument("plan_blocks_thm2: bad k range");
    const double p_pos = q.tail_u(0.0);  // P(|X1| > 0)
    if (!(p_pos > 0))
        throw std::invalid_argument(
            "plan_blocks_thm2: degenerate |X1| = 0 (sigma^2 = 0 short-circuit)");
    BlockParams bp;
    bp.p = p;
    bp.scheme = "thm2";
    bp.k_lo = k_lo;
    bp.k_hi = k_hi;
    bp.u1 = 0.5 * p_pos;
    const double Ru1 = g.R(bp.u1);

    bp.K0 = k_lo;
    {
        std::uint64_t k = 1;
        while (Ru1 > std::pow(3.0, double(k) / p) && k < 4096) ++k;
        bp.K0 = k;
    }
    for (std::uint64_t k = k_lo; k <= k_hi; ++k) {
        if (k < bp.K0) {
            bp.M.push_back(1.0);
            bp.m.push_back(1);
            bp.v.push_back(bp.u1);
            continue;
        }
        const double target = std::pow(3.0, double(k) / p);
        // R is non-increasing; bisect for the smallest u with R(u) <= target
        double lo = 0.0, hi = bp.u1;
        if (g.R(hi) > target)
            throw std::runtime_error("plan_blocks_thm2: R(u1) above target");
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g.R(mid) <= target ? hi : lo) = mid;
        }
        const double vk = hi;
        bp.v.push_back(vk);
        bp.M.push_back(q.Q(vk));
        // smallest n with gamma(n) <= vk (gamma non-increasing)
        std::uint64_t n_hi = 1;
        if (g.gamma(0) <= vk) {
            bp.m.push_back(0);
        } else {
            while (g.gamma(n_hi) > vk) {
                n_hi *= 2;
                if (n_hi > (1ull << 40))
                    throw std::runtime_error(
                        "plan_blocks_thm2: gamma does not reach v_k");
            }
            std::uint64_t n_lo = n_hi / 2;  // gamma(n_lo) > vk
            while (n_hi - n_lo > 1) {
                const std::uint64_t mid = n_lo + (n_hi - n_lo) / 2;
                (g.gamma(mid) <= vk ? n_hi : n_lo) = mid;
            }
            bp.m.push_back(n_hi);
        }
    }
    return bp;
}

// phi_k(x) = (x ^ M) v (-M); g_k(x) = x - phi_k(x)
inline std::pair<double, double> truncate_level(double x, double M) {
    if (!(M > 0)) throw std::invalid_argument("truncate_level: M > 0 required");
    const double phi = std::min(std::max(x, -M), M);
    return {phi, x - phi};
}

// ---------------------------------------------------------------------------
// Stationary mean of phi_k(X1) (needed to center the nested estimators).
// Exact for the discrete chain; Monte Carlo otherwise.
// ---------------------------------------------------------------------------
template <class Model>
double stationary_mean_phi(const Model& model, double Mk, std::uint64_t reps,
                           std::uint64_t seed) {
    if constexpr (std::is_same_v<Model, DiscreteRenewal>) {
        (void)reps;
        (void)seed;
        double s = 0;
        const auto& nu = model.nu();
        for (std::size_t j = 0; j < nu.size(); ++j)
            s += nu[j] * truncate_level(model.f(std::int64_t(j)), Mk).first;
        return s;
    } else {
        double s = 0;
        for (std::uint64_t i = 0; i < reps; ++i) {
            rng::Stream g(seed, 0x30, i);
            auto w = model.sample_stationary(g);
            const auto e = model.sample_innovation(g);
            s += truncate_level(model.observe(e, w), Mk).first;
        }
        return s / double(reps);
    }
}

// ---------------------------------------------------------------------------
// Nested-MC realization of X~_{k,j}: the innovation window
// (eps_{j-m_k}, ..., eps_j) is held fixed and the pre-window state is
// resampled from nu `inner` times.  For discrete chains with a small
// stationary support the resampled starts are deduplicated and evolved once
// per distinct state (identical estimator, fewer chain steps).
// ---------------------------------------------------------------------------
namespace detail {

template <class Model>
double xtilde_estimate(const Model& model,
                       const std::vector<typename Model::innov_type>& e,
                       std::size_t win_lo, std::size_t win_len, double Mk,
                       std::uint64_t inner, rng::Stream& g) {
    // window innovations e[win_lo .. win_lo+win_len]; the last one feeds the
    // observable, the first win_len drive the state
    if constexpr (std::is_same_v<Model, DiscreteRenewal>) {
        if (model.support_size() <= 64) {
            std::map<std::int64_t, std::uint64_t> counts;
            for (std::uint64_t i = 0; i < inner; ++i)
                ++counts[model.sample_stationary(g)];
            double acc = 0;
            for (auto& [start, cnt] : counts) {
                auto s = start;
                for (std::size_t t = 0; t < win_len; ++t)
                    s = model.step(e[win_lo + t], s);
                const double x = model.observe(e[win_lo + win_len], s);
                acc += double(cnt) * truncate_level(x, Mk).first;
            }
            return acc / double(inner);
        }
    }
    double acc = 0;
    for (std::uint64_t i = 0; i < inner; ++i) {
        auto s = model.sample_stationary(g);
        for (std::size_t t = 0; t < win_len; ++t)
            s = model.step(e[win_lo + t], s);
        acc += truncate_level(model.observe(e[win_lo + win_len], s), Mk).first;
    }
    return acc / double(inner);
}

struct MomentAcc {
    double sum = 0, sum2 = 0;
    std::uint64_t n = 0;
    void add(double x) {
        sum += x;
        sum2 += x * x;
        ++n;
    }
    void merge(const MomentAcc& o) {
        sum += o.sum;
        sum2 += o.sum2;
        n += o.n;
    }
    Estimate estimate() const {
        Estimate e;
        e.count = n;
        if (n == 0) return e;
        e.value = sum / double(n);
        if (n > 1) {
            const double var = std::max(
                0.0, (sum2 - sum * sum / double(n)) / double(n - 1));
            e.se = std::sqrt(var / double(n));
        }
        return e;
    }
};

}  // namespace detail

struct NuEntry {
    std::uint64_t k = 0, m = 0;
    double M = 0;
    Estimate direct;  // (defnuk) assembly
    Estimate cov;     // (nuk1) covariance assembly from the same draws
};

struct NuTable {
    std::vector<NuEntry> entries;
    std::uint64_t outer = 0, inner = 0;
};

template <class Model>
NuTable estimate_nu_k(const Model& model, const BlockParams& bp,
                      std::uint64_t outer, std::uint64_t inner,
                      std::uint64_t seed, unsigned n_threads = 1) {
    if (inner < 32)
        throw std::invalid_argument("estimate_nu_k: inner >= 32 required");
    NuTable out;
    out.outer = outer;
    out.inner = inner;
    for (std::uint64_t k = bp.k_lo; k <= bp.k_hi; ++k) {
        const std::uint64_t m = bp.m_at(k);
        const double Mk = bp.M_at(k);
        if (m < 1) throw std::invalid_argument("estimate_nu_k: m_k >= 1");
        const double mu =
            stationary_mean_phi(model, Mk, 1'000'000, seed ^ (0xA0 + k));

        struct Acc {
            detail::MomentAcc direct, cov;
        };
        auto total = parallel_paths(
            outer, n_threads, [] { return Acc{}; },
            [&](Acc& a, std::uint64_t path) {
                rng::Stream g(seed, 0x3100 + k, path);
                // innovations for times (1-m) .. 2m  ->  3m values
                std::vector<typename Model::innov_type> e;
                e.reserve(3 * m);
                for (std::uint64_t t = 0; t < 3 * m; ++t)
                    e.push_back(model.sample_innovation(g));
                // X~_{k,j} - E phi for j = 1..2m; window of j starts at
                // index j - 1 (time j - m) and spans m+1 innovations
                std::vector<double> xt(2 * m);
                for (std::uint64_t j = 1; j <= 2 * m; ++j)
                    xt[j - 1] = detail::xtilde_estimate(model, e, j - 1, m, Mk,
                                                        inner, g) -
                                mu;
                double A = 0, B = 0;
                for (std::uint64_t j = 0; j < m; ++j) A += xt[j];
                for (std::uint64_t j = m; j < 2 * m; ++j) B += xt[j];
                a.direct.add((A * A + 2.0 * A * B) / double(m));
                // covariance form: c0 + 2 sum_{l=1..m} c_l
                double v = 0;
                for (std::uint64_t l = 0; l <= m; ++l) {
                    double c = 0;
                    for (std::uint64_t j = 0; j + l < 2 * m; ++j)
                        c += xt[j] * xt[j + l];
                    c /= double(2 * m - l);
                    v += (l == 0 ? 1.0 : 2.0) * c;
                }
                a.cov.add(v);
            },
            [](Acc& a, Acc&& b) {
                a.direct.merge(b.direct);
                a.cov.merge(b.cov);
            },
            /*block_size=*/256);

        NuEntry entry;
        entry.k = k;
        entry.m = m;
        entry.M = Mk;
        entry.direct = total.direct.estimate();
        entry.cov = total.cov.estimate();
        out.entries.push_back(entry);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Appendix inequality:  ||X_{k,j} - X~_{k,j}||_q^q  <=
//   iint E|X_{m_k+1,x} - X_{m_k+1,y}|^q nu(dx) nu(dy)
// ---------------------------------------------------------------------------
struct TildeCheck {
    double lhs = 0, lhs_se = 0;
    double rhs = 0, rhs_se = 0;
    bool holds = false;  // lhs <= rhs + 3 * combined se
};

template <class Model>
TildeCheck check_tilde_distance(const Model& model, std::uint64_t m, double Mk,
                                double q, std::uint64_t reps,
                                std::uint64_t inner, std::uint64_t seed,
                                unsigned n_threads = 1) {
    if (q != 1.0 && q != 2.0)
        throw std::invalid_argument("check_tilde_distance: q in {1,2}");
    struct Acc {
        detail::MomentAcc lhs, rhs;
    };
    auto total = parallel_paths(
        reps, n_threads, [] { return Acc{}; },
        [&](Acc& a, std::uint64_t path) {
            // LHS draw: true pre-window state + nested estimate of X~
            {
                rng::Stream g(seed, 0x41, path);
                std::vector<typename Model::innov_type> e;
                e.reserve(m + 1);
                for (std::uint64_t t = 0; t <= m; ++t)
                    e.push_back(model.sample_innovation(g));
                auto w = model.sample_stationary(g);
                for (std::uint64_t t = 0; t < m; ++t) w = model.step(e[t], w);
                const double x =
                    truncate_level(model.observe(e[m], w), Mk).first;
                const double xt = detail::xtilde_estimate(model, e, 0, m, Mk,
                                                          inner, g);
                a.lhs.add(std::pow(std::abs(x - xt), q));
            }
            // RHS draw: coupled pair from independent stationary starts
            {
                rng::Stream g(seed, 0x42, path);
                auto x0 = model.sample_stationary(g);
                auto y0 = model.sample_stationary(g);
                double xv = 0, yv = 0;
                for (std::uint64_t t = 0; t <= m; ++t) {
                    const auto e = model.sample_innovation(g);
                    if (t == m) {
                        xv = model.observe(e, x0);
                        yv = model.observe(e, y0);
                    } else {
                        x0 = model.step(e, x0);
                        y0 = model.step(e, y0);
                    }
                }
                a.rhs.add(std::pow(std::abs(xv - yv), q));
            }
        },
        [](Acc& a, Acc&& b) {
            a.lhs.merge(b.lhs);
            a.rhs.merge(b.rhs);
        });
    TildeCheck out;
    const Estimate l = total.lhs.estimate(), r = total.rhs.estimate();
    out.lhs = l.value;
    out.lhs_se = l.se;
    out.rhs = r.value;
    out.rhs_se = r.se;
    // the 1e-12 absolute slack covers degenerate fixtures where both sides
    // are zero up to summation rounding
    out.holds = out.lhs <=
                out.rhs + 3.0 * std::sqrt(l.se * l.se + r.se * r.se) + 1e-12;
    return out;
}

// ---------------------------------------------------------------------------
// numeric surrogates for the Proposition's remaining conditions
// ---------------------------------------------------------------------------

// truncation series terms 3^{k(p-1)/p} E|g_k(X1)| with
// E|g_k(X1)| = int_0^{v_k} Q (v_k = upper tail of M_k for thm1 plans)
struct TruncationReport {
    std::vector<std::uint64_t> k;
    std::vector<double> v, term;
    std::uint64_t nonzero_terms = 0;
};

inline TruncationReport eval_truncation_condition(const BlockParams& bp,
                                                  const QuantileTable& q) {
    TruncationReport rep;
    for (std::uint64_t k = bp.k_lo; k <= bp.k_hi; ++k) {
        const double vk = bp.scheme == "thm2" && !bp.v.empty()
                              ? bp.v.at(k - bp.k_lo)
                              : q.tail_u(bp.M_at(k));
        const double term =
            std::pow(3.0, double(k) * (bp.p - 1) / bp.p) * q.H(vk);
        rep.k.push_back(k);
        rep.v.push_back(vk);
        rep.term.push_back(term);
        if (term > 0) ++rep.nonzero_terms;
    }
    return rep;
}

// surrogate trajectory r_k = 3^{k(p-2)/p} |nu_k - sigma^2|; a decreasing
// trajectory supports (cond2v_k)
struct SurrogateReport {
    std::vector<std::uint64_t> k;
    std::vector<double> r;
    double slope = 0;  // least-squares slope of log r_k vs k
    bool decreasing = false;
};

inline SurrogateReport eval_cond2vk_surrogate(const BlockParams& bp,
                                              const NuTable& nu,
                                              double sigma2) {
    SurrogateReport rep;
    std::vector<double> xs, ys;
    for (const auto& e : nu.entries) {
        const double rk = std::pow(3.0, double(e.k) * (bp.p - 2) / bp.p) *
                          std::abs(e.direct.value - sigma2);
        rep.k.push_back(e.k);
        rep.r.push_back(rk);
        if (rk > 0) {
            xs.push_back(double(e.k));
            ys.push_back(std::log(rk));
        }
    }
    if (xs.size() >= 2) {
        rep.slope = least_squares(xs, ys).slope;
        rep.decreasing = rep.slope < 0;
    } else {
        rep.decreasing = true;  // identically zero trajectory
    }
    return rep;
}

}  // namespace iterkit
