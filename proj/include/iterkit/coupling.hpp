#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "iterkit/fit.hpp"
#include "iterkit/models.hpp"
#include "iterkit/parallel.hpp"
#include "iterkit/rng.hpp"

namespace iterkit {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------
template <class Model>
struct CoupledPath {
    std::vector<typename Model::state_type> W, Wstar;  // indices 0..n
    std::vector<double> X, Xstar;                      // indices 1..n at [k-1]
    std::optional<std::uint64_t> meeting_index;
    bool burnin_fallback = false;  // stationary init approximated by burn-in
};

struct DeltaTable {
    enum class Flavor { L1, Linf };
    Flavor flavor = Flavor::L1;
    std::vector<std::uint64_t> n;  // grid
    std::vector<double> value, se;
    bool envelope_applied = false;
    double mean_abs_X = 0;
    bool design_lower_bound = false;  // Linf estimates restricted to a design
};

struct SurvivalTable {
    std::vector<double> survival, se;      // index n = 0..cap
    std::vector<std::uint64_t> survivors;  // paths with T* >= n
    std::uint64_t n_paths = 0;
    std::uint64_t cap = 0;
    std::uint64_t censored = 0;  // paths that never met within the cap
};

template <class Model>
struct InitPolicy {
    enum class Kind { identical, independent_stationary, fixed_pair } kind =
        Kind::independent_stationary;
    typename Model::state_type x{}, y{};  // for fixed_pair

    static InitPolicy identical() { return {Kind::identical, {}, {}}; }
    static InitPolicy independent_stationary() {
        return {Kind::independent_stationary, {}, {}};
    }
    static InitPolicy fixed_pair(typename Model::state_type a,
                                 typename Model::state_type b) {
        return {Kind::fixed_pair, std::move(a), std::move(b)};
    }
};

// ---------------------------------------------------------------------------
// Coupled simulation
// ---------------------------------------------------------------------------
template <class Model>
std::pair<typename Model::state_type, typename Model::state_type>
draw_initial_pair(const Model& model, const InitPolicy<Model>& init,
                  rng::Stream& g, bool* burnin_flag = nullptr) {
    using K = typename InitPolicy<Model>::Kind;
    switch (init.kind) {
        case K::identical: {
            auto s = model.sample_stationary(g);
            return {s, s};
        }
        case K::fixed_pair:
            return {init.x, init.y};
        case K::independent_stationary:
        default: {
            if (burnin_flag && !model.has_exact_stationary())
                *burnin_flag = true;
            auto a = model.sample_stationary(g);
            auto b = model.sample_stationary(g);
            return {a, b};
        }
    }
}

template <class Model>
CoupledPath<Model> simulate_coupled(const Model& model, std::uint64_t n,
                                    const InitPolicy<Model>& init,
                                    std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("simulate_coupled: n >= 1");
    rng::Stream g(seed, 0x21, 0);
    CoupledPath<Model> path;
    auto [w, ws] = draw_initial_pair(model, init, g, &path.burnin_fallback);
    path.W.push_back(w);
    path.Wstar.push_back(ws);
    bool met = Model::states_equal(w, ws);
    if (met) path.meeting_index = 0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        const auto e = model.sample_innovation(g);
        path.X.push_back(model.observe(e, w));
        path.Xstar.push_back(model.observe(e, ws));
        w = model.step(e, w);
        ws = met ? w : model.step(e, ws);  // coalescence is absorbing
        if (!met && Model::states_equal(w, ws)) {
            met = true;
            path.meeting_index = k;
        }
        path.W.push_back(w);
        path.Wstar.push_back(ws);
    }
    return path;
}

// ---------------------------------------------------------------------------
// ||X_k - X*_k||_1 over independent stationary starts, k = 1..k_max
// ---------------------------------------------------------------------------
template <class Model>
struct PairwiseL1 {
    std::vector<Estimate> per_k;  // index k-1
    Estimate mean_abs_X;
    bool burnin_fallback = false;
};

template <class Model>
PairwiseL1<Model> estimate_pairwise_L1(const Model& model, std::uint64_t k_max,
                                       std::uint64_t n_paths,
                                       std::uint64_t seed,
                                       unsigned n_threads = 1) {
    struct Acc {
        std::vector<double> sum, sum2;
        double abs_sum = 0, abs_sum2 = 0;
        std::uint64_t n = 0;
        bool burnin = false;
    };
    auto init = InitPolicy<Model>::independent_stationary();
    auto total = parallel_paths(
        n_paths, n_threads,
        [&] {
            Acc a;
            a.sum.assign(k_max, 0.0);
            a.sum2.assign(k_max, 0.0);
            return a;
        },
        [&](Acc& a, std::uint64_t path) {
            rng::Stream g(seed, 0x22, path);
            auto [w, ws] = draw_initial_pair(model, init, g, &a.burnin);
            bool met = Model::states_equal(w, ws);
            for (std::uint64_t k = 0; k < k_max; ++k) {
                const auto e = model.sample_innovation(g);
                const double x = model.observe(e, w);
                const double xs = met ? x : model.observe(e, ws);
                const double d = std::abs(x - xs);
                a.sum[k] += d;
                a.sum2[k] += d * d;
                if (k == 0) {
                    a.abs_sum += std::abs(x);
                    a.abs_sum2 += x * x;
                }
                w = model.step(e, w);
                ws = met ? w : model.step(e, ws);
                met = met || Model::states_equal(w, ws);
            }
            ++a.n;
        },
        [](Acc& a, Acc&& b) {
            for (std::size_t k = 0; k < a.sum.size(); ++k) {
                a.sum[k] += b.sum[k];
                a.sum2[k] += b.sum2[k];
            }
            a.abs_sum += b.abs_sum;
            a.abs_sum2 += b.abs_sum2;
            a.n += b.n;
            a.burnin = a.burnin || b.burnin;
        });

    PairwiseL1<Model> out;
    out.burnin_fallback = total.burnin;
    auto mk = [&](double s, double s2) {
        Estimate e;
        e.count = total.n;
        e.value = s / double(total.n);
        const double var = std::max(
            0.0, (s2 - s * s / double(total.n)) / double(total.n - 1));
        e.se = std::sqrt(var / double(total.n));
        return e;
    };
    for (std::uint64_t k = 0; k < k_max; ++k)
        out.per_k.push_back(mk(total.sum[k], total.sum2[k]));
    out.mean_abs_X = mk(total.abs_sum, total.abs_sum2);
    return out;
}

// ---------------------------------------------------------------------------
// delta(n) envelope: delta(0) = delta(1) = E|X1|,
// delta(n) = (1/2) sup_{k >= n-1} ||X_k - X*_k||_1 for n >= 2.
// ---------------------------------------------------------------------------
inline DeltaTable delta_envelope(const std::vector<Estimate>& l1_per_k,
                                 const Estimate& mean_abs_X) {
    const std::size_t K = l1_per_k.size();
    if (K == 0) throw std::invalid_argument("delta_envelope: empty table");
    DeltaTable t;
    t.flavor = DeltaTable::Flavor::L1;
    t.envelope_applied = true;
    t.mean_abs_X = mean_abs_X.value;
    // suffix sup over k >= n-1 (1-based k)
    std::vector<double> sup(K + 1, 0.0), sup_se(K + 1, 0.0);
    for (std::size_t k = K; k-- > 0;) {
        if (k + 1 < K && sup[k + 1] > l1_per_k[k].value) {
            sup[k] = sup[k + 1];
            sup_se[k] = sup_se[k + 1];
        } else {
            sup[k] = l1_per_k[k].value;
            sup_se[k] = l1_per_k[k].se;
        }
    }
    t.n.push_back(0);
    t.value.push_back(mean_abs_X.value);
    t.se.push_back(mean_abs_X.se);
    t.n.push_back(1);
    t.value.push_back(mean_abs_X.value);
    t.se.push_back(mean_abs_X.se);
    for (std::size_t n = 2; n <= K + 1; ++n) {
        double v = 0.5 * sup[n - 2];
        double s = 0.5 * sup_se[n - 2];
        if (v > t.value.back()) v = t.value.back();  // keep monotone under noise
        t.n.push_back(n);
        t.value.push_back(v);
        t.se.push_back(s);
    }
    return t;
}

// ---------------------------------------------------------------------------
// delta_inf(n) over a finite design of initial pairs (design-restricted
// lower bound of the essential supremum).
// ---------------------------------------------------------------------------
template <class Model>
DeltaTable estimate_delta_inf(
    const Model& model, const std::vector<std::uint64_t>& n_grid,
    const std::vector<std::pair<typename Model::state_type,
                                typename Model::state_type>>& design,
    std::uint64_t inner_reps, std::uint64_t seed, unsigned n_threads = 1) {
    if (design.empty())
        throw std::invalid_argument("estimate_delta_inf: empty design");
    std::uint64_t n_max = 0;
    for (auto n : n_grid) n_max = std::max(n_max, n);
    if (n_max < 1) throw std::invalid_argument("estimate_delta_inf: empty grid");

    DeltaTable t;
    t.flavor = DeltaTable::Flavor::Linf;
    t.design_lower_bound = true;
    t.n = n_grid;
    t.value.assign(n_grid.size(), 0.0);
    t.se.assign(n_grid.size(), 0.0);

    struct Acc {
        std::vector<double> best, best_se;
    };
    // one "path" per design pair; inner MC inside
    auto total = parallel_paths(
        design.size(), n_threads,
        [&] {
            Acc a;
            a.best.assign(n_grid.size(), 0.0);
            a.best_se.assign(n_grid.size(), 0.0);
            return a;
        },
        [&](Acc& a, std::uint64_t pair_idx) {
            std::vector<double> sum(n_grid.size(), 0.0),
                sum2(n_grid.size(), 0.0);
            for (std::uint64_t rep = 0; rep < inner_reps; ++rep) {
                rng::Stream g(seed, 0x23,
                              pair_idx * inner_reps + rep);
                auto w = design[pair_idx].first;
                auto ws = design[pair_idx].second;
                bool met = Model::states_equal(w, ws);
                std::size_t gi = 0;
                for (std::uint64_t k = 1; k <= n_max; ++k) {
                    const auto e = model.sample_innovation(g);
                    const double x = model.observe(e, w);
                    const double xs = met ? x : model.observe(e, ws);
                    w = model.step(e, w);
                    ws = met ? w : model.step(e, ws);
                    met = met || Model::states_equal(w, ws);
                    while (gi < n_grid.size() && n_grid[gi] == k) {
                        sum[gi] += std::abs(x - xs);
                        sum2[gi] += (x - xs) * (x - xs);
                        ++gi;
                    }
                }
            }
            for (std::size_t i = 0; i < n_grid.size(); ++i) {
                const double m = sum[i] / double(inner_reps);
                const double var = std::max(
                    0.0, (sum2[i] - sum[i] * m) / double(inner_reps - 1));
                const double se = std::sqrt(var / double(inner_reps));
                if (m > a.best[i]) {
                    a.best[i] = m;
                    a.best_se[i] = se;
                }
            }
        },
        [](Acc& a, Acc&& b) {
            for (std::size_t i = 0; i < a.best.size(); ++i)
                if (b.best[i] > a.best[i]) {
                    a.best[i] = b.best[i];
                    a.best_se[i] = b.best_se[i];
                }
        },
        /*block_size=*/1);
    t.value = total.best;
    t.se = total.best_se;
    return t;
}

// ---------------------------------------------------------------------------
// Meeting-time survival
// ---------------------------------------------------------------------------
template <class Model>
SurvivalTable sample_meeting_times(const Model& model, std::uint64_t cap,
                                   std::uint64_t n_paths, std::uint64_t seed,
                                   unsigned n_threads = 1) {
    if (cap < 1) throw std::invalid_argument("sample_meeting_times: cap >= 1");
    if (model.family() == Family::matrix_walk)
        throw std::invalid_argument(
            "sample_meeting_times: meetings undefined for matrix walks");
    struct Acc {
        std::vector<std::uint64_t> met_at;  // T* = t, t = 0..cap-1
        std::uint64_t censored = 0, n = 0;
    };
    auto init = InitPolicy<Model>::independent_stationary();
    auto total = parallel_paths(
        n_paths, n_threads,
        [&] {
            Acc a;
            a.met_at.assign(cap, 0);
            return a;
        },
        [&](Acc& a, std::uint64_t path) {
            rng::Stream g(seed, 0x24, path);
            auto [w, ws] = draw_initial_pair(model, init, g);
            ++a.n;
            if (Model::states_equal(w, ws)) {
                ++a.met_at[0];
                return;
            }
            for (std::uint64_t k = 1; k < cap; ++k) {
                const auto e = model.sample_innovation(g);
                w = model.step(e, w);
                ws = model.step(e, ws);
                if (Model::states_equal(w, ws)) {
                    ++a.met_at[k];
                    return;
                }
            }
            ++a.censored;
        },
        [](Acc& a, Acc&& b) {
            for (std::size_t i = 0; i < a.met_at.size(); ++i)
                a.met_at[i] += b.met_at[i];
            a.censored += b.censored;
            a.n += b.n;
        });

    SurvivalTable t;
    t.n_paths = total.n;
    t.cap = cap;
    t.censored = total.censored;
    std::uint64_t alive = total.n;
    for (std::uint64_t n = 0; n <= cap; ++n) {
        t.survivors.push_back(alive);
        const double p = double(alive) / double(total.n);
        t.survival.push_back(p);
        t.se.push_back(std::sqrt(p * (1 - p) / double(total.n)));
        if (n < cap) alive -= total.met_at[n];
    }
    return t;
}

// Least-squares slope of log survival vs log n over the window; uses only
// grid points with at least 20 surviving samples.
inline SlopeFit fit_tail_slope(const SurvivalTable& table, std::uint64_t n_min,
                               std::uint64_t n_max) {
    std::vector<double> xs, ys;
    for (std::uint64_t n = n_min; n <= std::min<std::uint64_t>(n_max, table.cap);
         ++n) {
        if (table.survivors[n] < 20) {
            if (xs.size() < 4)
                throw std::runtime_error(
                    "fit_tail_slope: fewer than 20 survivors at n = " +
                    std::to_string(n));
            break;
        }
        xs.push_back(std::log(double(n)));
        ys.push_back(std::log(table.survival[n]));
    }
    if (xs.size() < 4)
        throw std::runtime_error("fit_tail_slope: fewer than 4 usable points");
    return least_squares(xs, ys);
}

// Synthetic-table variant (used by diagnostics and tests).
inline SlopeFit fit_tail_slope(const std::vector<std::uint64_t>& n,
                               const std::vector<double>& value) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] == 0 || value[i] <= 0) continue;
        xs.push_back(std::log(double(n[i])));
        ys.push_back(std::log(value[i]));
    }
    if (xs.size() < 4)
        throw std::runtime_error("fit_tail_slope: fewer than 4 usable points");
    return least_squares(xs, ys);
}

// ---------------------------------------------------------------------------
// Exact oracles for the discrete renewal chain (implemented in discrete_dp.cpp)
// ---------------------------------------------------------------------------

// P_{nu (x) nu}(T* >= n) for n = 0..n_max by forward DP on the coupled pair
// chain under shared innovations, diagonal absorbing.  state_cap bounds the
// tracked pair gap; the neglected probability mass must stay below 1e-10 or
// the call throws with the required cap.
std::vector<double> exact_pair_tail_discrete(const DiscreteRenewalSpec& spec,
                                             std::uint64_t n_max,
                                             std::uint64_t state_cap);

// P_nu(tau >= n) for n = 0..n_max from first principles:
// from start l >= 1 tau = l, from start 0 tau = eps.
std::vector<double> exact_return_tail_discrete(const DiscreteRenewalSpec& spec,
                                               std::uint64_t n_max);

struct TVCheck {
    std::vector<double> beta;       // beta(n), n = 0..n_max
    std::vector<double> pair_tail;  // P(T* >= n)
    std::vector<std::uint64_t> violations;  // n where beta > tail (expect none)
};

// beta(n) = sum_x nu_x * TV(delta_x P^n, nu) by marginal DP, paired with the
// exact pair tail; discrete chains with explicit p_seq only.
TVCheck tv_coupling_bound_check(const DiscreteRenewalSpec& spec,
                                std::uint64_t n_max, std::uint64_t state_cap);

}  // namespace iterkit
