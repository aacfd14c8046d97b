#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "iterkit/coupling.hpp"
#include "iterkit/models.hpp"

namespace iterkit {

namespace {

// Off-diagonal pairs slide down the diagonal deterministically, so the pair
// chain only branches when its smaller coordinate hits 0.  The DP therefore
// tracks f[t][m] = probability of reaching configuration (0, m) at time t
// without having met.  From (0, m) with innovation eps:
//   eps == m : the chains meet at time t+1;
//   eps <  m : next (0, m - eps) at time t + eps;
//   eps >  m : next (0, eps - m) at time t + m.
// Configurations that can only produce meetings after the horizon are
// counted as surviving and dropped.
constexpr double kMassBudget = 1e-10;

}  // namespace

std::vector<double> exact_pair_tail_discrete(const DiscreteRenewalSpec& spec,
                                             std::uint64_t n_max,
                                             std::uint64_t state_cap) {
    if (n_max < 1)
        throw std::invalid_argument("exact_pair_tail_discrete: n_max >= 1");
    DiscreteRenewal model(spec);
    const auto& p = model.pmf();  // p[k-1] = P(eps = k)
    const auto& nu = model.nu();
    const std::size_t L = p.size();

    // suffix tails of p and nu
    std::vector<double> p_tail(L + 2, 0.0);  // p_tail[k] = P(eps >= k), k >= 1
    for (std::size_t k = L; k >= 1; --k) p_tail[k] = p_tail[k + 1] + p[k - 1];
    auto eps_ge = [&](std::uint64_t k) {
        if (k <= 1) return 1.0;
        return k <= L ? p_tail[k] : 0.0;
    };
    std::vector<double> nu_sq_tail(nu.size() + 1, 0.0);
    for (std::size_t j = nu.size(); j-- > 0;)
        nu_sq_tail[j] = nu_sq_tail[j + 1] + nu[j] * nu[j];

    // Truncation budget: meetings we might miss require an innovation of at
    // least state_cap - n_max at some regeneration within the horizon.
    if (state_cap <= n_max + 1)
        throw std::invalid_argument(
            "exact_pair_tail_discrete: state_cap must exceed n_max");
    const std::uint64_t G = state_cap;  // tracked gap bound
    {
        const double miss = double(n_max) * eps_ge(G - n_max);
        if (miss >= kMassBudget) {
            std::uint64_t need = G;
            while (need < n_max + L + 2 &&
                   double(n_max) * eps_ge(need - n_max) >= kMassBudget)
                need += std::max<std::uint64_t>(need / 4, 64);
            throw std::invalid_argument(
                "exact_pair_tail_discrete: truncation budget exceeded; "
                "state_cap >= " +
                std::to_string(need) + " required");
        }
    }

    // f[t][m], t = 0..n_max, m = 1..G
    std::vector<std::vector<double>> f(n_max + 1,
                                       std::vector<double>(G + 1, 0.0));
    std::vector<double> met(n_max + 1, 0.0);  // met[s] = P(T* = s), s >= 1
    const double met0 = nu_sq_tail[0];        // diagonal of nu (x) nu

    // Initial nu (x) nu mass: ordered pair (i, j), i < j enters (0, j-i) at
    // time i.  Pairs whose smaller coordinate is >= n_max survive the whole
    // horizon, as do pairs with gap > G (within the mass budget).
    for (std::uint64_t i = 0; i < std::min<std::uint64_t>(n_max, nu.size());
         ++i) {
        const double ni = nu[i];
        if (ni == 0.0) continue;
        const std::uint64_t g_hi =
            std::min<std::uint64_t>(G, nu.size() > i ? nu.size() - 1 - i : 0);
        for (std::uint64_t m = 1; m <= g_hi; ++m)
            f[i][m] += 2.0 * ni * nu[i + m];
    }

    for (std::uint64_t t = 0; t < n_max; ++t) {
        const std::uint64_t horizon = n_max - t;  // arrivals beyond survive
        auto& row = f[t];
        for (std::uint64_t m = 1; m <= G; ++m) {
            const double mass = row[m];
            if (mass == 0.0) continue;
            // meeting: eps == m
            if (m <= L) met[t + 1] += mass * p[m - 1];
            // eps < m: arrival (0, m-eps) at t+eps; arrivals at or beyond
            // n_max can only meet after the horizon and count as surviving
            const std::uint64_t e_hi =
                std::min<std::uint64_t>({m - 1, horizon - 1, L});
            for (std::uint64_t e = 1; e <= e_hi; ++e)
                f[t + e][m - e] += mass * p[e - 1];
            // eps > m: arrival (0, eps-m) at t+m; gaps above G are surviving
            // within the mass budget
            if (m + 1 <= horizon) {
                const std::uint64_t eps_hi = std::min<std::uint64_t>(L, m + G);
                for (std::uint64_t e = m + 1; e <= eps_hi; ++e)
                    f[t + m][e - m] += mass * p[e - 1];
            }
        }
        row.clear();
        row.shrink_to_fit();
    }

    // P(T* >= n) = 1 - met0 - sum_{s=1}^{n-1} met[s]
    std::vector<double> tail(n_max + 1, 1.0);
    double met_cum = met0;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        tail[n] = std::max(0.0, 1.0 - met_cum);
        met_cum += met[n];
    }
    return tail;
}

std::vector<double> exact_return_tail_discrete(const DiscreteRenewalSpec& spec,
                                               std::uint64_t n_max) {
    DiscreteRenewal model(spec);
    const auto& p = model.pmf();
    const auto& nu = model.nu();
    const std::size_t L = p.size();
    std::vector<double> p_suffix(L + 2, 0.0);
    for (std::size_t k = L; k >= 1; --k)
        p_suffix[k] = (k + 1 <= L ? p_suffix[k + 1] : 0.0) + p[k - 1];
    std::vector<double> nu_suffix(nu.size() + 1, 0.0);
    for (std::size_t j = nu.size(); j-- > 0;)
        nu_suffix[j] = nu_suffix[j + 1] + nu[j];

    std::vector<double> tail(n_max + 1, 1.0);
    for (std::uint64_t n = 2; n <= n_max; ++n) {
        const double eps_ge_n = n <= L ? p_suffix[n] : 0.0;
        const double nu_ge_n = n < nu.size() ? nu_suffix[n] : 0.0;
        tail[n] = model.nu0() * eps_ge_n + nu_ge_n;
    }
    return tail;
}

TVCheck tv_coupling_bound_check(const DiscreteRenewalSpec& spec,
                                std::uint64_t n_max, std::uint64_t state_cap) {
    if (spec.p_seq.empty())
        throw std::invalid_argument(
            "tv_coupling_bound_check: explicit p_seq required");
    DiscreteRenewal model(spec);
    const auto& p = model.pmf();
    const auto& nu = model.nu();
    const std::size_t S = p.size();  // states 0..S-1 are closed under P

    TVCheck out;
    out.pair_tail = exact_pair_tail_discrete(spec, n_max, state_cap);
    out.beta.assign(n_max + 1, 0.0);

    for (std::size_t x = 0; x < nu.size(); ++x) {
        if (nu[x] == 0.0) continue;
        std::vector<double> mu(S, 0.0);
        mu[x] = 1.0;
        for (std::uint64_t n = 0; n <= n_max; ++n) {
            double tv = 0;
            for (std::size_t w = 0; w < S; ++w)
                tv += std::abs(mu[w] - (w < nu.size() ? nu[w] : 0.0));
            out.beta[n] += 0.5 * nu[x] * tv;
            if (n == n_max) break;
            std::vector<double> nxt(S, 0.0);
            for (std::size_t w = 1; w < S; ++w) nxt[w - 1] += mu[w];
            if (mu[0] > 0)
                for (std::size_t k = 1; k <= S; ++k)
                    nxt[k - 1] += mu[0] * p[k - 1];
            mu = std::move(nxt);
        }
    }
    for (std::uint64_t n = 0; n <= n_max; ++n)
        if (out.beta[n] > out.pair_tail[n] + 1e-12) out.violations.push_back(n);
    return out;
}

}  // namespace iterkit
