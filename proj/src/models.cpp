#include "iterkit/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iterkit/parallel.hpp"

namespace iterkit {

// ---------------------------------------------------------------------------
// Mat
// ---------------------------------------------------------------------------
std::vector<double> Mat::apply(const std::vector<double>& x) const {
    std::vector<double> y(std::size_t(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += at(i, j) * x[std::size_t(j)];
        y[std::size_t(i)] = s;
    }
    return y;
}

Mat Mat::inverse() const {
    // Gauss-Jordan with partial pivoting.
    const int n = d;
    std::vector<double> m(a);
    Mat inv(n, std::vector<double>(std::size_t(n) * n, 0.0));
    for (int i = 0; i < n; ++i) inv.at(i, i) = 1.0;
    auto M = [&](int i, int j) -> double& { return m[std::size_t(i) * n + j]; };
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(M(r, c)) > std::abs(M(piv, c))) piv = r;
        if (std::abs(M(piv, c)) < 1e-14)
            throw std::invalid_argument("matrix walk: singular matrix in ensemble");
        if (piv != c)
            for (int j = 0; j < n; ++j) {
                std::swap(M(piv, j), M(c, j));
                std::swap(inv.at(piv, j), inv.at(c, j));
            }
        const double pv = M(c, c);
        for (int j = 0; j < n; ++j) {
            M(c, j) /= pv;
            inv.at(c, j) /= pv;
        }
        for (int r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = M(r, c);
            if (f == 0) continue;
            for (int j = 0; j < n; ++j) {
                M(r, j) -= f * M(c, j);
                inv.at(r, j) -= f * inv.at(c, j);
            }
        }
    }
    return inv;
}

double Mat::op_norm() const {
    // power iteration on A^T A from a fixed deterministic start
    std::vector<double> v(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) v[std::size_t(i)] = 1.0 / std::sqrt(double(d) + i);
    double nv = norm2(v);
    for (auto& c : v) c /= nv;
    double lambda = 0;
    for (int it = 0; it < 200; ++it) {
        auto av = apply(v);
        // w = A^T (A v)
        std::vector<double> w(std::size_t(d), 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                w[std::size_t(j)] += at(i, j) * av[std::size_t(i)];
        const double nw = norm2(w);
        if (nw == 0) return 0;
        for (auto& c : w) c /= nw;
        v = std::move(w);
        lambda = nw;
    }
    return std::sqrt(lambda);
}

double norm2(const std::vector<double>& x) {
    double s = 0;
    for (double c : x) s += c * c;
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// canonical AR map
// ---------------------------------------------------------------------------
double ar_f(double t, double C, double tau) {
    if (!(tau > 0) || !(tau < 1))
        throw std::invalid_argument("ar_f: tau in (0,1) required");
    if (!(C > 0) || !(C <= 1))
        throw std::invalid_argument("ar_f: C in (0,1] required");
    const double x = std::abs(t);
    const double val =
        x - C * (std::pow(1.0 + x, 1.0 - tau) - 1.0) / (1.0 - tau);
    return t < 0 ? -val : val;
}

double ar_f_prime(double t, double C, double tau) {
    if (!(tau > 0) || !(tau < 1))
        throw std::invalid_argument("ar_f_prime: tau in (0,1) required");
    if (!(C > 0) || !(C <= 1))
        throw std::invalid_argument("ar_f_prime: C in (0,1] required");
    return 1.0 - C / std::pow(1.0 + std::abs(t), tau);
}

// ---------------------------------------------------------------------------
// MatrixWalk
// ---------------------------------------------------------------------------
MatrixWalk::MatrixWalk(MatrixWalkSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim < 2)
        throw std::invalid_argument("matrix walk: dim >= 2 required");
    if (spec_.ensemble.empty())
        throw std::invalid_argument("matrix walk: empty ensemble");
    double total = 0;
    for (auto& [g, pr] : spec_.ensemble) {
        if (g.d != spec_.dim)
            throw std::invalid_argument("matrix walk: matrix dimension mismatch");
        if (!(pr >= 0))
            throw std::invalid_argument("matrix walk: negative probability");
        (void)g.inverse();  // throws on singular matrices
        total += pr;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("matrix walk: probabilities must sum to 1");
    if (spec_.start_direction.size() != std::size_t(spec_.dim) ||
        std::abs(norm2(spec_.start_direction) - 1.0) > 1e-9)
        throw std::invalid_argument("matrix walk: start_direction must be a unit vector");
    double c = 0;
    for (auto& [g, pr] : spec_.ensemble) cdf_.push_back(c += pr);
    cdf_.back() = 1.0;
}

MatrixWalk::state_type MatrixWalk::sample_stationary(rng::Stream& g) const {
    if (spec_.burn_in == 0)
        throw std::runtime_error("exact sampler unavailable");
    state_type x = spec_.start_direction;
    for (std::uint64_t i = 0; i < spec_.burn_in; ++i)
        x = step(sample_innovation(g), x);
    return x;
}

double MatrixWalk::distance(const state_type& x, const state_type& y) {
    double dm = 0, dp = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dm += (x[i] - y[i]) * (x[i] - y[i]);
        dp += (x[i] + y[i]) * (x[i] + y[i]);
    }
    return std::sqrt(std::min(dm, dp));
}

double MatrixWalk::log_moment_exact(double p) const {
    double s = 0;
    for (auto& [g, pr] : spec_.ensemble) {
        const double N = std::max(g.op_norm(), g.inverse().op_norm());
        s += pr * std::pow(std::log(N), p);
    }
    return s;
}

// ---------------------------------------------------------------------------
// DiscreteRenewal
// ---------------------------------------------------------------------------
DiscreteRenewal::DiscreteRenewal(DiscreteRenewalSpec spec) {
    if (!spec.p_seq.empty()) {
        p_ = spec.p_seq;
        double total = 0;
        for (double q : p_) {
            if (q < 0)
                throw std::invalid_argument("discrete_renewal: negative mass");
            total += q;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("discrete_renewal: masses must sum to 1");
    } else {
        if (!(spec.p > 2))
            throw std::invalid_argument("discrete_renewal: p > 2 required");
        if (spec.truncation_K < 2)
            throw std::invalid_argument("discrete_renewal: truncation_K too small");
        const double z = std::riemann_zeta(spec.p + 1.0);
        p_.resize(spec.truncation_K + 1);
        double total = 0;
        for (std::uint64_t k = 1; k <= spec.truncation_K; ++k) {
            p_[k - 1] = 1.0 / (z * std::pow(double(k), spec.p + 1.0));
            total += p_[k - 1];
        }
        p_[spec.truncation_K] = std::max(0.0, 1.0 - total);  // tail atom at K+1
    }

    mean_ = 0;
    for (std::size_t k = 0; k < p_.size(); ++k)
        mean_ += double(k + 1) * p_[k];

    // nu_j = nu_0 * sum_{i > j} p_i with nu_0 = 1/E(eps); support {0,...,L-1}.
    // suffix[j] = sum_{i >= j+1} P(eps = i) = P(eps > j).
    const double nu0 = 1.0 / mean_;
    std::vector<double> suffix(p_.size() + 1, 0.0);
    for (std::size_t j = p_.size(); j-- > 0;) suffix[j] = suffix[j + 1] + p_[j];
    nu_.resize(p_.size());
    for (std::size_t j = 0; j < nu_.size(); ++j) nu_[j] = nu0 * suffix[j];

    eps_cdf_.resize(p_.size());
    double c = 0;
    for (std::size_t k = 0; k < p_.size(); ++k) eps_cdf_[k] = (c += p_[k]);
    eps_cdf_.back() = 1.0;

    nu_cdf_.resize(nu_.size());
    c = 0;
    for (std::size_t j = 0; j < nu_.size(); ++j) nu_cdf_[j] = (c += nu_[j]);
    nu_cdf_.back() = 1.0;
}

std::int64_t DiscreteRenewal::sample_cdf(const std::vector<double>& cdf,
                                         double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return std::int64_t(it - cdf.begin());
}

// ---------------------------------------------------------------------------
// make_model
// ---------------------------------------------------------------------------
MatrixWalk make_model(const MatrixWalkSpec& spec) { return MatrixWalk(spec); }
DiscreteRenewal make_model(const DiscreteRenewalSpec& spec) {
    return DiscreteRenewal(spec);
}
StickyBeta make_model(const StickyBetaSpec& spec) { return StickyBeta(spec); }
ARLipschitz make_model(const ARLipschitzSpec& spec) {
    return ARLipschitz(spec);
}
ContractingIFS make_model(const IFSSpec& spec) { return ContractingIFS(spec); }
LinearAR make_model(const LinearARSpec& spec) { return LinearAR(spec); }

// ---------------------------------------------------------------------------
// matrix-walk diagnostics
// ---------------------------------------------------------------------------
namespace {
struct MeanAcc {
    double sum = 0, sum2 = 0;
    std::uint64_t n = 0;
    void add(double x) {
        sum += x;
        sum2 += x * x;
        ++n;
    }
    void merge(const MeanAcc& o) {
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
            const double var =
                std::max(0.0, (sum2 - sum * sum / double(n)) / double(n - 1));
            e.se = std::sqrt(var / double(n));
        }
        return e;
    }
};
}  // namespace

Estimate lyapunov_estimate(const MatrixWalk& model, std::uint64_t n,
                           std::uint64_t reps, std::uint64_t seed,
                           unsigned n_threads) {
    if (n < 1) throw std::invalid_argument("lyapunov_estimate: n >= 1");
    auto acc = parallel_paths(
        reps, n_threads, [] { return MeanAcc{}; },
        [&](MeanAcc& a, std::uint64_t path) {
            rng::Stream g(seed, 0x11, path);
            auto x = model.spec().start_direction;
            double s = 0;
            for (std::uint64_t k = 0; k < n; ++k) {
                const int e = model.sample_innovation(g);
                s += model.observe(e, x);
                x = model.step(e, x);
            }
            if (!std::isfinite(s))
                throw std::runtime_error("lyapunov_estimate: non-finite partial sum");
            a.add(s / double(n));
        },
        [](MeanAcc& a, MeanAcc&& b) { a.merge(b); });
    return acc.estimate();
}

double cocycle_identity_gap(const MatrixWalk& model, std::uint64_t n,
                            std::uint64_t seed) {
    rng::Stream g(seed, 0x12, 0);
    const int d = model.dim();
    // carry the rescaled product A_m alongside the per-step observable sum
    Mat A(d, std::vector<double>(std::size_t(d) * d, 0.0));
    for (int i = 0; i < d; ++i) A.at(i, i) = 1.0;
    double log_scale = 0;
    auto x0 = model.spec().start_direction;
    auto x = x0;
    double s = 0, worst = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
        const int e = model.sample_innovation(g);
        s += model.observe(e, x);
        x = model.step(e, x);
        const Mat& G = model.spec().ensemble[std::size_t(e)].first;
        Mat B(d, std::vector<double>(std::size_t(d) * d, 0.0));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0;
                for (int l = 0; l < d; ++l) acc += G.at(i, l) * A.at(l, j);
                B.at(i, j) = acc;
            }
        double mx = 0;
        for (double c : B.a) mx = std::max(mx, std::abs(c));
        if (mx > 0) {
            for (double& c : B.a) c /= mx;
            log_scale += std::log(mx);
        }
        A = std::move(B);
        const double direct = log_scale + std::log(norm2(A.apply(x0)));
        worst = std::max(worst,
                         std::abs(s - direct) / std::max(1.0, std::abs(direct)));
    }
    return worst;
}

Estimate log_moment_check(const MatrixWalk& model, double p,
                          std::uint64_t reps, std::uint64_t seed) {
    if (!(p > 0)) throw std::invalid_argument("log_moment_check: p > 0");
    // precompute per-matrix values, then MC over the ensemble law
    std::vector<double> vals;
    for (auto& [g, pr] : model.spec().ensemble) {
        const double N = std::max(g.op_norm(), g.inverse().op_norm());
        vals.push_back(std::pow(std::log(N), p));
    }
    MeanAcc a;
    rng::Stream g(seed, 0x13, 0);
    for (std::uint64_t i = 0; i < reps; ++i)
        a.add(vals[std::size_t(model.sample_innovation(g))]);
    return a.estimate();
}

}  // namespace iterkit
