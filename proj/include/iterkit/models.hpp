#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iterkit/rng.hpp"

namespace iterkit {

enum class Family {
    matrix_walk,
    ifs,
    discrete_renewal,
    sticky_beta,
    ar_lipschitz,
    custom,
};

struct Estimate {
    double value = 0;
    double se = 0;
    std::uint64_t count = 0;
};

// ---------------------------------------------------------------------------
// Small dense matrices (row-major), enough for the matrix-walk family.
// ---------------------------------------------------------------------------
struct Mat {
    int d = 0;
    std::vector<double> a;  // d*d row-major

    Mat() = default;
    Mat(int dim, std::vector<double> entries) : d(dim), a(std::move(entries)) {}
    double& at(int i, int j) { return a[std::size_t(i) * d + j]; }
    double at(int i, int j) const { return a[std::size_t(i) * d + j]; }

    std::vector<double> apply(const std::vector<double>& x) const;
    Mat inverse() const;      // throws std::invalid_argument if singular
    double op_norm() const;   // spectral norm via power iteration on A^T A
};

double norm2(const std::vector<double>& x);

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------
struct MatrixWalkSpec {
    int dim = 2;
    std::vector<std::pair<Mat, double>> ensemble;
    std::vector<double> start_direction;
    std::uint64_t burn_in = 0;  // 0: stationary sampling unavailable
};

struct DiscreteRenewalSpec {
    // Explicit pmf on {1,2,...}; leave empty to use the parametric family
    // p_k = 1/(zeta(p+1) k^(p+1)) truncated at K with the residual mass
    // folded into a single atom at K+1.
    std::vector<double> p_seq;
    double p = 0;
    std::uint64_t truncation_K = 1'000'000;
};

struct StickyBetaSpec {
    double a = 0;  // requires a > 1
};

struct ARLipschitzSpec {
    double tau = 0;       // in (0,1)
    double C = 0;         // in (0,1]
    double innov_sd = 1;  // Gaussian innovations
    double moment_S = 4;  // declared innovation moment order
    std::uint64_t burn_in = 2048;
};

struct IFSSpec {
    double contraction_rho = 0;  // in (0,1)
    std::uint64_t burn_in = 128;
};

struct LinearARSpec {
    double rho = 0;  // in (-1,1); unit-variance Gaussian innovations
};

// Canonical AR-Lipschitz map: the extremal antiderivative with
// f'(t) = 1 - C/(1+|t|)^tau for t >= 0, extended oddly; f(0) = 0.
double ar_f(double t, double C, double tau);
double ar_f_prime(double t, double C, double tau);

// ---------------------------------------------------------------------------
// Model families.  Each model is an immutable value after construction and
// exposes: state_type, innov_type, sample_innovation, step, observe,
// sample_stationary, states_equal, family().  All randomness comes from the
// caller-supplied stream.
// ---------------------------------------------------------------------------

class MatrixWalk {
public:
    using state_type = std::vector<double>;  // unit vector in R^d
    using innov_type = int;                  // index into the ensemble

    explicit MatrixWalk(MatrixWalkSpec spec);

    Family family() const { return Family::matrix_walk; }
    bool has_exact_stationary() const { return false; }
    int dim() const { return spec_.dim; }
    const MatrixWalkSpec& spec() const { return spec_; }

    innov_type sample_innovation(rng::Stream& g) const {
        const double u = g.uniform01();
        for (std::size_t i = 0; i + 1 < cdf_.size(); ++i)
            if (u < cdf_[i]) return int(i);
        return int(cdf_.size()) - 1;
    }

    state_type step(innov_type e, const state_type& x) const {
        auto y = spec_.ensemble[std::size_t(e)].first.apply(x);
        const double n = norm2(y);
        if (!(n > 0) || !std::isfinite(n))
            throw std::runtime_error("matrix walk: non-finite direction");
        for (auto& c : y) c /= n;
        return y;
    }

    // h(g, x) = log(|g x| / |x|) with |x| = 1 by convention.
    double observe(innov_type e, const state_type& x) const {
        if (norm2(x) == 0)
            throw std::invalid_argument("matrix walk: zero vector state");
        return std::log(norm2(spec_.ensemble[std::size_t(e)].first.apply(x)));
    }

    state_type sample_stationary(rng::Stream& g) const;

    static bool states_equal(const state_type&, const state_type&) {
        return false;  // meetings are not defined for projective directions
    }
    static double distance(const state_type& x, const state_type& y);

    // exact weighted sum of (log N(g))^p over the finite ensemble
    double log_moment_exact(double p) const;

private:
    MatrixWalkSpec spec_;
    std::vector<double> cdf_;
};

class DiscreteRenewal {
public:
    using state_type = std::int64_t;
    using innov_type = std::int64_t;  // value of epsilon >= 1

    explicit DiscreteRenewal(DiscreteRenewalSpec spec);

    Family family() const { return Family::discrete_renewal; }
    bool has_exact_stationary() const { return true; }

    const std::vector<double>& pmf() const { return p_; }   // p_[k-1] = P(eps=k)
    const std::vector<double>& nu() const { return nu_; }   // nu_[j] = nu(j)
    double mean_eps() const { return mean_; }
    double nu0() const { return nu_[0]; }

    // Observable f applied to the current chain state: X_n = f(W_n).
    std::function<double(state_type)> f = [](state_type w) {
        return w == 0 ? 1.0 : 0.0;
    };

    innov_type sample_innovation(rng::Stream& g) const {
        return 1 + sample_cdf(eps_cdf_, g.uniform01());
    }

    static state_type step(innov_type e, state_type w) {
        return w != 0 ? w - 1 : e - 1;
    }

    double observe(innov_type e, state_type w) const { return f(step(e, w)); }

    state_type sample_stationary(rng::Stream& g) const {
        return sample_cdf(nu_cdf_, g.uniform01());
    }

    static bool states_equal(state_type a, state_type b) { return a == b; }

    // small stationary supports let nested estimators evolve unique states only
    std::size_t support_size() const { return nu_.size(); }

private:
    static std::int64_t sample_cdf(const std::vector<double>& cdf, double u);

    std::vector<double> p_, eps_cdf_, nu_, nu_cdf_;
    double mean_ = 0;
};

class StickyBeta {
public:
    using state_type = double;
    struct innov_type {
        double u, v;
    };

    explicit StickyBeta(StickyBetaSpec spec) : a_(spec.a) {
        if (!(spec.a > 1))
            throw std::invalid_argument("sticky_beta: a > 1 required");
    }

    Family family() const { return Family::sticky_beta; }
    bool has_exact_stationary() const { return true; }
    double a() const { return a_; }
    double stationary_mean() const { return a_ / (a_ + 1); }

    double center = 0;  // observable is (state - center)

    innov_type sample_innovation(rng::Stream& g) const {
        return {g.uniform01(), g.uniform01()};
    }

    state_type step(innov_type e, state_type w) const {
        return e.u >= w ? w : std::pow(e.v, 1.0 / (a_ + 1.0));
    }

    double observe(innov_type e, state_type w) const {
        return step(e, w) - center;
    }

    state_type sample_stationary(rng::Stream& g) const {
        return std::pow(g.uniform01(), 1.0 / a_);
    }

    static bool states_equal(state_type a, state_type b) { return a == b; }
    static double distance(state_type a, state_type b) {
        return std::abs(a - b);
    }

private:
    double a_;
};

class ARLipschitz {
public:
    using state_type = double;
    using innov_type = double;

    explicit ARLipschitz(ARLipschitzSpec spec) : spec_(spec) {
        if (!(spec.tau > 0) || !(spec.tau < 1))
            throw std::invalid_argument("ar_lipschitz: tau in (0,1) required");
        if (!(spec.C > 0) || !(spec.C <= 1))
            throw std::invalid_argument("ar_lipschitz: C in (0,1] required");
    }

    Family family() const { return Family::ar_lipschitz; }
    bool has_exact_stationary() const { return false; }
    const ARLipschitzSpec& spec() const { return spec_; }

    innov_type sample_innovation(rng::Stream& g) const {
        std::normal_distribution<double> n(0.0, spec_.innov_sd);
        return n(g);
    }

    state_type step(innov_type e, state_type w) const {
        return ar_f(w, spec_.C, spec_.tau) + e;
    }

    double observe(innov_type e, state_type w) const { return step(e, w); }

    state_type sample_stationary(rng::Stream& g) const {
        state_type w = 0;
        for (std::uint64_t i = 0; i < spec_.burn_in; ++i)
            w = step(sample_innovation(g), w);
        return w;
    }

    static bool states_equal(state_type a, state_type b) { return a == b; }
    static double distance(state_type a, state_type b) {
        return std::abs(a - b);
    }

private:
    ARLipschitzSpec spec_;
};

// Linear AR(1) with unit-variance Gaussian innovations and identity
// observable; exact Gaussian stationary law.  Used as a rate fixture.
class LinearAR {
public:
    using state_type = double;
    using innov_type = double;

    explicit LinearAR(LinearARSpec spec) : rho_(spec.rho) {
        if (!(std::abs(spec.rho) < 1))
            throw std::invalid_argument("linear_ar: |rho| < 1 required");
    }

    Family family() const { return Family::custom; }
    bool has_exact_stationary() const { return true; }
    double rho() const { return rho_; }

    innov_type sample_innovation(rng::Stream& g) const {
        std::normal_distribution<double> n(0.0, 1.0);
        return n(g);
    }

    state_type step(innov_type e, state_type w) const { return rho_ * w + e; }
    double observe(innov_type e, state_type w) const { return step(e, w); }

    state_type sample_stationary(rng::Stream& g) const {
        std::normal_distribution<double> n(0.0,
                                           1.0 / std::sqrt(1 - rho_ * rho_));
        return n(g);
    }

    static bool states_equal(state_type a, state_type b) { return a == b; }
    static double distance(state_type a, state_type b) {
        return std::abs(a - b);
    }

private:
    double rho_;
};

// Uniformly contracting iterated random functions on [0,1]:
// W_n = rho W_{n-1} + eps_n with eps ~ U(0, 1-rho), observable
// h(e, w) = sqrt(rho w + e).  One-step contraction is exact with factor rho;
// h lies in class L(c) for the concave modulus c(t) = sqrt(t) (weight 1), so
// delta_inf(n) <= c(kappa rho^(n-1)) with kappa = 1 (diameter of [0,1]).
class ContractingIFS {
public:
    using state_type = double;
    using innov_type = double;

    explicit ContractingIFS(IFSSpec spec) : spec_(spec) {
        if (!(spec.contraction_rho > 0) || !(spec.contraction_rho < 1))
            throw std::invalid_argument("ifs: contraction rho in (0,1) required");
    }

    Family family() const { return Family::ifs; }
    bool has_exact_stationary() const { return false; }
    double rho() const { return spec_.contraction_rho; }
    double kappa() const { return 1.0; }
    static double modulus(double t) { return std::sqrt(t); }

    innov_type sample_innovation(rng::Stream& g) const {
        return (1 - spec_.contraction_rho) * g.uniform01();
    }

    state_type step(innov_type e, state_type w) const {
        return spec_.contraction_rho * w + e;
    }

    double observe(innov_type e, state_type w) const {
        return std::sqrt(step(e, w));
    }

    state_type sample_stationary(rng::Stream& g) const {
        state_type w = g.uniform01();
        for (std::uint64_t i = 0; i < spec_.burn_in; ++i)
            w = step(sample_innovation(g), w);
        return w;
    }

    static bool states_equal(state_type a, state_type b) { return a == b; }
    static double distance(state_type a, state_type b) {
        return std::abs(a - b);
    }

private:
    IFSSpec spec_;
};

// ---------------------------------------------------------------------------
// Spec validation / construction
// ---------------------------------------------------------------------------
MatrixWalk make_model(const MatrixWalkSpec& spec);
DiscreteRenewal make_model(const DiscreteRenewalSpec& spec);
StickyBeta make_model(const StickyBetaSpec& spec);
ARLipschitz make_model(const ARLipschitzSpec& spec);
ContractingIFS make_model(const IFSSpec& spec);
LinearAR make_model(const LinearARSpec& spec);

// ---------------------------------------------------------------------------
// Matrix-walk diagnostics
// ---------------------------------------------------------------------------

// Average of n^{-1} sum_k X_k over `reps` paths, with standard error.
Estimate lyapunov_estimate(const MatrixWalk& model, std::uint64_t n,
                           std::uint64_t reps, std::uint64_t seed,
                           unsigned n_threads = 1);

// Max over a path of |sum_{k<=m} X_k - log|A_m x|| / max(1, |log|A_m x||),
// with the matrix product carried independently (rescaled).
double cocycle_identity_gap(const MatrixWalk& model, std::uint64_t n,
                            std::uint64_t seed);

// E[(log N(g))^p]: exact for the finite ensemble, plus an MC cross-estimate.
Estimate log_moment_check(const MatrixWalk& model, double p,
                          std::uint64_t reps, std::uint64_t seed);

}  // namespace iterkit
