#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iterkit/coupling.hpp"
#include "iterkit/models.hpp"

namespace iterkit {

// ---------------------------------------------------------------------------
// Quantile calculus.  Q is the upper quantile function of |X1|,
// Q(u) = inf{t : P(|X| > t) <= u} (right-continuous, non-increasing),
// represented piecewise linearly with jumps allowed at breakpoints;
// H(x) = int_0^x Q is then piecewise quadratic and all the tail integrals
// used by the summability conditions have closed forms on the pieces.
// ---------------------------------------------------------------------------
class QuantileTable {
public:
    // empirical step quantile of a sample of |X1|
    static QuantileTable from_samples(std::vector<double> abs_samples);
    // analytic laws / synthetic fixtures
    static QuantileTable constant(double c);
    static QuantileTable uniform01();  // Q(u) = 1 - u
    // step function: Q = q[i] on [u[i], u[i+1]), u[0] = 0, u.back() < 1
    static QuantileTable from_steps(const std::vector<double>& u_breaks,
                                    const std::vector<double>& q_values);

    double Q(double u) const;
    double H(double u) const;
    double Hinv(double y) const;  // smallest u with H(u) = y
    double mean_abs() const;      // H(1)

    // smallest u with Q(u) <= t  (the tail probability P(|X| > t))
    double tail_u(double t) const;

    // exact int_0^upper Q(v)^p dv on the piecewise-linear structure
    double integral_Qp(double p, double upper) const;

    std::size_t pieces() const { return a_.size(); }
    std::string source;  // "empirical(n)" or "analytic(name)"

private:
    QuantileTable() = default;
    void finalize();  // validate monotonicity, build H nodes

    std::vector<double> u_;   // breakpoints, u_[0] = 0, u_.back() = 1
    std::vector<double> a_;   // Q at left end of piece i (value at u_[i]+)
    std::vector<double> b_;   // Q at right end of piece i (limit at u_[i+1]-)
    std::vector<double> hn_;  // H at breakpoints
    friend class C1Integrator;
};

// Numerical-quadrature evaluator of int_0^delta Q^expnt (H^{-1}(u)) du, done
// directly in u-space (adaptive Simpson per smooth piece, with H^{-1} from
// the table's inversion routine).  Used by C1 so that the C1/C2 agreement
// check exercises the change-of-variables identity rather than assuming it.
class C1Integrator {
public:
    C1Integrator(const QuantileTable& table, double expnt, double tol = 1e-12);
    double eval(double delta) const;  // 0 <= delta <= H(1)

private:
    const QuantileTable& t_;
    double expnt_, tol_;
    std::vector<double> piece_cum_;  // cumulative integral at H-breakpoints
};

// ---------------------------------------------------------------------------
// Tabulated sequences (delta(n), survival tails) with declared tail
// extrapolation beyond the table.
// ---------------------------------------------------------------------------
struct TailModel {
    enum class Kind { none, power, exponential } kind = Kind::none;
    double log_a = 0, rate = 0;  // log v = log_a + rate*log n (power)
                                 // log v = log_a + rate*n     (exponential)
    std::string describe() const;
};

class ExtendedSeq {
public:
    ExtendedSeq() = default;
    // fit the declared tail model on the upper half of the positive entries
    static ExtendedSeq fit(std::vector<double> values, TailModel::Kind kind);

    double at(std::uint64_t n) const;
    std::size_t table_size() const { return table_.size(); }
    const TailModel& tail() const { return tail_; }
    const std::vector<double>& table() const { return table_; }

private:
    std::vector<double> table_;
    TailModel tail_;
};

ExtendedSeq delta_to_seq(const DeltaTable& table,
                         TailModel::Kind kind = TailModel::Kind::power);
ExtendedSeq survival_to_seq(const std::vector<double>& tail,
                            TailModel::Kind kind = TailModel::Kind::power);

// delta^{-1}(u) = #{n >= 0 : delta(n) > u}; the table is extended by its
// tail model.  Throws std::domain_error for u < 0 or when u = 0 and the
// extrapolated tail never vanishes.  Counts are capped at 2^53.
std::uint64_t delta_inverse(double u, const ExtendedSeq& delta);

// ---------------------------------------------------------------------------
// gamma / gamma^{-1} / R
// ---------------------------------------------------------------------------
struct GammaTables {
    const QuantileTable* quantile = nullptr;
    ExtendedSeq delta;
    bool mean_warning = false;  // delta(0) vs H(1) disagree by > 5%

    double gamma(std::uint64_t n) const;   // H^{-1}(delta(n))
    double gamma_inv(double u) const;      // delta^{-1}(H(u))
    double R(double u) const;              // gamma_inv(u) * Q(u)
};

GammaTables gamma_tables(ExtendedSeq delta, const QuantileTable& quantile);

// ---------------------------------------------------------------------------
// Summability conditions
// ---------------------------------------------------------------------------
struct ConditionParams {
    double p = 0;
    double r = 0;                  // only for C5/C6/C7/C8
    std::uint64_t budget = 100000;  // number of series terms
    double margin = 0.1;           // verdict margin around slope -1
};

struct ConditionReport {
    std::string condition_id;
    double p = 0, r = 0;
    std::vector<std::uint64_t> checkpoints;  // geometric, last = budget
    std::vector<double> partial_sums;
    double total = 0;
    double slope = 0, slope_se = 0;
    bool finite_support = false;  // all terms beyond some index are exactly 0
    std::string verdict;          // CONVERGENT / DIVERGENT / INCONCLUSIVE
    std::string extrapolation;
    double margin = 0.1;
    double extra = 0;  // condition-specific metadata (C2: direct R-integral)
};

// C1: sum n^{p-2} int_0^{delta(n)} Q^{p-1} o H^{-1}   (u-space quadrature)
ConditionReport eval_c1(const QuantileTable& q, const GammaTables& g,
                        const ConditionParams& params);
// C2: same condition through the rewriting sum n^{p-2} int_0^{gamma(n)} Q^p
// (closed form); `extra` holds the direct integral int_0^1 R^{p-1} Q du.
ConditionReport eval_c2(const QuantileTable& q, const GammaTables& g,
                        const ConditionParams& params);
// C3: sum (n+1)^{p-2} int_0^{P(T* >= n)} Q^p
ConditionReport eval_c3(const QuantileTable& q, const ExtendedSeq& pair_tail,
                        const ConditionParams& params);
// C4: sum n^{p-2} P(T* >= n)
ConditionReport eval_c4(const ExtendedSeq& pair_tail,
                        const ConditionParams& params);
// C5: sum n^{p(r-1)/(r-p)} p_n
ConditionReport eval_c5(const DiscreteRenewalSpec& spec,
                        const ConditionParams& params);
// C6: sum n^{(pr-2r+1)/(r-p)} delta(n)
ConditionReport eval_c6(const ExtendedSeq& delta,
                        const ConditionParams& params);
// C7: int_0 c(t)/t |ln t|^{(pr-2r+1)/(r-p)} dt over dyadic shells t ~ 2^{-j}
ConditionReport eval_c7(const std::function<double(double)>& c_modulus,
                        const ConditionParams& params);
// C8: E_nu[psi_{r,p}(tau)], psi_{r,p}(x) = x^{r(p-1)/(r-p)}, via the exact
// return tail (terms (psi(n)-psi(n-1)) P(tau >= n))
ConditionReport eval_c8(const DiscreteRenewalSpec& spec,
                        const ConditionParams& params);

// finiteness check of E_nu[psi_{r,p}(tau)]; wraps eval_c8
ConditionReport psi_moment_tau(const DiscreteRenewalSpec& spec, double r,
                               double p, std::uint64_t budget = 100000);

// shared term -> report assembly (exposed for synthetic-fixture tests)
ConditionReport summarize_condition(
    const std::string& id, const ConditionParams& params,
    const std::function<double(std::uint64_t)>& term,
    const std::string& extrapolation);

}  // namespace iterkit
