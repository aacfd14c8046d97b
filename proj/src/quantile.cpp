#include "iterkit/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iterkit {

// ---------------------------------------------------------------------------
// adaptive Simpson quadrature
// ---------------------------------------------------------------------------
namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
    if (!(b > a)) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

// ---------------------------------------------------------------------------
// QuantileTable
// ---------------------------------------------------------------------------
void QuantileTable::finalize() {
    if (u_.size() < 2 || u_.front() != 0.0 || std::abs(u_.back() - 1.0) > 1e-15)
        throw std::invalid_argument("quantile table: breakpoints must span [0,1]");
    u_.back() = 1.0;
    if (a_.size() + 1 != u_.size() || b_.size() != a_.size())
        throw std::invalid_argument("quantile table: inconsistent sizes");
    for (std::size_t i = 0; i < a_.size(); ++i) {
        if (u_[i + 1] <= u_[i])
            throw std::invalid_argument("quantile table: breakpoints not increasing");
        if (a_[i] < 0 || b_[i] < 0 || b_[i] > a_[i] + 1e-12)
            throw std::invalid_argument("quantile table: Q must be non-increasing and >= 0");
        if (i > 0 && a_[i] > b_[i - 1] + 1e-12)
            throw std::invalid_argument("quantile table: Q must be non-increasing across pieces");
    }
    hn_.assign(u_.size(), 0.0);
    for (std::size_t i = 0; i < a_.size(); ++i)
        hn_[i + 1] = hn_[i] + 0.5 * (a_[i] + b_[i]) * (u_[i + 1] - u_[i]);
}

QuantileTable QuantileTable::from_samples(std::vector<double> s) {
    if (s.empty())
        throw std::invalid_argument("quantile table: empty sample");
    for (double& v : s) v = std::abs(v);
    std::sort(s.begin(), s.end(), std::greater<double>());
    const std::size_t N = s.size();
    QuantileTable t;
    t.u_.push_back(0.0);
    std::size_t k = 0;
    while (k < N) {
        std::size_t k2 = k;
        while (k2 + 1 < N && s[k2 + 1] == s[k]) ++k2;  // merge ties
        t.a_.push_back(s[k]);
        t.b_.push_back(s[k]);
        t.u_.push_back(double(k2 + 1) / double(N));
        k = k2 + 1;
    }
    t.finalize();
    t.source = "empirical(" + std::to_string(N) + ")";
    return t;
}

QuantileTable QuantileTable::constant(double c) {
    if (c < 0) throw std::invalid_argument("quantile table: negative constant");
    QuantileTable t;
    t.u_ = {0.0, 1.0};
    t.a_ = {c};
    t.b_ = {c};
    t.finalize();
    t.source = "analytic(constant)";
    return t;
}

QuantileTable QuantileTable::uniform01() {
    QuantileTable t;
    t.u_ = {0.0, 1.0};
    t.a_ = {1.0};
    t.b_ = {0.0};
    t.finalize();
    t.source = "analytic(uniform01)";
    return t;
}

QuantileTable QuantileTable::from_steps(const std::vector<double>& u_breaks,
                                        const std::vector<double>& q_values) {
    if (u_breaks.size() != q_values.size() || u_breaks.empty() ||
        u_breaks.front() != 0.0)
        throw std::invalid_argument("quantile table: bad step description");
    QuantileTable t;
    t.u_ = u_breaks;
    t.u_.push_back(1.0);
    t.a_ = q_values;
    t.b_ = q_values;
    t.finalize();
    t.source = "analytic(steps)";
    return t;
}

double QuantileTable::Q(double u) const {
    if (u < 0 || u > 1)
        throw std::domain_error("Q: u outside [0,1]");
    std::size_t i =
        std::size_t(std::upper_bound(u_.begin(), u_.end(), u) - u_.begin());
    if (i > 0) --i;
    if (i >= a_.size()) i = a_.size() - 1;  // u == 1
    const double len = u_[i + 1] - u_[i];
    return a_[i] + (b_[i] - a_[i]) * (u - u_[i]) / len;
}

double QuantileTable::H(double u) const {
    if (u < 0 || u > 1)
        throw std::domain_error("H: u outside [0,1]");
    std::size_t i =
        std::size_t(std::upper_bound(u_.begin(), u_.end(), u) - u_.begin());
    if (i > 0) --i;
    if (i >= a_.size()) i = a_.size() - 1;
    const double len = u_[i + 1] - u_[i];
    const double s = u - u_[i];
    return hn_[i] + a_[i] * s + 0.5 * (b_[i] - a_[i]) * s * s / len;
}

double QuantileTable::mean_abs() const { return hn_.back(); }

double QuantileTable::Hinv(double y) const {
    if (y < -1e-12 || y > hn_.back() + 1e-12)
        throw std::domain_error("Hinv: y outside [0, H(1)]");
    y = std::min(std::max(y, 0.0), hn_.back());
    // first node with H >= y; ties (flat pieces) resolve to the smallest u
    const std::size_t idx = std::size_t(
        std::lower_bound(hn_.begin(), hn_.end(), y) - hn_.begin());
    if (idx < hn_.size() && hn_[idx] <= y) return u_[idx];  // exact node hit
    const std::size_t i = idx - 1;  // hn_[i] < y < hn_[i+1]
    const double len = u_[i + 1] - u_[i];
    const double d = y - hn_[i];
    const double a = a_[i];
    const double c = 0.5 * (b_[i] - a_[i]) / len;  // H = hn + a s + c s^2
    double s;
    if (std::abs(c) * len < 1e-14 * std::max(a, 1.0)) {
        s = a > 0 ? d / a : len;
    } else {
        const double disc = std::max(0.0, a * a + 4 * c * d);
        s = (-a + std::sqrt(disc)) / (2 * c);
        if (!(s >= 0) || s > len) s = std::min(std::max(s, 0.0), len);
    }
    return u_[i] + s;
}

double QuantileTable::tail_u(double t) const {
    for (std::size_t i = 0; i < a_.size(); ++i) {
        if (a_[i] <= t) return u_[i];
        if (b_[i] <= t) {
            const double len = u_[i + 1] - u_[i];
            return u_[i] + len * (a_[i] - t) / (a_[i] - b_[i]);
        }
    }
    return 1.0;
}

double QuantileTable::integral_Qp(double p, double upper) const {
    if (upper <= 0) return 0.0;
    upper = std::min(upper, 1.0);
    double total = 0;
    for (std::size_t i = 0; i < a_.size() && u_[i] < upper; ++i) {
        const double len = u_[i + 1] - u_[i];
        const double s = std::min(upper - u_[i], len);
        const double k = (b_[i] - a_[i]) / len;
        if (std::abs(k) * s < 1e-15 * std::max(a_[i], 1e-300)) {
            total += std::pow(a_[i], p) * s;
        } else {
            const double hi = a_[i] + k * s;
            total += (std::pow(hi, p + 1) - std::pow(a_[i], p + 1)) /
                     (k * (p + 1));
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// C1Integrator
// ---------------------------------------------------------------------------
C1Integrator::C1Integrator(const QuantileTable& table, double expnt, double tol)
    : t_(table), expnt_(expnt), tol_(tol) {
    piece_cum_.assign(t_.hn_.size(), 0.0);
    auto f = [&](double u) { return std::pow(t_.Q(t_.Hinv(u)), expnt_); };
    for (std::size_t i = 0; i + 1 < t_.hn_.size(); ++i)
        piece_cum_[i + 1] =
            piece_cum_[i] + integrate(f, t_.hn_[i], t_.hn_[i + 1], tol_);
}

double C1Integrator::eval(double delta) const {
    if (delta <= 0) return 0.0;
    const auto& hn = t_.hn_;
    delta = std::min(delta, hn.back());
    std::size_t i = std::size_t(
        std::upper_bound(hn.begin(), hn.end(), delta) - hn.begin());
    if (i > 0) --i;
    if (i + 1 >= hn.size()) return piece_cum_.back();
    auto f = [&](double u) { return std::pow(t_.Q(t_.Hinv(u)), expnt_); };
    return piece_cum_[i] + integrate(f, hn[i], delta, tol_);
}

// ---------------------------------------------------------------------------
// ExtendedSeq
// ---------------------------------------------------------------------------
std::string TailModel::describe() const {
    switch (kind) {
        case Kind::power:
            return "power(rate=" + std::to_string(rate) + ")";
        case Kind::exponential:
            return "exponential(rate=" + std::to_string(rate) + ")";
        default:
            return "none";
    }
}

ExtendedSeq ExtendedSeq::fit(std::vector<double> values, TailModel::Kind kind) {
    ExtendedSeq s;
    s.table_ = std::move(values);
    s.tail_.kind = TailModel::Kind::none;
    if (kind == TailModel::Kind::none || s.table_.size() < 8) return s;
    std::vector<double> xs, ys;
    for (std::size_t n = s.table_.size() / 2; n < s.table_.size(); ++n) {
        if (s.table_[n] <= 0 || n == 0) continue;
        xs.push_back(kind == TailModel::Kind::power ? std::log(double(n))
                                                    : double(n));
        ys.push_back(std::log(s.table_[n]));
    }
    if (xs.size() < 4) return s;
    const SlopeFit f = least_squares(xs, ys);
    s.tail_.kind = kind;
    s.tail_.rate = f.slope;
    s.tail_.log_a = f.intercept;
    return s;
}

double ExtendedSeq::at(std::uint64_t n) const {
    if (n < table_.size()) return table_[n];
    switch (tail_.kind) {
        case TailModel::Kind::power:
            return std::exp(tail_.log_a + tail_.rate * std::log(double(n)));
        case TailModel::Kind::exponential:
            return std::exp(tail_.log_a + tail_.rate * double(n));
        default:
            return 0.0;
    }
}

ExtendedSeq delta_to_seq(const DeltaTable& table, TailModel::Kind kind) {
    return ExtendedSeq::fit(table.value, kind);
}

ExtendedSeq survival_to_seq(const std::vector<double>& tail,
                            TailModel::Kind kind) {
    return ExtendedSeq::fit(tail, kind);
}

std::uint64_t delta_inverse(double u, const ExtendedSeq& delta) {
    if (u < 0) throw std::domain_error("delta_inverse: u < 0");
    const auto& t = delta.table();
    std::uint64_t count = 0;
    for (double v : t)
        if (v > u) ++count;
    const auto& tm = delta.tail();
    constexpr double cap = 9007199254740992.0;  // 2^53
    if (tm.kind == TailModel::Kind::none) return count;
    if (u == 0.0)
        throw std::domain_error("delta_inverse: u = 0 with a positive tail model");
    if (tm.rate >= 0) {
        // non-decreasing extrapolation: either nothing or everything
        return delta.at(t.size()) > u ? std::uint64_t(cap) : count;
    }
    const double len = double(t.size());
    double n_star;
    if (tm.kind == TailModel::Kind::power)
        n_star = std::exp((std::log(u) - tm.log_a) / tm.rate);
    else
        n_star = (std::log(u) - tm.log_a) / tm.rate;
    if (n_star > len) {
        const double extra = std::min(std::ceil(n_star) - len, cap);
        count += std::uint64_t(std::max(0.0, extra));
    }
    return count;
}

// ---------------------------------------------------------------------------
// GammaTables
// ---------------------------------------------------------------------------
double GammaTables::gamma(std::uint64_t n) const {
    const double h1 = quantile->mean_abs();
    const double d = std::min(delta.at(n), h1);
    return quantile->Hinv(std::max(0.0, d));
}

double GammaTables::gamma_inv(double u) const {
    return double(delta_inverse(quantile->H(u), delta));
}

double GammaTables::R(double u) const {
    return gamma_inv(u) * quantile->Q(u);
}

GammaTables gamma_tables(ExtendedSeq delta, const QuantileTable& quantile) {
    GammaTables g;
    g.quantile = &quantile;
    g.delta = std::move(delta);
    const double h1 = quantile.mean_abs();
    const double d0 = g.delta.at(0);
    g.mean_warning =
        std::abs(d0 - h1) > 0.05 * std::max({h1, d0, 1e-300});
    return g;
}

// ---------------------------------------------------------------------------
// condition evaluation
// ---------------------------------------------------------------------------
ConditionReport summarize_condition(
    const std::string& id, const ConditionParams& params,
    const std::function<double(std::uint64_t)>& term,
    const std::string& extrapolation) {
    ConditionReport rep;
    rep.condition_id = id;
    rep.p = params.p;
    rep.r = params.r;
    rep.margin = params.margin;
    rep.extrapolation = extrapolation;

    const std::uint64_t N = std::max<std::uint64_t>(params.budget, 8);
    std::vector<std::uint64_t> slope_ns;
    {
        // ~96 geometric points over the upper window [N/16, N]
        const double lo = std::max(2.0, double(N) / 16.0);
        double x = lo;
        while (x <= double(N) + 0.5) {
            const std::uint64_t n = std::uint64_t(x + 0.5);
            if (slope_ns.empty() || n > slope_ns.back()) slope_ns.push_back(n);
            x *= std::pow(double(N) / lo, 1.0 / 96.0);
        }
    }

    double sum = 0;
    std::uint64_t next_cp = 1;
    std::uint64_t last_pos = 0;
    std::vector<double> sx, sy;
    std::size_t si = 0;
    for (std::uint64_t n = 1; n <= N; ++n) {
        const double t = term(n);
        if (t < 0)
            throw std::runtime_error(id + ": negative series term");
        sum += t;
        if (t > 0) last_pos = n;
        while (si < slope_ns.size() && slope_ns[si] == n) {
            if (t > 0) {
                sx.push_back(std::log(double(n)));
                sy.push_back(std::log(t));
            }
            ++si;
        }
        if (n == next_cp || n == N) {
            rep.checkpoints.push_back(n);
            rep.partial_sums.push_back(sum);
            while (next_cp <= n) next_cp *= 2;
        }
    }
    rep.total = sum;

    if (last_pos <= N / 2) {
        rep.finite_support = true;
        rep.verdict = "CONVERGENT";
        rep.slope = 0;
        rep.slope_se = 0;
        return rep;
    }
    if (sx.size() < 4) {
        rep.verdict = "INCONCLUSIVE";
        return rep;
    }
    const SlopeFit f = least_squares(sx, sy);
    rep.slope = f.slope;
    rep.slope_se = f.se;
    if (f.slope < -1.0 - params.margin)
        rep.verdict = "CONVERGENT";
    else if (f.slope > -1.0 + params.margin)
        rep.verdict = "DIVERGENT";
    else
        rep.verdict = "INCONCLUSIVE";
    return rep;
}

ConditionReport eval_c1(const QuantileTable& q, const GammaTables& g,
                        const ConditionParams& params) {
    if (!(params.p > 2)) throw std::invalid_argument("C1: p > 2 required");
    C1Integrator integ(q, params.p - 1.0);
    const double h1 = q.mean_abs();
    auto term = [&](std::uint64_t n) {
        const double d = std::min(g.delta.at(n), h1);
        return std::pow(double(n), params.p - 2.0) * integ.eval(d);
    };
    return summarize_condition("C1", params, term, g.delta.tail().describe());
}

ConditionReport eval_c2(const QuantileTable& q, const GammaTables& g,
                        const ConditionParams& params) {
    if (!(params.p > 2)) throw std::invalid_argument("C2: p > 2 required");
    auto G = [&](std::uint64_t n) {
        return q.integral_Qp(params.p, g.gamma(n));
    };
    auto term = [&](std::uint64_t n) {
        return std::pow(double(n), params.p - 2.0) * G(n);
    };
    ConditionReport rep =
        summarize_condition("C2", params, term, g.delta.tail().describe());
    // direct value of int_0^1 R^{p-1} Q du via the layer-cake over gamma(n)
    double direct = 0;
    for (std::uint64_t n = 0; n <= params.budget; ++n) {
        const double w = std::pow(double(n + 1), params.p - 1.0) -
                         std::pow(double(n), params.p - 1.0);
        const double gn = G(n);
        direct += w * gn;
        if (gn == 0.0) break;
    }
    rep.extra = direct;
    return rep;
}

ConditionReport eval_c3(const QuantileTable& q, const ExtendedSeq& pair_tail,
                        const ConditionParams& params) {
    if (!(params.p > 2)) throw std::invalid_argument("C3: p > 2 required");
    auto term = [&](std::uint64_t n) {
        const double s = std::min(1.0, pair_tail.at(n));
        return std::pow(double(n + 1), params.p - 2.0) *
               q.integral_Qp(params.p, s);
    };
    return summarize_condition("C3", params, term,
                               pair_tail.tail().describe());
}

ConditionReport eval_c4(const ExtendedSeq& pair_tail,
                        const ConditionParams& params) {
    if (!(params.p > 2)) throw std::invalid_argument("C4: p > 2 required");
    auto term = [&](std::uint64_t n) {
        return std::pow(double(n), params.p - 2.0) * pair_tail.at(n);
    };
    return summarize_condition("C4", params, term,
                               pair_tail.tail().describe());
}

ConditionReport eval_c5(const DiscreteRenewalSpec& spec,
                        const ConditionParams& params) {
    if (!(params.p > 2) || !(params.r > params.p))
        throw std::invalid_argument("C5: r > p > 2 required");
    const double expnt = params.p * (params.r - 1) / (params.r - params.p);
    std::function<double(std::uint64_t)> mass;
    if (!spec.p_seq.empty()) {
        mass = [&spec](std::uint64_t n) {
            return n <= spec.p_seq.size() ? spec.p_seq[n - 1] : 0.0;
        };
    } else {
        const double z = std::riemann_zeta(spec.p + 1.0);
        const double sp = spec.p;
        mass = [z, sp](std::uint64_t n) {
            return 1.0 / (z * std::pow(double(n), sp + 1.0));
        };
    }
    auto term = [&](std::uint64_t n) {
        return std::pow(double(n), expnt) * mass(n);
    };
    return summarize_condition("C5", params, term, "closed-form masses");
}

ConditionReport eval_c6(const ExtendedSeq& delta,
                        const ConditionParams& params) {
    if (!(params.p > 2) || !(params.r > params.p))
        throw std::invalid_argument("C6: r > p > 2 required");
    const double expnt = (params.p * params.r - 2 * params.r + 1) /
                         (params.r - params.p);
    auto term = [&](std::uint64_t n) {
        return std::pow(double(n), expnt) * delta.at(n);
    };
    return summarize_condition("C6", params, term, delta.tail().describe());
}

ConditionReport eval_c7(const std::function<double(double)>& c_modulus,
                        const ConditionParams& params) {
    if (!(params.p > 2) || !(params.r > params.p))
        throw std::invalid_argument("C7: r > p > 2 required");
    const double expnt = (params.p * params.r - 2 * params.r + 1) /
                         (params.r - params.p);
    ConditionParams shells = params;
    shells.budget = std::min<std::uint64_t>(params.budget, 512);
    auto term = [&](std::uint64_t j) {
        const double hi = std::pow(2.0, -double(j));
        const double lo = 0.5 * hi;
        auto f = [&](double t) {
            return c_modulus(t) / t *
                   std::pow(std::abs(std::log(t)), expnt);
        };
        return integrate(f, lo, hi, 1e-12);
    };
    ConditionReport rep =
        summarize_condition("C7", shells, term, "dyadic shells t ~ 2^-j");
    return rep;
}

ConditionReport eval_c8(const DiscreteRenewalSpec& spec,
                        const ConditionParams& params) {
    if (!(params.p > 2) || !(params.r > params.p))
        throw std::invalid_argument("C8: r > p > 2 required");
    const double expnt =
        params.r * (params.p - 1) / (params.r - params.p);
    const auto tail = exact_return_tail_discrete(spec, params.budget + 1);
    auto term = [&](std::uint64_t n) {
        const double dpsi = std::pow(double(n), expnt) -
                            std::pow(double(n - 1), expnt);
        return dpsi * tail[n];
    };
    return summarize_condition("C8", params, term, "exact return tail");
}

ConditionReport psi_moment_tau(const DiscreteRenewalSpec& spec, double r,
                               double p, std::uint64_t budget) {
    ConditionParams params;
    params.p = p;
    params.r = r;
    params.budget = budget;
    return eval_c8(spec, params);
}

}  // namespace iterkit
