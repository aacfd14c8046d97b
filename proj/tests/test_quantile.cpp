#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iterkit/quantile.hpp"

using namespace iterkit;

TEST_CASE("uniform law: Q, H, Hinv, tail_u, integral_Qp closed forms") {
    auto q = QuantileTable::uniform01();
    CHECK(q.Q(0.25) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(q.H(1.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(q.mean_abs() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(q.H(0.5) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(q.Hinv(0.375) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(q.tail_u(0.3) == doctest::Approx(0.7).epsilon(1e-12));
    for (double p : {1.0, 2.0, 3.5}) {
        for (double x : {0.1, 0.5, 0.99}) {
            const double expect =
                (1.0 - std::pow(1.0 - x, p + 1)) / (p + 1);
            CHECK(q.integral_Qp(p, x) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    // H o Hinv = id on random points
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> U(0, 1);
    for (int i = 0; i < 200; ++i) {
        const double u = U(g);
        CHECK(q.Hinv(q.H(u)) == doctest::Approx(u).epsilon(1e-10));
    }
}

TEST_CASE("empirical table: H(1) equals the sample mean exactly") {
    std::mt19937_64 g(5);
    std::lognormal_distribution<double> law(0.0, 0.7);
    std::vector<double> s(5000);
    double mean = 0;
    for (auto& x : s) mean += (x = law(g));
    mean /= double(s.size());
    auto q = QuantileTable::from_samples(s);
    CHECK(q.H(1.0) == doctest::Approx(mean).epsilon(1e-12));
    // Q non-increasing on a grid
    double prev = q.Q(0.0);
    for (double u = 0.01; u < 1.0; u += 0.01) {
        CHECK(q.Q(u) <= prev + 1e-15);
        prev = q.Q(u);
    }
}

TEST_CASE("delta_inverse: documented example and brute force") {
    auto seq = ExtendedSeq::fit({5, 5, 2, 1, 0.5, 0, 0, 0},
                                TailModel::Kind::power);
    CHECK(delta_inverse(1.5, seq) == 3);
    CHECK(delta_inverse(4.9, seq) == 2);
    CHECK(delta_inverse(0.0, seq) == 5);
    CHECK_THROWS_AS(delta_inverse(-1.0, seq), std::domain_error);

    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> U(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> v;
        double cur = 10 * U(g) + 1;
        for (int n = 0; n < 24; ++n) {
            v.push_back(cur);
            cur *= 0.5 + 0.4 * U(g);
        }
        for (int n = 0; n < 8; ++n) v.push_back(0.0);  // kills the tail model
        auto s = ExtendedSeq::fit(v, TailModel::Kind::power);
        for (int i = 0; i < 10; ++i) {
            const double u = 12 * U(g);
            std::uint64_t brute = 0;
            for (std::uint64_t n = 0; n < v.size(); ++n)
                if (s.at(n) > u) ++brute;
            CHECK(delta_inverse(u, s) == brute);
        }
    }
}

TEST_CASE("gamma tables: monotone R and delta(n)=0 edge") {
    auto q = QuantileTable::uniform01();
    std::vector<double> dv;
    for (int n = 0; n < 32; ++n) dv.push_back(0.5 * std::pow(0.6, n));
    auto g = gamma_tables(
        ExtendedSeq::fit(dv, TailModel::Kind::power), q);
    CHECK_FALSE(g.mean_warning);
    CHECK(g.gamma(0) == doctest::Approx(1.0).epsilon(1e-9));  // Hinv(0.5)
    double prev = g.R(1e-3);
    for (double u = 2e-3; u < 1.0; u += 1e-2) {
        CHECK(g.R(u) <= prev * (1 + 1e-12));
        prev = g.R(u);
    }
}

TEST_CASE("C1 and C2 are the same condition computed two ways") {
    auto q = QuantileTable::uniform01();
    std::vector<double> dv;
    for (int n = 0; n < 32; ++n) dv.push_back(0.5 * std::pow(0.6, n));
    auto g = gamma_tables(ExtendedSeq::fit(dv, TailModel::Kind::power), q);
    ConditionParams cp;
    cp.p = 3;
    cp.budget = 2000;
    auto c1 = eval_c1(q, g, cp);
    auto c2 = eval_c2(q, g, cp);
    CHECK(c1.verdict == c2.verdict);
    REQUIRE(c1.partial_sums.size() == c2.partial_sums.size());
    for (std::size_t i = 0; i < c1.partial_sums.size(); ++i)
        CHECK(std::abs(c1.partial_sums[i] - c2.partial_sums[i]) <
              1e-8 * std::max(1.0, std::abs(c2.partial_sums[i])));
}

TEST_CASE("C5: documented exponent arithmetic") {
    DiscreteRenewalSpec spec;
    spec.p = 5;  // masses ~ n^{-6}
    spec.truncation_K = 200'000;
    ConditionParams cp;
    cp.p = 3;
    cp.r = 13;  // term exponent 3*12/10 - 6 = -2.4
    cp.budget = 100'000;
    auto rep = eval_c5(spec, cp);
    CHECK(rep.verdict == "CONVERGENT");
    CHECK(rep.slope == doctest::Approx(-2.4).epsilon(0.03));
    ConditionParams bad = cp;
    bad.r = 2.0;  // r <= p rejected
    CHECK_THROWS_AS(eval_c5(spec, bad), std::invalid_argument);
}

TEST_CASE("C8 / psi moment of the return time") {
    // finite support: tau in {1,2} for [1/2,1/2]
    DiscreteRenewalSpec hh;
    hh.p_seq = {0.5, 0.5};
    auto fin = psi_moment_tau(hh, 4.0, 3.0);
    CHECK(fin.finite_support);
    CHECK(fin.verdict == "CONVERGENT");
    // E psi(tau) = (2/3) * 1^8 + (1/3) * 2^8
    CHECK(fin.total == doctest::Approx(2.0 / 3 + 256.0 / 3).epsilon(1e-12));

    DiscreteRenewalSpec unit;
    unit.p_seq = {1.0};
    CHECK(psi_moment_tau(unit, 4.0, 3.0).total == doctest::Approx(1.0));

    // parametric p = 3, r = 4: psi exponent 8, tail ~ n^{-2} -> divergent
    DiscreteRenewalSpec par;
    par.p = 3;
    par.truncation_K = 100'000;
    ConditionParams cp;
    cp.p = 3;
    cp.r = 4;
    cp.budget = 20'000;
    auto div = eval_c8(par, cp);
    CHECK(div.verdict == "DIVERGENT");
}

TEST_CASE("verdict rule: margin around slope -1") {
    ConditionParams cp;
    cp.p = 3;
    cp.budget = 50'000;
    auto mk = [&](double expnt) {
        return summarize_condition(
            "SYN", cp,
            [expnt](std::uint64_t n) {
                return std::pow(double(n), expnt);
            },
            "none");
    };
    CHECK(mk(-1.5).verdict == "CONVERGENT");
    CHECK(mk(-1.0).verdict == "INCONCLUSIVE");
    CHECK(mk(-0.7).verdict == "DIVERGENT");
    CHECK(mk(-1.5).slope == doctest::Approx(-1.5).epsilon(1e-6));
}

TEST_CASE("verdict stability: shrinking delta never flips to DIVERGENT") {
    auto q = QuantileTable::uniform01();
    ConditionParams cp;
    cp.p = 3;
    cp.budget = 2000;
    std::string prev;
    for (double lambda : {1.0, 0.5, 0.25}) {
        std::vector<double> dv;
        for (int n = 0; n < 32; ++n)
            dv.push_back(lambda * 0.5 * std::pow(0.6, n));
        auto g = gamma_tables(ExtendedSeq::fit(dv, TailModel::Kind::power), q);
        auto rep = eval_c2(q, g, cp);
        if (prev == "CONVERGENT") CHECK(rep.verdict != "DIVERGENT");
        prev = rep.verdict;
    }
}

TEST_CASE("C7: dyadic-shell integral of the IFS modulus") {
    ConditionParams cp;
    cp.p = 3;
    cp.r = 13;
    cp.budget = 256;
    auto rep = eval_c7([](double t) { return std::sqrt(t); }, cp);
    // c(t)/t ~ t^{-1/2}: shell integrals shrink geometrically, the |ln t|
    // power is polynomial -> convergent
    CHECK(rep.verdict == "CONVERGENT");
}
