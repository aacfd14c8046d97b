#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iterkit/blocks.hpp"
#include "iterkit/models.hpp"
#include "iterkit/quantile.hpp"
#include "iterkit/rng.hpp"

using namespace iterkit;

TEST_CASE("thm1 plan: documented scales") {
    auto bp = plan_blocks_thm1(3.0, 2.0, 0.1, 3, 8);
    CHECK(bp.M_at(5) == doctest::Approx(6.2403).epsilon(1e-4));
    CHECK(bp.m_at(3) == 7);
    CHECK(bp.m_at(4) == 13);
    CHECK(bp.m_at(5) == 27);
    CHECK(bp.m_at(6) == 52);
    CHECK(bp.m_at(7) == 100);
    CHECK(bp.m_at(8) == 195);
    // eps bound for p = 3, q = 2 is min(1 - 2/4, 1/2) = 1/2
    CHECK_THROWS_AS(plan_blocks_thm1(3.0, 2.0, 0.6, 3, 8),
                    std::invalid_argument);
    CHECK_NOTHROW(plan_blocks_thm1(3.0, 2.0, 0.49, 3, 8));
    CHECK_THROWS_AS(plan_blocks_thm1(2.0, 2.0, 0.1, 3, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(plan_blocks_thm1(3.0, 0.9, 0.1, 3, 8),
                    std::invalid_argument);
}

TEST_CASE("truncate_level: split identity and Lipschitz bound") {
    auto [phi, g] = truncate_level(10.0, 6.2403);
    CHECK(phi == doctest::Approx(6.2403));
    CHECK(g == doctest::Approx(3.7597));
    auto [phi2, g2] = truncate_level(-10.0, 6.2403);
    CHECK(phi2 == doctest::Approx(-6.2403));
    CHECK(g2 == doctest::Approx(-3.7597));
    rng::Stream s(3, 1, 0);
    for (int i = 0; i < 500; ++i) {
        const double x = 30 * (s.uniform01() - 0.5);
        const double y = 30 * (s.uniform01() - 0.5);
        const double M = 10 * s.uniform01() + 0.1;
        auto [px, gx] = truncate_level(x, M);
        auto [py, gy] = truncate_level(y, M);
        CHECK(px + gx == doctest::Approx(x).epsilon(1e-14));
        CHECK(py + gy == doctest::Approx(y).epsilon(1e-14));
        CHECK(std::abs(px - py) <= std::abs(x - y) + 1e-15);
        CHECK(std::abs(px) <= M);
    }
    CHECK_THROWS_AS(truncate_level(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("thm2 plan: invariants on a synthetic fixture") {
    auto q = QuantileTable::uniform01();
    std::vector<double> dv;
    for (int n = 0; n < 48; ++n) dv.push_back(0.5 * std::pow(0.7, n));
    auto delta = ExtendedSeq::fit(dv, TailModel::Kind::power);
    auto g = gamma_tables(delta, q);
    auto bp = plan_blocks_thm2(3.0, q, g, 1, 10);
    CHECK(bp.u1 == doctest::Approx(0.5));  // P(|X| > 0) = 1 for uniform
    for (std::uint64_t k = bp.k_lo; k <= bp.k_hi; ++k) {
        if (k < bp.K0) {
            CHECK(bp.M_at(k) == 1.0);
            CHECK(bp.m_at(k) == 1);
        } else {
            CHECK(double(bp.m_at(k)) * bp.M_at(k) <=
                  std::pow(3.0, double(k) / 3.0) * (1 + 1e-6));
        }
        // scales are non-decreasing in k
        if (k > bp.k_lo) {
            CHECK(bp.M_at(k) >= bp.M_at(k - 1) - 1e-12);
            CHECK(bp.m_at(k) + 1 >= bp.m_at(k - 1));
        }
    }
}

TEST_CASE("nu_k on an iid fixture equals the variance of phi(X)") {
    LinearAR m(LinearARSpec{0.0});  // X ~ N(0,1) iid
    auto bp = plan_blocks_thm1(3.0, 2.0, 0.1, 3, 4);  // m = 7, 13
    auto nu = estimate_nu_k(m, bp, 500, 64, 11, 2);
    REQUIRE(nu.entries.size() == 2);
    for (const auto& e : nu.entries) {
        // Var(phi_M(X)) for M >= 3 is within 1% of Var(X) = 1
        CHECK(std::abs(e.direct.value - 1.0) <
              0.03 + 4 * e.direct.se);
        // (defnuk) and (nuk1) agree within combined se
        const double comb =
            std::sqrt(e.direct.se * e.direct.se + e.cov.se * e.cov.se);
        CHECK(std::abs(e.direct.value - e.cov.value) < 4 * comb + 1e-9);
    }
    CHECK_THROWS_AS(estimate_nu_k(m, bp, 10, 8, 1), std::invalid_argument);
}

TEST_CASE("tilde distance: state-free model collapses to zero") {
    LinearAR m(LinearARSpec{0.0});
    auto chk = check_tilde_distance(m, 8, 3.0, 1.0, 200, 32, 5);
    CHECK(chk.lhs == doctest::Approx(0.0));
    CHECK(chk.rhs == doctest::Approx(0.0));
    CHECK(chk.holds);
    CHECK_THROWS_AS(check_tilde_distance(m, 8, 3.0, 1.5, 10, 8, 1),
                    std::invalid_argument);
}

TEST_CASE("tilde distance: discrete fixture satisfies the inequality") {
    DiscreteRenewalSpec spec;
    spec.p_seq = {0.5, 0.5};
    auto m = make_model(spec);
    for (double q : {1.0, 2.0}) {
        auto chk = check_tilde_distance(m, 16, 2.0, q, 1500, 64, 9, 2);
        CHECK(chk.holds);
    }
}

TEST_CASE("truncation condition: bounded |X| kills all terms") {
    auto bp = plan_blocks_thm1(3.0, 2.0, 0.1, 3, 8);  // M_k >= 3 > 1
    auto q = QuantileTable::uniform01();              // |X| <= 1
    auto rep = eval_truncation_condition(bp, q);
    CHECK(rep.nonzero_terms == 0);
    for (double t : rep.term) CHECK(t == 0.0);
}

TEST_CASE("cond2vk surrogate: exact nu_k = sigma^2 gives a null trajectory") {
    auto bp = plan_blocks_thm1(3.0, 2.0, 0.1, 3, 5);
    NuTable nu;
    for (std::uint64_t k = 3; k <= 5; ++k) {
        NuEntry e;
        e.k = k;
        e.m = bp.m_at(k);
        e.M = bp.M_at(k);
        e.direct.value = 0.25;
        nu.entries.push_back(e);
    }
    auto rep = eval_cond2vk_surrogate(bp, nu, 0.25);
    CHECK(rep.decreasing);
    for (double r : rep.r) CHECK(r == 0.0);
    // a plateauing |nu_k - sigma^2| makes r_k grow like 3^{k/3}
    for (auto& e : nu.entries) e.direct.value = 0.35;
    auto rep2 = eval_cond2vk_surrogate(bp, nu, 0.25);
    CHECK_FALSE(rep2.decreasing);
    CHECK(rep2.slope == doctest::Approx(std::log(3.0) / 3.0).epsilon(1e-9));
}
