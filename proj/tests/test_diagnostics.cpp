#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iterkit/diagnostics.hpp"
#include "iterkit/models.hpp"

using namespace iterkit;

TEST_CASE("variance growth: iid observable has Var(S_n)/n = 1") {
    LinearAR m(LinearARSpec{0.0});
    auto vg = variance_growth(m, {32, 128}, 4000, 3, 2);
    REQUIRE(vg.n.size() == 2);
    for (std::size_t i = 0; i < vg.n.size(); ++i)
        CHECK(std::abs(vg.var_over_n[i] - 1.0) < 4 * vg.se[i]);
    CHECK_THROWS_AS(variance_growth(m, {}, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(variance_growth(m, {0, 4}, 100, 1), std::invalid_argument);
}

TEST_CASE("spectral long-run variance: iid and AR(1) oracles") {
    LinearAR iid(LinearARSpec{0.0});
    auto s0 = sigma2_spectral(iid, 0, 200'000, 5);
    CHECK(s0.sigma2 == doctest::Approx(1.0).epsilon(0.05));

    LinearAR ar(LinearARSpec{0.5});
    // sigma^2 = (1/(1-rho^2)) (1+rho)/(1-rho) = 4
    auto s1 = sigma2_spectral(ar, 0, 400'000, 5);
    CHECK(s1.sigma2 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(s1.lag_window ==
          std::uint64_t(std::ceil(std::cbrt(400'000.0))));

    CHECK_THROWS_AS(sigma2_spectral(iid, 5000, 20'000, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(sigma2_spectral(iid, 0, 50, 1), std::invalid_argument);
}

TEST_CASE("clt_check: iid normal null and degenerate flag") {
    LinearAR iid(LinearARSpec{0.0});
    auto rep = clt_check(iid, 1000, 2000, 0.0, 1.0, 12, 2);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.ks < 0.0363);  // 1% critical value at reps = 2000

    auto deg = clt_check(iid, 100, 100, 0.0, 0.0, 1);
    CHECK(deg.degenerate);
    CHECK(deg.ks == 0.0);
}

TEST_CASE("ks statistic: calibrated under the null, sensitive to shift") {
    rng::Stream g(9, 1, 0);
    std::normal_distribution<double> N(0, 1);
    std::vector<double> z(4000), shifted(4000);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = N(g);
        shifted[i] = z[i] + 0.3;
    }
    CHECK(ks_statistic_vs_normal(z) < 0.036);
    CHECK(ks_statistic_vs_normal(shifted) > 0.08);
}

TEST_CASE("decay_fit: synthetic rates recovered to machine precision") {
    std::vector<std::uint64_t> n;
    std::vector<double> pw, ex;
    for (std::uint64_t k = 1; k <= 40; ++k) {
        n.push_back(k);
        pw.push_back(3.0 * std::pow(double(k), -2.0));
        ex.push_back(0.8 * std::pow(0.6, double(k)));
    }
    auto fp = decay_fit(n, pw, DecayFit::Kind::power);
    CHECK(fp.rate == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fp.log_a == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(fp.r2 == doctest::Approx(1.0).epsilon(1e-12));
    auto fe = decay_fit(n, ex, DecayFit::Kind::exponential);
    CHECK(fe.rate == doctest::Approx(std::log(0.6)).epsilon(1e-12));

    CHECK_THROWS_AS(decay_fit({1, 2}, {0.0, 0.0}, DecayFit::Kind::power),
                    std::invalid_argument);
}

TEST_CASE("variance growth on the discrete sigma^2 fixture approaches 2/27") {
    DiscreteRenewalSpec spec;
    spec.p_seq = {0.5, 0.5};
    auto m = make_model(spec);
    const double nu0 = m.nu0();
    m.f = [nu0](std::int64_t w) { return (w == 0 ? 1.0 : 0.0) - nu0; };
    auto sp = sigma2_spectral(m, 0, 400'000, 21);
    CHECK(sp.sigma2 == doctest::Approx(2.0 / 27).epsilon(0.1));
}
