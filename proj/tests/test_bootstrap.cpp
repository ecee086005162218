#include "mminfer/bootstrap.hpp"
#include "mminfer/simbench.hpp"

#include <cmath>
#include <doctest.h>
#include <map>

using namespace mminfer;

namespace {

Dataset mm_sample(std::uint64_t seed, std::size_t rep = 0) {
    SingleScenario sc;
    sc.master_seed = seed;
    return generate_single(sc, rep);
}

} // namespace

TEST_CASE("multiplier laws have mean 0 and variance 1") {
    for (const auto law : {Multiplier::Rademacher, Multiplier::Mammen}) {
        Rng rng = make_rng(2026, 99, static_cast<std::uint64_t>(law));
        double m1 = 0, m2 = 0;
        const int draws = 1000000;
        std::map<double, int> support;
        for (int i = 0; i < draws; ++i) {
            const double w = draw_multiplier(law, rng);
            m1 += w;
            m2 += w * w;
            ++support[w];
        }
        m1 /= draws;
        m2 /= draws;
        CHECK(std::abs(m1) < 3e-3);
        CHECK(std::abs(m2 - 1) < 3e-3);
        REQUIRE(support.size() == 2);
        const double r5 = std::sqrt(5.0);
        if (law == Multiplier::Rademacher) {
            CHECK(support.begin()->first == -1.0);
            CHECK(support.rbegin()->first == 1.0);
            CHECK(support.begin()->second / double(draws) == doctest::Approx(0.5).epsilon(0.01));
        } else {
            CHECK(support.begin()->first == doctest::Approx(-(r5 - 1) / 2));
            CHECK(support.rbegin()->first == doctest::Approx((r5 + 1) / 2));
            CHECK(support.begin()->second / double(draws) == doctest::Approx((r5 + 1) / (2 * r5)).epsilon(0.01));
        }
    }
}

TEST_CASE("multiplier parsing") {
    CHECK(parse_multiplier("rademacher") == Multiplier::Rademacher);
    CHECK(parse_multiplier("mammen") == Multiplier::Mammen);
    CHECK(to_string(Multiplier::Mammen) == "mammen");
    CHECK_THROWS_AS(parse_multiplier("gauss"), Error);
}

TEST_CASE("type-7 quantiles") {
    const std::vector<double> a{1, 2, 3, 4};
    CHECK(quantile_type7(a, 0.5) == 2.5);
    CHECK(quantile_type7(a, 0.0) == 1);
    CHECK(quantile_type7(a, 1.0) == 4);
    std::vector<double> b;
    for (int i = 1; i <= 10; ++i) b.push_back(i);
    CHECK(quantile_type7(b, 0.1) == doctest::Approx(1.9));
    CHECK(quantile_type7(b, 0.975) == doctest::Approx(9.775));
}

TEST_CASE("seed derivation is deterministic and stream-separated") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
    CHECK(splitmix64(0) != 0);
}

TEST_CASE("bootstrap intervals are bit-identical across runs and thread counts") {
    const Dataset d = mm_sample(10);
    const FitResult fit = fit_single(d, VarianceSpec::power(0.5));
    BootstrapConfig c;
    c.replicates = 199;
    c.seed = 42;
    c.threads = 1;
    const auto a = wild_bootstrap_ci(d, fit, c);
    const auto b = wild_bootstrap_ci(d, fit, c);
    c.threads = 4;
    const auto e = wild_bootstrap_ci(d, fit, c);
    for (const auto* r : {&b, &e}) {
        CHECK(r->ci_vmax.lower == a.ci_vmax.lower);
        CHECK(r->ci_vmax.upper == a.ci_vmax.upper);
        CHECK(r->ci_km.lower == a.ci_km.lower);
        CHECK(r->ci_km.upper == a.ci_km.upper);
        CHECK(r->failures == a.failures);
    }
    c.seed = 43;
    const auto other = wild_bootstrap_ci(d, fit, c);
    CHECK(other.ci_vmax.lower != a.ci_vmax.lower);
}

TEST_CASE("percentile-t interval construction") {
    const Dataset d = mm_sample(11);
    const FitResult fit = fit_single(d, VarianceSpec::power(0.5));
    BootstrapConfig c;
    c.replicates = 299;
    c.multiplier = Multiplier::Mammen;
    const auto r = wild_bootstrap_ci(d, fit, c);
    CHECK(r.replicates == 299);
    CHECK(r.failures == 0);
    CHECK_FALSE(r.flagged);
    CHECK(r.ci_vmax.lower == doctest::Approx(fit.params.vmax() - r.t_quantiles[0][1] * fit.se[0]));
    CHECK(r.ci_vmax.upper == doctest::Approx(fit.params.vmax() - r.t_quantiles[0][0] * fit.se[0]));
    CHECK(r.ci_vmax.contains(fit.params.vmax()));
    CHECK(r.ci_km.contains(fit.params.km()));

    c.level = 0.99;
    const auto wide = wild_bootstrap_ci(d, fit, c);
    CHECK(wide.ci_vmax.lower <= r.ci_vmax.lower);
    CHECK(wide.ci_vmax.upper >= r.ci_vmax.upper);
    CHECK(wide.ci_km.lower <= r.ci_km.lower);
    CHECK(wide.ci_km.upper >= r.ci_km.upper);
}

TEST_CASE("noiseless data gives a degenerate interval") {
    std::vector<double> s, y;
    for (int i = 0; i < 20; ++i) {
        s.push_back(1 + 5 * i);
        y.push_back(mm_mean(s.back(), MMParams(100, 20)));
    }
    const Dataset d(s, y);
    const FitResult fit = fit_single(d, VarianceSpec::power(0.5));
    BootstrapConfig c;
    c.replicates = 99;
    const auto r = wild_bootstrap_ci(d, fit, c);
    CHECK(r.ci_vmax.width() <= 1e-8);
    CHECK(r.ci_vmax.lower == doctest::Approx(100).epsilon(1e-8));
    CHECK(r.ci_km.width() <= 1e-8);
}

TEST_CASE("bootstrap preconditions and failure accounting") {
    const Dataset d = mm_sample(12);
    const FitResult fit = fit_single(d, VarianceSpec::power(0.5));
    BootstrapConfig c;
    c.replicates = 50;
    CHECK_THROWS_AS(wild_bootstrap_ci(d, fit, c), Error);

    // Refits restricted to a bracket without a root all fail.
    c.replicates = 99;
    FitConfig broken;
    broken.search.k_lo = 1e5;
    broken.search.k_hi = 1e6;
    try {
        (void)wild_bootstrap_ci(d, fit, c, broken);
        FAIL("expected TooManyFailures");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooManyFailures);
    }
}
