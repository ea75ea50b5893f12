#include <catch2/catch_amalgamated.hpp>

#include "tabbench/rng.hpp"
#include "tabbench/stats.hpp"

using namespace tabbench;

// Reference values computed independently with scipy 1.x.
TEST_CASE("chi-square survival function matches reference values") {
    CHECK(chi2_sf(3.841458820694124, 1) == Catch::Approx(0.05).epsilon(1e-10));
    CHECK(chi2_sf(100.0, 1) == Catch::Approx(1.5239706048320995e-23).epsilon(1e-9));
    CHECK(chi2_sf(0.5, 2) == Catch::Approx(0.7788007830714049).epsilon(1e-12));
    CHECK(chi2_sf(12.3, 7) == Catch::Approx(0.0911148860003131).epsilon(1e-12));
    CHECK(chi2_sf(45.2, 30.5) == Catch::Approx(0.042143066661738754).epsilon(1e-12));
    CHECK(chi2_sf(0.0, 3) == 1.0);
    CHECK(chi2_sf(10.0, 0) == 1.0);
}

TEST_CASE("incomplete gamma and beta match reference values") {
    CHECK(gamma_p(2.5, 1.3) == Catch::Approx(0.23863473215498604).epsilon(1e-12));
    CHECK(gamma_p(2.5, 1.3) + gamma_q(2.5, 1.3) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(beta_inc(2.0, 3.0, 0.4) == Catch::Approx(0.5248).epsilon(1e-12));
    CHECK(beta_inc(0.5, 0.5, 0.9) == Catch::Approx(0.7951672353008665).epsilon(1e-12));
}

TEST_CASE("F survival function matches reference values") {
    CHECK(f_sf(1.0, 1, 10) == Catch::Approx(0.34089313230205975).epsilon(1e-12));
    CHECK(f_sf(3.5, 4, 100) == Catch::Approx(0.010197107241269697).epsilon(1e-12));
    CHECK(f_sf(0.2, 3, 7) == Catch::Approx(0.89316795566249).epsilon(1e-12));
}

TEST_CASE("normal distribution helpers") {
    CHECK(normal_sf(1.959963984540054) == Catch::Approx(0.025).epsilon(1e-12));
    CHECK(normal_sf(-0.5) == Catch::Approx(0.6914624612740131).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).margin(1e-9));
    CHECK(normal_quantile(0.01) == Catch::Approx(-2.3263478740408408).margin(1e-9));
    CHECK(normal_quantile(1e-9) == Catch::Approx(-5.9978070150076865).margin(1e-7));
    CHECK(normal_cdf(normal_quantile(0.123)) == Catch::Approx(0.123).margin(1e-12));
}

TEST_CASE("two-sample KS statistic") {
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_statistic({0, 0, 0}, {1, 1, 1}) == 1.0);
    // F1 jumps to 1 at 1; F2 still 0 there.
    CHECK(ks_statistic({1, 1}, {2, 2}) == 1.0);
    CHECK(ks_statistic({1, 2, 3, 4}, {1, 2, 3, 40}) == Catch::Approx(0.25));
}

TEST_CASE("quantile and median conventions") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(quantile_sorted(v, 0.1) == 1.0);
    CHECK(quantile_sorted(v, 0.25) == 3.0);
    CHECK(quantile_sorted(v, 1.0) == 10.0);
    CHECK(median_lower({3, 1, 2}) == 2.0);
    CHECK(median_lower({4, 1, 2, 3}) == 2.0);  // lower median on even counts
}

TEST_CASE("pearson correlation") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == Catch::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {6, 4, 2}) == Catch::Approx(-1.0));
    CHECK(pearson({1, 1, 1}, {2, 4, 6}) == 0.0);
}

TEST_CASE("counter-based streams are order independent") {
    RngStream a(42, 3, 7);
    RngStream b(42, 3, 7);
    CHECK(a.next_u64() == b.next_u64());
    RngStream c(42, 3, 8);
    CHECK(a.next_u64() != c.next_u64());

    // Uniforms land in [0,1) and look roughly uniform.
    RngStream d(7);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = d.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 10000.0 == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("normal draws have the right first two moments") {
    RngStream rng(123);
    double s = 0.0, s2 = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    CHECK(mean == Catch::Approx(0.0).margin(0.02));
    CHECK(var == Catch::Approx(1.0).margin(0.03));
}
