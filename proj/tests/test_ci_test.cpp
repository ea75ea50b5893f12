#include <catch2/catch_amalgamated.hpp>

#include "tabbench/ci_test.hpp"
#include "tabbench/rng.hpp"

using namespace tabbench;

namespace {

DataTable numeric_table(const std::vector<std::vector<double>>& columns,
                        const std::vector<std::string>& names) {
    std::vector<ColumnSchema> schema;
    for (const auto& n : names) schema.push_back({n, ColumnKind::Numeric, {}});
    DataTable t(schema);
    for (std::size_t r = 0; r < columns[0].size(); ++r) {
        std::size_t row = t.add_row();
        for (std::size_t c = 0; c < columns.size(); ++c) t.set_numeric(c, row, columns[c][r]);
    }
    return t;
}

DataTable binary_pair(const std::vector<int>& xs, const std::vector<int>& ys) {
    DataTable t({{"x", ColumnKind::Categorical, {"0", "1"}},
                 {"y", ColumnKind::Categorical, {"0", "1"}}});
    for (std::size_t r = 0; r < xs.size(); ++r) {
        std::size_t row = t.add_row();
        t.set_category(0, row, xs[r]);
        t.set_category(1, row, ys[r]);
    }
    return t;
}

} // namespace

TEST_CASE("chi-square: identical balanced binary columns give statistic n") {
    std::vector<int> xs, ys;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(i % 2);
        ys.push_back(i % 2);
    }
    CiTestResult r = chi_square_ci(binary_pair(xs, ys), "x", "y", {}, 0.01);
    CHECK(r.statistic == Catch::Approx(100.0));
    CHECK(r.dof == 1.0);
    CHECK(r.p_value < 1e-20);
    CHECK_FALSE(r.independent);
}

TEST_CASE("chi-square: constant column is degenerate") {
    std::vector<int> xs(40, 0), ys;
    for (int i = 0; i < 40; ++i) ys.push_back(i % 2);
    CiTestResult r = chi_square_ci(binary_pair(xs, ys), "x", "y", {}, 0.01);
    CHECK(r.statistic == 0.0);
    CHECK(r.dof == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.independent);
}

TEST_CASE("chi-square: conditioning separates a discrete chain") {
    // x -> z -> y with strong links: marginally dependent, independent given z.
    RngStream rng(500);
    DataTable t({{"x", ColumnKind::Categorical, {"0", "1"}},
                 {"z", ColumnKind::Categorical, {"0", "1"}},
                 {"y", ColumnKind::Categorical, {"0", "1"}}});
    for (int i = 0; i < 5000; ++i) {
        int x = rng.uniform() < 0.5 ? 0 : 1;
        int z = rng.uniform() < (x ? 0.9 : 0.1) ? 1 : 0;
        int y = rng.uniform() < (z ? 0.9 : 0.1) ? 1 : 0;
        std::size_t r = t.add_row();
        t.set_category(0, r, x);
        t.set_category(1, r, z);
        t.set_category(2, r, y);
    }
    CHECK_FALSE(chi_square_ci(t, "x", "y", {}, 0.01).independent);
    CHECK(chi_square_ci(t, "x", "y", {"z"}, 0.01).independent);
}

TEST_CASE("chi-square: null calibration at alpha 0.01") {
    int rejections = 0;
    const int sims = 500, n = 10000;
    for (int s = 0; s < sims; ++s) {
        RngStream rng(9000 + s);
        std::vector<int> xs(n), ys(n);
        for (int i = 0; i < n; ++i) {
            xs[i] = rng.uniform() < 0.5 ? 0 : 1;
            ys[i] = rng.uniform() < 0.5 ? 0 : 1;
        }
        if (!chi_square_ci(binary_pair(xs, ys), "x", "y", {}, 0.01).independent)
            ++rejections;
    }
    double rate = static_cast<double>(rejections) / sims;
    CHECK(rate >= 0.002);
    CHECK(rate <= 0.03);
}

TEST_CASE("chi-square input validation") {
    DataTable t({{"x", ColumnKind::Numeric, {}}, {"y", ColumnKind::Categorical, {"a", "b"}}});
    std::size_t r = t.add_row();
    t.set_numeric(0, r, 1.0);
    t.set_category(1, r, 0);
    CHECK_THROWS_AS(chi_square_ci(t, "x", "y", {}, 0.01), ValidationError);
    CHECK_THROWS_AS(chi_square_ci(binary_pair({}, {}), "x", "y", {}, 0.01), ValidationError);
    CHECK_THROWS_AS(chi_square_ci(binary_pair({0, 1}, {0, 1}), "x", "y", {}, 1.5),
                    ValidationError);
}

TEST_CASE("partial correlation: exact linear dependence") {
    std::vector<double> x, y;
    RngStream rng(3);
    for (int i = 0; i < 50; ++i) {
        x.push_back(rng.normal());
        y.push_back(x.back());
    }
    CiTestResult r = partial_corr_ci(numeric_table({x, y}, {"x", "y"}), "x", "y", {}, 0.01);
    CHECK(r.p_value < 1e-30);
    CHECK_FALSE(r.independent);
    CHECK(std::isfinite(r.statistic));
}

TEST_CASE("partial correlation: null calibration at alpha 0.01") {
    int rejections = 0;
    const int sims = 500, n = 2000;
    for (int s = 0; s < sims; ++s) {
        RngStream rng(40000 + s);
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.normal();
            y[i] = rng.normal();
        }
        if (!partial_corr_ci(numeric_table({x, y}, {"x", "y"}), "x", "y", {}, 0.01)
                 .independent)
            ++rejections;
    }
    double rate = static_cast<double>(rejections) / sims;
    CHECK(rate >= 0.002);
    CHECK(rate <= 0.03);
}

TEST_CASE("partial correlation: Gaussian chain matches d-separation") {
    int marginal_dependent = 0, conditional_independent = 0;
    const int reps = 100, n = 5000;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(777 + rep);
        std::vector<double> x(n), z(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.normal();
            z[i] = 0.8 * x[i] + 0.6 * rng.normal();
            y[i] = 0.8 * z[i] + 0.6 * rng.normal();
        }
        DataTable t = numeric_table({x, z, y}, {"x", "z", "y"});
        if (!partial_corr_ci(t, "x", "y", {}, 0.01).independent) ++marginal_dependent;
        if (partial_corr_ci(t, "x", "y", {"z"}, 0.01).independent) ++conditional_independent;
    }
    CHECK(marginal_dependent >= 95);
    CHECK(conditional_independent >= 95);
}

TEST_CASE("partial correlation: affine rescaling leaves the statistic unchanged") {
    RngStream rng(8);
    std::vector<double> x(200), y(200), z(200);
    for (int i = 0; i < 200; ++i) {
        x[i] = rng.normal();
        z[i] = rng.normal();
        y[i] = 0.5 * x[i] + z[i] + rng.normal();
    }
    DataTable t = numeric_table({x, y, z}, {"x", "y", "z"});
    std::vector<double> x2(200), y2(200);
    for (int i = 0; i < 200; ++i) {
        x2[i] = 3.0 * x[i] - 7.0;
        y2[i] = -0.25 * y[i] + 2.0;
    }
    DataTable t2 = numeric_table({x2, y2, z}, {"x", "y", "z"});
    CiTestResult a = partial_corr_ci(t, "x", "y", {"z"}, 0.01);
    CiTestResult b = partial_corr_ci(t2, "x", "y", {"z"}, 0.01);
    // Negative scaling flips the correlation sign; |statistic| is invariant.
    CHECK(std::abs(a.statistic) == Catch::Approx(std::abs(b.statistic)).margin(1e-9));
    CHECK(a.independent == b.independent);
}

TEST_CASE("partial correlation: degenerate inputs") {
    std::vector<double> c(50, 1.0), v;
    RngStream rng(12);
    for (int i = 0; i < 50; ++i) v.push_back(rng.normal());
    CHECK_THROWS_WITH(
        partial_corr_ci(numeric_table({c, c}, {"x", "y"}), "x", "y", {}, 0.01),
        Catch::Matchers::ContainsSubstring("zero-variance"));
    // One constant side: no detectable association.
    CiTestResult r = partial_corr_ci(numeric_table({c, v}, {"x", "y"}), "x", "y", {}, 0.01);
    CHECK(r.independent);
    CHECK_THROWS_AS(
        partial_corr_ci(numeric_table({{1, 2, 3}, {1, 2, 3}}, {"x", "y"}), "x", "y", {}, 0.01),
        ValidationError);  // n <= |z| + 3
}

TEST_CASE("residualisation: numeric identity is dependent") {
    std::vector<double> x;
    RngStream rng(5);
    for (int i = 0; i < 200; ++i) x.push_back(rng.normal());
    CiTestResult r = residual_ci(numeric_table({x, x}, {"x", "y"}), "x", "y", {}, 0.01);
    CHECK(r.p_value < 1e-12);
    CHECK_FALSE(r.independent);
}

TEST_CASE("residualisation: null calibration binary vs numeric") {
    int rejections = 0;
    const int sims = 500, n = 2000;
    for (int s = 0; s < sims; ++s) {
        RngStream rng(70000 + s);
        DataTable t({{"c", ColumnKind::Categorical, {"a", "b"}},
                     {"u", ColumnKind::Numeric, {}}});
        for (int i = 0; i < n; ++i) {
            std::size_t r = t.add_row();
            t.set_category(0, r, rng.uniform() < 0.5 ? 0 : 1);
            t.set_numeric(1, r, rng.normal());
        }
        if (!residual_ci(t, "c", "u", {}, 0.01).independent) ++rejections;
    }
    double rate = static_cast<double>(rejections) / sims;
    CHECK(rate >= 0.002);
    CHECK(rate <= 0.03);
}

TEST_CASE("residualisation: mixed collider matches d-separation") {
    int marginal_independent = 0, conditional_dependent = 0;
    const int reps = 100, n = 5000;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(31000 + rep);
        DataTable t({{"c", ColumnKind::Categorical, {"a", "b"}},
                     {"m", ColumnKind::Numeric, {}},
                     {"u", ColumnKind::Numeric, {}}});
        for (int i = 0; i < n; ++i) {
            int c = rng.uniform() < 0.5 ? 0 : 1;
            double u = rng.normal();
            double m = (c ? 1.0 : -1.0) + 1.5 * u + 0.8 * rng.normal();
            std::size_t r = t.add_row();
            t.set_category(0, r, c);
            t.set_numeric(1, r, m);
            t.set_numeric(2, r, u);
        }
        if (residual_ci(t, "c", "u", {}, 0.01).independent) ++marginal_independent;
        if (!residual_ci(t, "c", "u", {"m"}, 0.01).independent) ++conditional_dependent;
    }
    CHECK(marginal_independent >= 90);
    CHECK(conditional_dependent >= 90);
}

TEST_CASE("residualisation: multi-category blocks and conditioning") {
    // c (3 states) shifts the mean of u; conditioning on u screens off w.
    RngStream rng(9100);
    DataTable t({{"c", ColumnKind::Categorical, {"a", "b", "d"}},
                 {"u", ColumnKind::Numeric, {}},
                 {"w", ColumnKind::Numeric, {}}});
    for (int i = 0; i < 3000; ++i) {
        auto c = static_cast<int>(rng.uniform_int(3));
        double u = static_cast<double>(c) + 0.5 * rng.normal();
        double w = u + 0.5 * rng.normal();
        std::size_t r = t.add_row();
        t.set_category(0, r, c);
        t.set_numeric(1, r, u);
        t.set_numeric(2, r, w);
    }
    CHECK_FALSE(residual_ci(t, "c", "w", {}, 0.01).independent);
    CHECK(residual_ci(t, "c", "w", {"u"}, 0.01).independent);
}

TEST_CASE("all tests are symmetric in x and y") {
    RngStream rng(6);
    DataTable t({{"a", ColumnKind::Categorical, {"0", "1", "2"}},
                 {"b", ColumnKind::Categorical, {"0", "1"}},
                 {"u", ColumnKind::Numeric, {}},
                 {"v", ColumnKind::Numeric, {}}});
    for (int i = 0; i < 500; ++i) {
        std::size_t r = t.add_row();
        int a = static_cast<int>(rng.uniform_int(3));
        t.set_category(0, r, a);
        t.set_category(1, r, rng.uniform() < (a == 0 ? 0.3 : 0.7) ? 1 : 0);
        double u = rng.normal() + a;
        t.set_numeric(2, r, u);
        t.set_numeric(3, r, 0.4 * u + rng.normal());
    }
    auto symmetric = [](const CiTestResult& p, const CiTestResult& q) {
        CHECK(p.statistic == Catch::Approx(q.statistic).margin(1e-9));
        CHECK(p.p_value == Catch::Approx(q.p_value).margin(1e-9));
        CHECK(p.independent == q.independent);
    };
    symmetric(chi_square_ci(t, "a", "b", {}, 0.01), chi_square_ci(t, "b", "a", {}, 0.01));
    symmetric(partial_corr_ci(t, "u", "v", {}, 0.01), partial_corr_ci(t, "v", "u", {}, 0.01));
    symmetric(residual_ci(t, "a", "u", {"b"}, 0.01), residual_ci(t, "u", "a", {"b"}, 0.01));
    symmetric(residual_ci(t, "a", "u", {"v"}, 0.01), residual_ci(t, "u", "a", {"v"}, 0.01));
}

TEST_CASE("tests are invariant to row order") {
    RngStream rng(44);
    std::vector<double> x(300), y(300);
    std::vector<int> a(300), b(300);
    for (int i = 0; i < 300; ++i) {
        x[i] = rng.normal();
        y[i] = 0.3 * x[i] + rng.normal();
        a[i] = rng.uniform() < 0.5 ? 0 : 1;
        b[i] = rng.uniform() < (a[i] ? 0.6 : 0.4) ? 1 : 0;
    }
    auto reversed = [](auto v) {
        std::reverse(v.begin(), v.end());
        return v;
    };
    CiTestResult n1 = partial_corr_ci(numeric_table({x, y}, {"x", "y"}), "x", "y", {}, 0.01);
    CiTestResult n2 = partial_corr_ci(numeric_table({reversed(x), reversed(y)}, {"x", "y"}),
                                      "x", "y", {}, 0.01);
    CHECK(n1.statistic == Catch::Approx(n2.statistic).margin(1e-9));
    CiTestResult c1 = chi_square_ci(binary_pair(a, b), "x", "y", {}, 0.01);
    CiTestResult c2 = chi_square_ci(binary_pair(reversed(a), reversed(b)), "x", "y", {}, 0.01);
    CHECK(c1.statistic == Catch::Approx(c2.statistic).margin(1e-9));
}

TEST_CASE("chi-square p-value is monotone in the statistic at fixed dof") {
    for (double dof : {1.0, 3.0, 10.0}) {
        double prev = 2.0;
        for (double stat = 0.0; stat <= 50.0; stat += 0.5) {
            double p = chi2_sf(stat, dof);
            REQUIRE(p <= prev + 1e-15);
            prev = p;
        }
    }
}

TEST_CASE("select_test follows the column kinds") {
    std::vector<ColumnSchema> schema{{"c1", ColumnKind::Categorical, {"a", "b"}},
                                     {"c2", ColumnKind::Categorical, {"a", "b"}},
                                     {"n1", ColumnKind::Numeric, {}},
                                     {"n2", ColumnKind::Numeric, {}}};
    CHECK(select_test(schema, "c1", "c2", {}) == CiTestKind::ChiSquare);
    CHECK(select_test(schema, "n1", "n2", {}) == CiTestKind::PartialCorrelation);
    CHECK(select_test(schema, "c1", "n1", {}) == CiTestKind::Residualisation);
    CHECK(select_test(schema, "c1", "c2", {"n1"}) == CiTestKind::Residualisation);
    CHECK(select_test(schema, "n1", "n2", {"c1"}) == CiTestKind::Residualisation);
    CHECK_THROWS_AS(select_test(schema, "zzz", "c1", {}), ValidationError);
}
