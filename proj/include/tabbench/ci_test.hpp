#pragma once

// The three conditional-independence tests plus kind selection:
// chi-square for categorical columns, Fisher-z partial correlation for
// numeric columns, and a residualisation test for mixed kinds that scores
// the canonical correlations between residual blocks (Pillai trace) with
// an F approximation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tabbench/error.hpp"
#include "tabbench/stats.hpp"
#include "tabbench/table.hpp"

namespace tabbench {

enum class CiTestKind { ChiSquare, PartialCorrelation, Residualisation };

inline const char* ci_test_kind_name(CiTestKind k) {
    switch (k) {
        case CiTestKind::ChiSquare: return "chi_square";
        case CiTestKind::PartialCorrelation: return "partial_correlation";
        case CiTestKind::Residualisation: return "residualisation_pillai";
    }
    return "unknown";
}

struct CiTestResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    bool independent = true;
    CiTestKind test_kind = CiTestKind::ChiSquare;
};

struct CiTestOptions {
    bool pool_small_strata = true;    // chi-square: merge strata below the row floor
    std::size_t min_stratum_rows = 5;
    double ridge = 1e-8;              // residualisation: damping on the z normal equations
};

namespace ci_detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("ci test: alpha must lie in (0, 1)");
}

inline std::size_t require_column(const DataTable& t, const std::string& name,
                                  ColumnKind kind, const char* test) {
    std::size_t c = t.column_index(name);
    if (t.schema()[c].kind != kind)
        throw ValidationError(std::string(test) + ": column '" + name + "' has the wrong kind");
    return c;
}

inline void require_present(const DataTable& t, std::size_t col) {
    for (std::size_t r = 0; r < t.row_count(); ++r)
        if (t.is_missing(col, r))
            throw ValidationError("ci test: column '" + t.schema()[col].name +
                                  "' contains missing cells");
}

/// Pearson chi-square of one stratum. Degenerate strata (one observed value
/// on either side) contribute nothing.
inline void accumulate_chi2(const std::vector<std::int32_t>& xs,
                            const std::vector<std::int32_t>& ys, std::size_t x_card,
                            std::size_t y_card, double& stat, double& dof) {
    std::vector<double> counts(x_card * y_card, 0.0);
    std::vector<double> row_tot(x_card, 0.0), col_tot(y_card, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto xi = static_cast<std::size_t>(xs[i]);
        auto yi = static_cast<std::size_t>(ys[i]);
        counts[xi * y_card + yi] += 1.0;
        row_tot[xi] += 1.0;
        col_tot[yi] += 1.0;
    }
    std::size_t r_obs = 0, c_obs = 0;
    for (double v : row_tot) r_obs += v > 0 ? 1 : 0;
    for (double v : col_tot) c_obs += v > 0 ? 1 : 0;
    if (r_obs <= 1 || c_obs <= 1) return;
    auto n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < x_card; ++i) {
        if (row_tot[i] <= 0) continue;
        for (std::size_t j = 0; j < y_card; ++j) {
            if (col_tot[j] <= 0) continue;
            double expected = row_tot[i] * col_tot[j] / n;
            double d = counts[i * y_card + j] - expected;
            stat += d * d / expected;
        }
    }
    dof += static_cast<double>((r_obs - 1) * (c_obs - 1));
}

} // namespace ci_detail

// ---------------------------------------------------------------------------

inline CiTestResult chi_square_ci(const DataTable& table, const std::string& x,
                                  const std::string& y,
                                  const std::vector<std::string>& z, double alpha,
                                  const CiTestOptions& opts = {}) {
    ci_detail::check_alpha(alpha);
    if (table.row_count() == 0) throw ValidationError("chi_square_ci: empty table");
    std::size_t cx = ci_detail::require_column(table, x, ColumnKind::Categorical, "chi_square_ci");
    std::size_t cy = ci_detail::require_column(table, y, ColumnKind::Categorical, "chi_square_ci");
    std::vector<std::size_t> cz;
    for (const auto& name : z)
        cz.push_back(
            ci_detail::require_column(table, name, ColumnKind::Categorical, "chi_square_ci"));
    ci_detail::require_present(table, cx);
    ci_detail::require_present(table, cy);
    for (std::size_t c : cz) ci_detail::require_present(table, c);

    const std::size_t n = table.row_count();
    const std::size_t x_card = table.schema()[cx].categories.size();
    const std::size_t y_card = table.schema()[cy].categories.size();

    std::map<std::vector<std::int32_t>, std::pair<std::vector<std::int32_t>,
                                                  std::vector<std::int32_t>>>
        strata;
    std::vector<std::int32_t> key(cz.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < cz.size(); ++k) key[k] = table.category(cz[k], r);
        auto& cell = strata[key];
        cell.first.push_back(table.category(cx, r));
        cell.second.push_back(table.category(cy, r));
    }

    double stat = 0.0, dof = 0.0;
    std::vector<std::int32_t> pooled_x, pooled_y;
    for (auto& [k, cell] : strata) {
        if (opts.pool_small_strata && cell.first.size() < opts.min_stratum_rows) {
            pooled_x.insert(pooled_x.end(), cell.first.begin(), cell.first.end());
            pooled_y.insert(pooled_y.end(), cell.second.begin(), cell.second.end());
            continue;
        }
        ci_detail::accumulate_chi2(cell.first, cell.second, x_card, y_card, stat, dof);
    }
    if (!pooled_x.empty())
        ci_detail::accumulate_chi2(pooled_x, pooled_y, x_card, y_card, stat, dof);

    CiTestResult res;
    res.test_kind = CiTestKind::ChiSquare;
    res.statistic = stat;
    res.dof = dof;
    res.p_value = chi2_sf(stat, dof);
    res.independent = res.p_value > alpha;
    return res;
}

// ---------------------------------------------------------------------------

inline CiTestResult partial_corr_ci(const DataTable& table, const std::string& x,
                                    const std::string& y,
                                    const std::vector<std::string>& z, double alpha,
                                    const CiTestOptions& = {}) {
    ci_detail::check_alpha(alpha);
    std::size_t cx =
        ci_detail::require_column(table, x, ColumnKind::Numeric, "partial_corr_ci");
    std::size_t cy =
        ci_detail::require_column(table, y, ColumnKind::Numeric, "partial_corr_ci");
    std::vector<std::size_t> cz;
    for (const auto& name : z)
        cz.push_back(ci_detail::require_column(table, name, ColumnKind::Numeric,
                                               "partial_corr_ci"));
    const std::size_t n = table.row_count();
    if (n <= z.size() + 3)
        throw ValidationError("partial_corr_ci: need more than |z| + 3 rows");
    ci_detail::require_present(table, cx);
    ci_detail::require_present(table, cy);
    for (std::size_t c : cz) ci_detail::require_present(table, c);

    auto ni = static_cast<Eigen::Index>(n);
    Eigen::VectorXd vx(ni), vy(ni);
    for (std::size_t r = 0; r < n; ++r) {
        vx(static_cast<Eigen::Index>(r)) = table.numeric(cx, r);
        vy(static_cast<Eigen::Index>(r)) = table.numeric(cy, r);
    }
    Eigen::VectorXd rx, ry;
    if (cz.empty()) {
        rx = vx.array() - vx.mean();
        ry = vy.array() - vy.mean();
    } else {
        Eigen::MatrixXd design(ni, static_cast<Eigen::Index>(cz.size() + 1));
        design.col(0).setOnes();
        for (std::size_t k = 0; k < cz.size(); ++k)
            for (std::size_t r = 0; r < n; ++r)
                design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k + 1)) =
                    table.numeric(cz[k], r);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        rx = vx - design * qr.solve(vx);
        ry = vy - design * qr.solve(vy);
    }

    double sxx = rx.squaredNorm(), syy = ry.squaredNorm();
    double scale = (vx.array() - vx.mean()).matrix().squaredNorm() +
                   (vy.array() - vy.mean()).matrix().squaredNorm() + 1.0;
    double tol = 1e-12 * scale;
    if (sxx <= tol && syy <= tol)
        throw ValidationError("partial_corr_ci: zero-variance residuals on both sides");

    double r = (sxx <= tol || syy <= tol) ? 0.0 : rx.dot(ry) / std::sqrt(sxx * syy);
    const double clamp = 1.0 - 1e-12;
    r = std::clamp(r, -clamp, clamp);

    double dof = static_cast<double>(n) - static_cast<double>(z.size()) - 3.0;
    double stat = std::sqrt(dof) * 0.5 * std::log((1.0 + r) / (1.0 - r));

    CiTestResult res;
    res.test_kind = CiTestKind::PartialCorrelation;
    res.statistic = stat;
    res.dof = dof;
    res.p_value = 2.0 * normal_sf(std::abs(stat));
    res.independent = res.p_value > alpha;
    return res;
}

// ---------------------------------------------------------------------------

namespace ci_detail {

/// Encoded block of one variable: z-scored numeric column, or a one-hot
/// block with the last category dropped (redundant given an intercept).
inline Eigen::MatrixXd encode_block(const DataTable& t, std::size_t col) {
    auto n = static_cast<Eigen::Index>(t.row_count());
    if (t.schema()[col].kind == ColumnKind::Numeric) {
        Eigen::MatrixXd m(n, 1);
        for (std::size_t r = 0; r < t.row_count(); ++r)
            m(static_cast<Eigen::Index>(r), 0) = t.numeric(col, r);
        double mean = m.col(0).mean();
        double sd = std::sqrt((m.col(0).array() - mean).square().sum() /
                              static_cast<double>(t.row_count()));
        if (sd <= 0.0) sd = 1.0;
        m.col(0) = (m.col(0).array() - mean) / sd;
        return m;
    }
    auto k = static_cast<Eigen::Index>(t.schema()[col].categories.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, std::max<Eigen::Index>(k - 1, 0));
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        auto idx = static_cast<Eigen::Index>(t.category(col, r));
        if (idx < k - 1) m(static_cast<Eigen::Index>(r), idx) = 1.0;
    }
    return m;
}

/// Columns of an orthonormal basis of col(m), rank-revealing.
inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& m) {
    if (m.cols() == 0) return Eigen::MatrixXd(m.rows(), 0);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(1e-9);
    auto rank = qr.rank();
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), rank);
    return q;
}

} // namespace ci_detail

inline CiTestResult residual_ci(const DataTable& table, const std::string& x,
                                const std::string& y, const std::vector<std::string>& z,
                                double alpha, const CiTestOptions& opts = {}) {
    ci_detail::check_alpha(alpha);
    std::size_t cx = table.column_index(x);
    std::size_t cy = table.column_index(y);
    std::vector<std::size_t> cz;
    for (const auto& name : z) cz.push_back(table.column_index(name));
    ci_detail::require_present(table, cx);
    ci_detail::require_present(table, cy);
    for (std::size_t c : cz) ci_detail::require_present(table, c);

    const std::size_t n = table.row_count();
    Eigen::MatrixXd xb = ci_detail::encode_block(table, cx);
    Eigen::MatrixXd yb = ci_detail::encode_block(table, cy);

    std::size_t z_width = 0;
    std::vector<Eigen::MatrixXd> z_blocks;
    for (std::size_t c : cz) {
        z_blocks.push_back(ci_detail::encode_block(table, c));
        z_width += static_cast<std::size_t>(z_blocks.back().cols());
    }
    if (n <= z_width + 3)
        throw ValidationError("residual_ci: need more than encoded |z| + 3 rows");

    auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd design(ni, static_cast<Eigen::Index>(1 + z_width));
    design.col(0).setOnes();
    Eigen::Index at = 1;
    for (const auto& blk : z_blocks) {
        design.middleCols(at, blk.cols()) = blk;
        at += blk.cols();
    }

    // Residualise on z via ridge-damped normal equations.
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += opts.ridge;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    Eigen::MatrixXd rx = xb - design * solver.solve(design.transpose() * xb);
    Eigen::MatrixXd ry = yb - design * solver.solve(design.transpose() * yb);

    // A block fully explained by z leaves only numerical noise; treat it as
    // zero so its basis cannot fake canonical correlations.
    if (rx.norm() <= 1e-7 * (xb.norm() + 1.0)) rx.setZero();
    if (ry.norm() <= 1e-7 * (yb.norm() + 1.0)) ry.setZero();

    const auto px = static_cast<double>(xb.cols());
    const auto py = static_cast<double>(yb.cols());

    CiTestResult res;
    res.test_kind = CiTestKind::Residualisation;
    if (xb.cols() == 0 || yb.cols() == 0) {
        res.independent = true;
        return res;
    }

    // Pillai trace = sum of squared canonical correlations between the
    // residual blocks, computed symmetrically from orthonormal bases.
    Eigen::MatrixXd qx = ci_detail::orthonormal_basis(rx);
    Eigen::MatrixXd qy = ci_detail::orthonormal_basis(ry);
    double pillai = 0.0;
    if (qx.cols() > 0 && qy.cols() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(qx.transpose() * qy);
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
            double s = std::min(svd.singularValues()(i), 1.0);
            pillai += s * s;
        }
    }

    double s = std::min(px, py);
    double m_half = (std::abs(px - py) - 1.0) / 2.0;
    double ve = static_cast<double>(n) - static_cast<double>(1 + z_width) - py;
    double n_half = (ve - px - 1.0) / 2.0;
    double df1 = s * (2.0 * m_half + s + 1.0);
    double df2 = s * (2.0 * n_half + s + 1.0);
    if (df2 <= 0.0) throw ValidationError("residual_ci: insufficient rows for the F test");
    pillai = std::min(pillai, s * (1.0 - 1e-12));
    double f = (df2 / df1) * pillai / (s - pillai);

    res.statistic = f;
    res.dof = df1;
    res.p_value = f_sf(f, df1, df2);
    res.independent = res.p_value > alpha;
    return res;
}

// ---------------------------------------------------------------------------

inline CiTestKind select_test(const std::vector<ColumnSchema>& schema, const std::string& x,
                              const std::string& y, const std::vector<std::string>& z) {
    auto kind_of = [&](const std::string& name) {
        for (const auto& col : schema)
            if (col.name == name) return col.kind;
        throw ValidationError("select_test: unknown column '" + name + "'");
    };
    bool all_cat = kind_of(x) == ColumnKind::Categorical &&
                   kind_of(y) == ColumnKind::Categorical;
    bool all_num = kind_of(x) == ColumnKind::Numeric && kind_of(y) == ColumnKind::Numeric;
    for (const auto& name : z) {
        all_cat = all_cat && kind_of(name) == ColumnKind::Categorical;
        all_num = all_num && kind_of(name) == ColumnKind::Numeric;
    }
    if (all_cat) return CiTestKind::ChiSquare;
    if (all_num) return CiTestKind::PartialCorrelation;
    return CiTestKind::Residualisation;
}

/// Dispatch on the column kinds.
inline CiTestResult run_ci_test(const DataTable& table, const std::string& x,
                                const std::string& y, const std::vector<std::string>& z,
                                double alpha, const CiTestOptions& opts = {}) {
    switch (select_test(table.schema(), x, y, z)) {
        case CiTestKind::ChiSquare: return chi_square_ci(table, x, y, z, alpha, opts);
        case CiTestKind::PartialCorrelation:
            return partial_corr_ci(table, x, y, z, alpha, opts);
        case CiTestKind::Residualisation: return residual_ci(table, x, y, z, alpha, opts);
    }
    throw ValidationError("run_ci_test: unreachable");
}

} // namespace tabbench
