#pragma once

// Scoring along the four evaluation dimensions: structural fidelity
// (balanced accuracy of CI decisions against ground-truth labels), density
// estimation (Shape, Trend, alpha-precision, beta-recall), privacy (DCR,
// Authenticity) and downstream utility (train-on-synthetic, test-on-real).
//
// All distance-based metrics operate in the preprocessed space (one-hot +
// z-score) fitted on the reference table, which keeps mixed-type distances
// well-defined and scale-free.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabbench/ci_test.hpp"
#include "tabbench/dag.hpp"
#include "tabbench/error.hpp"
#include "tabbench/stats.hpp"
#include "tabbench/table.hpp"

namespace tabbench {

// ---------------------------------------------------------------------------
// Structural fidelity

struct ConfusionCounts {
    std::size_t tp = 0;  // truth independent, predicted independent
    std::size_t tn = 0;  // truth dependent, predicted dependent
    std::size_t fp = 0;  // truth dependent, predicted independent
    std::size_t fn = 0;  // truth independent, predicted dependent
};

struct LevelFidelity {
    double bacc = 0.0;  // percent
    ConfusionCounts confusion;
    std::size_t statements_evaluated = 0;
    bool single_class = false;
};

struct StructuralFidelityReport {
    LevelFidelity global;
    LevelFidelity local;
};

namespace metrics_detail {

inline LevelFidelity score_level(const CiRelationSet& relations, const DataTable& syn,
                                 double alpha, const CiTestOptions& opts) {
    LevelFidelity out;
    for (const auto& stmt : relations.statements) {
        CiTestResult res = run_ci_test(syn, stmt.x, stmt.y, stmt.z, alpha, opts);
        if (stmt.independent)
            ++(res.independent ? out.confusion.tp : out.confusion.fn);
        else
            ++(res.independent ? out.confusion.fp : out.confusion.tn);
    }
    const auto& c = out.confusion;
    out.statements_evaluated = c.tp + c.tn + c.fp + c.fn;
    std::size_t pos = c.tp + c.fn;  // ground-truth independent
    std::size_t neg = c.tn + c.fp;  // ground-truth dependent
    if (pos > 0 && neg > 0) {
        double sens = static_cast<double>(c.tp) / static_cast<double>(pos);
        double spec = static_cast<double>(c.tn) / static_cast<double>(neg);
        out.bacc = 50.0 * (sens + spec);
    } else if (pos + neg > 0) {
        // One label class only: fall back to plain accuracy on that class.
        out.single_class = true;
        double correct = static_cast<double>(pos > 0 ? c.tp : c.tn);
        out.bacc = 100.0 * correct / static_cast<double>(pos + neg);
    }
    return out;
}

} // namespace metrics_detail

inline StructuralFidelityReport structural_fidelity(const CiRelationSet& global,
                                                    const CiRelationSet& local,
                                                    const DataTable& syn, double alpha,
                                                    const CiTestOptions& opts = {}) {
    ci_detail::check_alpha(alpha);
    for (const auto* rel : {&global, &local})
        for (const auto& stmt : rel->statements) {
            syn.column_index(stmt.x);
            syn.column_index(stmt.y);
            for (const auto& zv : stmt.z) syn.column_index(zv);
        }
    StructuralFidelityReport report;
    report.global = metrics_detail::score_level(global, syn, alpha, opts);
    report.local = metrics_detail::score_level(local, syn, alpha, opts);
    return report;
}

// ---------------------------------------------------------------------------
// Density estimation

namespace metrics_detail {

inline void require_same_schema(const DataTable& ref, const DataTable& syn,
                                const char* what) {
    if (!ref.same_schema(syn))
        throw ValidationError(std::string(what) + ": schema mismatch");
    if (ref.row_count() == 0 || syn.row_count() == 0)
        throw ValidationError(std::string(what) + ": empty table");
}

inline std::vector<double> numeric_column(const DataTable& t, std::size_t c) {
    std::vector<double> out;
    out.reserve(t.row_count());
    for (std::size_t r = 0; r < t.row_count(); ++r)
        if (!t.is_missing(c, r)) out.push_back(t.numeric(c, r));
    return out;
}

inline std::vector<double> category_freqs(const DataTable& t, std::size_t c) {
    std::vector<double> f(t.schema()[c].categories.size(), 0.0);
    double n = 0.0;
    for (std::size_t r = 0; r < t.row_count(); ++r)
        if (!t.is_missing(c, r)) {
            f[static_cast<std::size_t>(t.category(c, r))] += 1.0;
            n += 1.0;
        }
    if (n > 0)
        for (double& v : f) v /= n;
    return f;
}

/// Decile edges of a reference column (nine interior cut points).
inline std::vector<double> decile_edges(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<double> edges;
    for (int d = 1; d <= 9; ++d)
        edges.push_back(quantile_sorted(values, static_cast<double>(d) / 10.0));
    return edges;
}

inline std::size_t bin_index(double v, const std::vector<double>& edges) {
    std::size_t b = 0;
    while (b < edges.size() && v > edges[b]) ++b;
    return b;
}

/// Cell index of a row in the pair's joint table, or -1 for missing cells.
inline long joint_cell(const DataTable& t, std::size_t r, std::size_t col,
                       const std::vector<double>& edges, std::size_t width) {
    if (t.is_missing(col, r)) return -1;
    std::size_t v = t.schema()[col].kind == ColumnKind::Numeric
                        ? bin_index(t.numeric(col, r), edges)
                        : static_cast<std::size_t>(t.category(col, r));
    return static_cast<long>(v % width);
}

} // namespace metrics_detail

/// Mean per-column marginal similarity: numeric columns use the KS complement,
/// categorical columns the total-variation complement.
inline double shape_score(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "shape_score");
    double total = 0.0;
    const auto& schema = ref.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (schema[c].kind == ColumnKind::Numeric) {
            auto a = metrics_detail::numeric_column(ref, c);
            auto b = metrics_detail::numeric_column(syn, c);
            if (a.empty() || b.empty())
                throw ValidationError("shape_score: column '" + schema[c].name +
                                      "' has no present cells");
            total += 1.0 - ks_statistic(std::move(a), std::move(b));
        } else {
            auto fa = metrics_detail::category_freqs(ref, c);
            auto fb = metrics_detail::category_freqs(syn, c);
            double tvd = 0.0;
            for (std::size_t k = 0; k < fa.size(); ++k) tvd += std::abs(fa[k] - fb[k]);
            total += 1.0 - 0.5 * tvd;
        }
    }
    double score = total / static_cast<double>(schema.size());
    return std::clamp(score, 0.0, 1.0);
}

/// Mean pairwise association similarity. Numeric-numeric pairs compare
/// Pearson correlations; pairs with a categorical member compare joint
/// contingency proportions, numeric members discretised into reference
/// deciles.
inline double trend_score(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "trend_score");
    const auto& schema = ref.schema();
    if (schema.size() < 2) throw ValidationError("trend_score: need at least 2 columns");

    std::vector<std::vector<double>> edges(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (schema[c].kind == ColumnKind::Numeric)
            edges[c] = metrics_detail::decile_edges(metrics_detail::numeric_column(ref, c));

    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        for (std::size_t b = a + 1; b < schema.size(); ++b) {
            ++pairs;
            if (schema[a].kind == ColumnKind::Numeric &&
                schema[b].kind == ColumnKind::Numeric) {
                auto collect = [&](const DataTable& t, std::vector<double>& va,
                                   std::vector<double>& vb) {
                    for (std::size_t r = 0; r < t.row_count(); ++r)
                        if (!t.is_missing(a, r) && !t.is_missing(b, r)) {
                            va.push_back(t.numeric(a, r));
                            vb.push_back(t.numeric(b, r));
                        }
                };
                std::vector<double> ra, rb, sa, sb;
                collect(ref, ra, rb);
                collect(syn, sa, sb);
                if (ra.empty() || sa.empty())
                    throw ValidationError("trend_score: no complete rows for a pair");
                total += 1.0 - std::abs(pearson(ra, rb) - pearson(sa, sb)) / 2.0;
            } else {
                std::size_t wa = schema[a].kind == ColumnKind::Numeric
                                     ? edges[a].size() + 1
                                     : schema[a].categories.size();
                std::size_t wb = schema[b].kind == ColumnKind::Numeric
                                     ? edges[b].size() + 1
                                     : schema[b].categories.size();
                auto joint = [&](const DataTable& t) {
                    std::vector<double> cells(wa * wb, 0.0);
                    double n = 0.0;
                    for (std::size_t r = 0; r < t.row_count(); ++r) {
                        long ia = metrics_detail::joint_cell(t, r, a, edges[a], wa);
                        long ib = metrics_detail::joint_cell(t, r, b, edges[b], wb);
                        if (ia < 0 || ib < 0) continue;
                        cells[static_cast<std::size_t>(ia) * wb +
                              static_cast<std::size_t>(ib)] += 1.0;
                        n += 1.0;
                    }
                    if (n > 0)
                        for (double& v : cells) v /= n;
                    return cells;
                };
                auto pr = joint(ref), ps = joint(syn);
                double tvd = 0.0;
                for (std::size_t k = 0; k < pr.size(); ++k) tvd += std::abs(pr[k] - ps[k]);
                total += 1.0 - 0.5 * tvd;
            }
        }
    }
    return std::clamp(total / static_cast<double>(pairs), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Support-overlap metrics and privacy

namespace metrics_detail {

inline Eigen::VectorXd coordinate_median(const Eigen::MatrixXd& m) {
    Eigen::VectorXd c(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        std::vector<double> col(m.rows());
        for (Eigen::Index i = 0; i < m.rows(); ++i) col[static_cast<std::size_t>(i)] = m(i, j);
        c(j) = median_lower(std::move(col));
    }
    return c;
}

/// alpha-precision on the quantile-ball support estimator. Roles already
/// assigned: the support is built from `support`, the coverage measured on
/// `probe`.
inline double quantile_ball_overlap(const Eigen::MatrixXd& support,
                                    const Eigen::MatrixXd& probe) {
    Eigen::VectorXd centre = coordinate_median(support);
    std::vector<double> support_d(static_cast<std::size_t>(support.rows()));
    for (Eigen::Index i = 0; i < support.rows(); ++i)
        support_d[static_cast<std::size_t>(i)] =
            (support.row(i).transpose() - centre).norm();
    std::sort(support_d.begin(), support_d.end());
    std::vector<double> probe_d(static_cast<std::size_t>(probe.rows()));
    for (Eigen::Index i = 0; i < probe.rows(); ++i)
        probe_d[static_cast<std::size_t>(i)] = (probe.row(i).transpose() - centre).norm();
    std::sort(probe_d.begin(), probe_d.end());

    double dev = 0.0;
    int grid_points = 0;
    for (int g = 1; g <= 49; ++g) {
        double alpha = static_cast<double>(g) * 0.02;
        double radius = quantile_sorted(support_d, alpha);
        auto within = static_cast<double>(
            std::upper_bound(probe_d.begin(), probe_d.end(), radius) - probe_d.begin());
        double coverage = within / static_cast<double>(probe_d.size());
        dev += std::abs(coverage - alpha);
        ++grid_points;
    }
    double score = 1.0 - 2.0 * dev / static_cast<double>(grid_points);
    return std::clamp(score, 0.0, 1.0);
}

/// Row-wise distance from each row of `a` to its nearest row of `b`,
/// optionally skipping the identical index (for self-neighbour queries).
inline std::vector<double> nearest_distances(const Eigen::MatrixXd& a,
                                             const Eigen::MatrixXd& b, bool skip_same_index) {
    Eigen::VectorXd a2 = a.rowwise().squaredNorm();
    Eigen::VectorXd b2 = b.rowwise().squaredNorm();
    std::vector<double> out(static_cast<std::size_t>(a.rows()));
    const Eigen::Index block = 256;
    for (Eigen::Index start = 0; start < a.rows(); start += block) {
        Eigen::Index rows = std::min(block, a.rows() - start);
        Eigen::MatrixXd cross = a.middleRows(start, rows) * b.transpose();
        for (Eigen::Index i = 0; i < rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < b.rows(); ++j) {
                if (skip_same_index && start + i == j) continue;
                double d2 = a2(start + i) + b2(j) - 2.0 * cross(i, j);
                best = std::min(best, std::max(d2, 0.0));
            }
            // Squared distances of exact copies cancel to rounding noise.
            if (best < 1e-9) best = 0.0;
            out[static_cast<std::size_t>(start + i)] = std::sqrt(best);
        }
    }
    return out;
}

} // namespace metrics_detail

/// How much of the synthetic sample falls inside reference quantile balls.
inline double alpha_precision(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "alpha_precision");
    Preprocessor pre = Preprocessor::fit(ref);
    return metrics_detail::quantile_ball_overlap(pre.transform(ref), pre.transform(syn));
}

/// How much of the reference sample falls inside synthetic quantile balls.
inline double beta_recall(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "beta_recall");
    Preprocessor pre = Preprocessor::fit(ref);
    return metrics_detail::quantile_ball_overlap(pre.transform(syn), pre.transform(ref));
}

/// Median distance from synthetic rows to their closest reference record.
inline double dcr(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "dcr");
    Preprocessor pre = Preprocessor::fit(ref);
    auto d = metrics_detail::nearest_distances(pre.transform(syn), pre.transform(ref), false);
    return median_lower(std::move(d));
}

/// Fraction of synthetic rows not closer to their nearest reference row than
/// that row's own nearest reference neighbour. Exact copies are always
/// unauthentic, including copies of duplicated reference rows (whose
/// neighbour spacing is zero).
inline double authenticity(const DataTable& ref, const DataTable& syn) {
    metrics_detail::require_same_schema(ref, syn, "authenticity");
    if (ref.row_count() < 2)
        throw ValidationError("authenticity: need at least two reference rows");
    Preprocessor pre = Preprocessor::fit(ref);
    Eigen::MatrixXd mref = pre.transform(ref);
    Eigen::MatrixXd msyn = pre.transform(syn);
    std::vector<double> ref_spacing =
        metrics_detail::nearest_distances(mref, mref, /*skip_same_index=*/true);

    Eigen::VectorXd s2 = msyn.rowwise().squaredNorm();
    Eigen::VectorXd r2 = mref.rowwise().squaredNorm();
    std::size_t authentic = 0;
    const Eigen::Index block = 256;
    for (Eigen::Index start = 0; start < msyn.rows(); start += block) {
        Eigen::Index rows = std::min(block, msyn.rows() - start);
        Eigen::MatrixXd cross = msyn.middleRows(start, rows) * mref.transpose();
        for (Eigen::Index i = 0; i < rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index best_j = 0;
            for (Eigen::Index j = 0; j < mref.rows(); ++j) {
                double d2 = s2(start + i) + r2(j) - 2.0 * cross(i, j);
                if (d2 < best) {
                    best = d2;
                    best_j = j;
                }
            }
            if (best < 1e-9) best = 0.0;
            double dist = std::sqrt(std::max(best, 0.0));
            if (dist > 0.0 && dist >= ref_spacing[static_cast<std::size_t>(best_j)])
                ++authentic;
        }
    }
    return static_cast<double>(authentic) / static_cast<double>(msyn.rows());
}

struct DensityReport {
    double shape = 0.0;
    double trend = 0.0;
    double alpha_precision = 0.0;
    double beta_recall = 0.0;
};

struct PrivacyReport {
    double dcr = 0.0;
    double authenticity = 0.0;
};

inline DensityReport density_report(const DataTable& ref, const DataTable& syn) {
    DensityReport r;
    r.shape = shape_score(ref, syn);
    r.trend = trend_score(ref, syn);
    r.alpha_precision = alpha_precision(ref, syn);
    r.beta_recall = beta_recall(ref, syn);
    return r;
}

inline PrivacyReport privacy_report(const DataTable& ref, const DataTable& syn) {
    PrivacyReport r;
    r.dcr = dcr(ref, syn);
    r.authenticity = authenticity(ref, syn);
    return r;
}

// ---------------------------------------------------------------------------
// Downstream utility: train-on-synthetic, test-on-real

enum class UtilityMetric { BalancedAccuracyPct, Rmse };

struct PredictorSpec {
    enum class Kind { Linear, Knn };
    Kind kind = Kind::Linear;
    int k = 5;  // Knn only

    std::string name() const {
        if (kind == Kind::Linear) return "linear_model";
        return "knn" + std::to_string(k);
    }
};

inline std::vector<PredictorSpec> default_predictors() {
    return {{PredictorSpec::Kind::Linear, 0}, {PredictorSpec::Kind::Knn, 5}};
}

struct UtilityReport {
    std::map<std::string, double> per_predictor;
    double mean_score = 0.0;
    UtilityMetric metric = UtilityMetric::BalancedAccuracyPct;
};

namespace metrics_detail {

/// Balanced accuracy in percent: macro-average recall over classes present
/// in the truth vector.
inline double balanced_accuracy_pct(const std::vector<int>& truth,
                                    const std::vector<int>& pred, std::size_t n_classes) {
    std::vector<double> correct(n_classes, 0.0), total(n_classes, 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        total[static_cast<std::size_t>(truth[i])] += 1.0;
        if (truth[i] == pred[i]) correct[static_cast<std::size_t>(truth[i])] += 1.0;
    }
    double sum = 0.0;
    int present = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
        if (total[k] == 0.0) continue;
        sum += correct[k] / total[k];
        ++present;
    }
    if (present == 0) throw ValidationError("balanced accuracy: empty test target");
    return 100.0 * sum / static_cast<double>(present);
}

/// Multinomial logistic regression by gradient descent with backtracking
/// line search; features are already standardised so plain descent behaves.
inline Eigen::MatrixXd fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                   std::size_t n_classes, double l2) {
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index d = x.cols();
    const auto k = static_cast<Eigen::Index>(n_classes);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, k);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), k);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        onehot(i, static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)])) = 1.0;

    auto loss_of = [&](const Eigen::MatrixXd& weights, Eigen::MatrixXd& probs) {
        Eigen::MatrixXd logits = x * weights;
        Eigen::VectorXd rowmax = logits.rowwise().maxCoeff();
        Eigen::MatrixXd shifted = logits.colwise() - rowmax;
        Eigen::MatrixXd ex = shifted.array().exp();
        Eigen::VectorXd norm = ex.rowwise().sum();
        probs = ex.array().colwise() / norm.array();
        double nll = -((onehot.array() * shifted.array()).rowwise().sum().matrix() -
                       norm.array().log().matrix())
                          .sum() /
                     n;
        return nll + 0.5 * l2 * weights.squaredNorm();
    };

    Eigen::MatrixXd probs;
    double loss = loss_of(w, probs);
    double step = 1.0;
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::MatrixXd grad = x.transpose() * (probs - onehot) / n + l2 * w;
        double gnorm = grad.norm();
        if (gnorm < 1e-7) break;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
            Eigen::MatrixXd cand = w - step * grad;
            Eigen::MatrixXd cand_probs;
            double cand_loss = loss_of(cand, cand_probs);
            if (cand_loss <= loss - 1e-4 * step * gnorm * gnorm) {
                w = std::move(cand);
                probs = std::move(cand_probs);
                loss = cand_loss;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return w;
}

struct EncodedSplit {
    Eigen::MatrixXd features;
    std::vector<int> class_target;
    Eigen::VectorXd numeric_target;
};

/// Feature matrix excludes the target column.
inline EncodedSplit encode_for_predictors(const Preprocessor& pre, const DataTable& t,
                                          std::size_t target_col, bool classification) {
    EncodedSplit out;
    Eigen::MatrixXd full = pre.transform(t);
    std::size_t off = pre.column_offset(target_col);
    std::size_t width = pre.column_width(target_col);
    Eigen::Index total = full.cols();
    out.features.resize(full.rows(), total - static_cast<Eigen::Index>(width));
    out.features << full.leftCols(static_cast<Eigen::Index>(off)),
        full.rightCols(total - static_cast<Eigen::Index>(off + width));
    if (classification) {
        out.class_target.resize(t.row_count());
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (t.is_missing(target_col, r))
                throw ValidationError("utility: missing target value");
            out.class_target[r] = t.category(target_col, r);
        }
    } else {
        out.numeric_target.resize(static_cast<Eigen::Index>(t.row_count()));
        for (std::size_t r = 0; r < t.row_count(); ++r) {
            if (t.is_missing(target_col, r))
                throw ValidationError("utility: missing target value");
            out.numeric_target(static_cast<Eigen::Index>(r)) = t.numeric(target_col, r);
        }
    }
    return out;
}

inline std::vector<int> knn_classify(const Eigen::MatrixXd& train, const std::vector<int>& y,
                                     const Eigen::MatrixXd& test, int k,
                                     std::size_t n_classes) {
    std::vector<int> pred(static_cast<std::size_t>(test.rows()));
    Eigen::VectorXd tr2 = train.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        Eigen::VectorXd d2 =
            tr2 - 2.0 * (train * test.row(i).transpose()) +
            Eigen::VectorXd::Constant(train.rows(), test.row(i).squaredNorm());
        std::vector<std::pair<double, Eigen::Index>> order(
            static_cast<std::size_t>(train.rows()));
        for (Eigen::Index j = 0; j < train.rows(); ++j)
            order[static_cast<std::size_t>(j)] = {d2(j), j};
        auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk),
                          order.end());
        std::vector<int> votes(n_classes, 0);
        for (std::size_t j = 0; j < kk; ++j)
            ++votes[static_cast<std::size_t>(y[static_cast<std::size_t>(order[j].second)])];
        int best = 0;
        for (std::size_t c = 1; c < n_classes; ++c)
            if (votes[c] > votes[static_cast<std::size_t>(best)])
                best = static_cast<int>(c);
        pred[static_cast<std::size_t>(i)] = best;
    }
    return pred;
}

inline Eigen::VectorXd knn_regress(const Eigen::MatrixXd& train, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& test, int k) {
    Eigen::VectorXd pred(test.rows());
    Eigen::VectorXd tr2 = train.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        Eigen::VectorXd d2 =
            tr2 - 2.0 * (train * test.row(i).transpose()) +
            Eigen::VectorXd::Constant(train.rows(), test.row(i).squaredNorm());
        std::vector<std::pair<double, Eigen::Index>> order(
            static_cast<std::size_t>(train.rows()));
        for (Eigen::Index j = 0; j < train.rows(); ++j)
            order[static_cast<std::size_t>(j)] = {d2(j), j};
        auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk),
                          order.end());
        double s = 0.0;
        for (std::size_t j = 0; j < kk; ++j) s += y(order[j].second);
        pred(i) = s / static_cast<double>(kk);
    }
    return pred;
}

} // namespace metrics_detail

/// Fit each predictor on the (preprocessed) train table and score on test:
/// balanced accuracy x100 for classification, RMSE on z-scored targets for
/// regression (z-scoring statistics come from the train table).
inline UtilityReport utility_eval(const DataTable& train, const DataTable& test,
                                  const std::vector<PredictorSpec>& predictors =
                                      default_predictors()) {
    if (!train.same_schema(test)) throw ValidationError("utility_eval: schema mismatch");
    if (!train.target()) throw ValidationError("utility_eval: no target column");
    if (train.row_count() == 0 || test.row_count() == 0)
        throw ValidationError("utility_eval: empty table");
    std::size_t target_col = train.target_index();
    bool classification = train.schema()[target_col].kind == ColumnKind::Categorical;

    Preprocessor pre = Preprocessor::fit(train);
    auto enc_train =
        metrics_detail::encode_for_predictors(pre, train, target_col, classification);
    auto enc_test =
        metrics_detail::encode_for_predictors(pre, test, target_col, classification);

    UtilityReport report;
    report.metric =
        classification ? UtilityMetric::BalancedAccuracyPct : UtilityMetric::Rmse;

    std::size_t n_classes =
        classification ? train.schema()[target_col].categories.size() : 0;
    double y_mean = 0.0, y_std = 1.0;
    if (classification) {
        std::vector<bool> seen(n_classes, false);
        for (int c : enc_train.class_target) seen[static_cast<std::size_t>(c)] = true;
        if (std::count(seen.begin(), seen.end(), true) < 2)
            throw ValidationError("utility_eval: train target has a single class");
    } else {
        y_mean = enc_train.numeric_target.mean();
        double var = (enc_train.numeric_target.array() - y_mean).square().sum() /
                     static_cast<double>(enc_train.numeric_target.size());
        y_std = std::sqrt(var);
        if (y_std <= 0.0)
            throw ValidationError("utility_eval: train target has zero variance");
    }

    for (const auto& spec : predictors) {
        double score = 0.0;
        if (classification) {
            std::vector<int> pred;
            if (spec.kind == PredictorSpec::Kind::Linear) {
                Eigen::MatrixXd x(enc_train.features.rows(), enc_train.features.cols() + 1);
                x << Eigen::VectorXd::Ones(enc_train.features.rows()), enc_train.features;
                Eigen::MatrixXd w =
                    metrics_detail::fit_softmax(x, enc_train.class_target, n_classes, 1e-4);
                Eigen::MatrixXd xt(enc_test.features.rows(), enc_test.features.cols() + 1);
                xt << Eigen::VectorXd::Ones(enc_test.features.rows()), enc_test.features;
                Eigen::MatrixXd logits = xt * w;
                pred.resize(static_cast<std::size_t>(logits.rows()));
                for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                    Eigen::Index arg = 0;
                    logits.row(i).maxCoeff(&arg);
                    pred[static_cast<std::size_t>(i)] = static_cast<int>(arg);
                }
            } else {
                pred = metrics_detail::knn_classify(enc_train.features,
                                                    enc_train.class_target,
                                                    enc_test.features, spec.k, n_classes);
            }
            score = metrics_detail::balanced_accuracy_pct(enc_test.class_target, pred,
                                                          n_classes);
        } else {
            Eigen::VectorXd pred;
            if (spec.kind == PredictorSpec::Kind::Linear) {
                Eigen::MatrixXd x(enc_train.features.rows(), enc_train.features.cols() + 1);
                x << Eigen::VectorXd::Ones(enc_train.features.rows()), enc_train.features;
                Eigen::MatrixXd gram = x.transpose() * x;
                gram.diagonal().array() += 1e-6;
                Eigen::VectorXd beta =
                    gram.ldlt().solve(x.transpose() * enc_train.numeric_target);
                Eigen::MatrixXd xt(enc_test.features.rows(), enc_test.features.cols() + 1);
                xt << Eigen::VectorXd::Ones(enc_test.features.rows()), enc_test.features;
                pred = xt * beta;
            } else {
                pred = metrics_detail::knn_regress(enc_train.features,
                                                   enc_train.numeric_target,
                                                   enc_test.features, spec.k);
            }
            Eigen::VectorXd err =
                (pred - enc_test.numeric_target) / (y_std > 0 ? y_std : 1.0);
            score = std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
        }
        report.per_predictor[spec.name()] = score;
    }
    double sum = 0.0;
    for (const auto& [name, s] : report.per_predictor) sum += s;
    report.mean_score = sum / static_cast<double>(report.per_predictor.size());
    return report;
}

// ---------------------------------------------------------------------------
// External predictions

/// Score a predictions CSV (`row_index,prediction`) against the test table
/// with the same rules as the built-in predictors. Regression errors are
/// z-scored by the train-table target std, matching the built-in scoring.
inline double score_external_predictions(const std::string& csv_text, const DataTable& test,
                                         double train_y_std) {
    if (!test.target()) throw ValidationError("external predictions: test has no target");
    std::size_t target_col = test.target_index();
    bool classification = test.schema()[target_col].kind == ColumnKind::Categorical;

    std::vector<ColumnSchema> schema{{"row_index", ColumnKind::Numeric, {}}};
    if (classification)
        schema.push_back({"prediction", ColumnKind::Categorical,
                          test.schema()[target_col].categories});
    else
        schema.push_back({"prediction", ColumnKind::Numeric, {}});
    DataTable preds = load_csv(csv_text, schema);
    if (preds.row_count() != test.row_count())
        throw ValidationError("external predictions: expected " +
                              std::to_string(test.row_count()) + " rows, found " +
                              std::to_string(preds.row_count()));

    std::vector<bool> seen(test.row_count(), false);
    if (classification) {
        std::size_t n_classes = test.schema()[target_col].categories.size();
        std::vector<int> truth(test.row_count()), pred(test.row_count());
        for (std::size_t r = 0; r < preds.row_count(); ++r) {
            if (preds.is_missing(0, r) || preds.is_missing(1, r))
                throw ValidationError("external predictions: missing cell at row " +
                                      std::to_string(r));
            auto idx = static_cast<std::size_t>(preds.numeric(0, r));
            if (idx >= test.row_count() || seen[idx])
                throw ValidationError("external predictions: bad row_index " +
                                      std::to_string(idx));
            seen[idx] = true;
            truth[idx] = test.category(target_col, idx);
            pred[idx] = preds.category(1, r);
        }
        return metrics_detail::balanced_accuracy_pct(truth, pred, n_classes);
    }
    double se = 0.0;
    for (std::size_t r = 0; r < preds.row_count(); ++r) {
        if (preds.is_missing(0, r) || preds.is_missing(1, r))
            throw ValidationError("external predictions: missing cell at row " +
                                  std::to_string(r));
        auto idx = static_cast<std::size_t>(preds.numeric(0, r));
        if (idx >= test.row_count() || seen[idx])
            throw ValidationError("external predictions: bad row_index " +
                                  std::to_string(idx));
        seen[idx] = true;
        double err = (preds.numeric(1, r) - test.numeric(target_col, idx)) /
                     (train_y_std > 0 ? train_y_std : 1.0);
        se += err * err;
    }
    return std::sqrt(se / static_cast<double>(test.row_count()));
}

/// Merge an externally scored predictor into a report and refresh the mean.
inline void merge_predictor_score(UtilityReport& report, const std::string& name,
                                  double score) {
    report.per_predictor[name] = score;
    double sum = 0.0;
    for (const auto& [k, v] : report.per_predictor) sum += v;
    report.mean_score = sum / static_cast<double>(report.per_predictor.size());
}

} // namespace tabbench
