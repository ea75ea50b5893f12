#pragma once

// Built-in baseline generators: independent-marginal bootstrap, SMOTE-style
// interpolation, and a Bayesian network fitted by BIC hill climbing; plus
// CSV ingestion for externally generated synthetic data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabbench/error.hpp"
#include "tabbench/rng.hpp"
#include "tabbench/scm.hpp"
#include "tabbench/stats.hpp"
#include "tabbench/table.hpp"

namespace tabbench {

struct GenRequest {
    std::size_t n_syn = 0;  // 0 means 3 x |train|
    std::uint64_t seed = 0;
    bool stratify = true;   // classification targets only

    std::size_t resolve_n(std::size_t train_rows) const {
        return n_syn > 0 ? n_syn : 3 * train_rows;
    }
};

namespace gen_detail {

inline bool has_class_target(const DataTable& t) {
    return t.target() &&
           t.schema()[t.target_index()].kind == ColumnKind::Categorical;
}

/// Rows per class, in category order; throws when a class is empty but used.
inline std::vector<std::vector<std::size_t>> rows_by_class(const DataTable& t) {
    std::size_t tc = t.target_index();
    std::vector<std::vector<std::size_t>> groups(t.schema()[tc].categories.size());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        if (t.is_missing(tc, r))
            throw ValidationError("generator: missing target value at row " +
                                  std::to_string(r));
        groups[static_cast<std::size_t>(t.category(tc, r))].push_back(r);
    }
    return groups;
}

inline std::vector<std::size_t> class_quotas(
    const std::vector<std::vector<std::size_t>>& groups, std::size_t n_syn) {
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.size());
    // Proportional allocation by largest remainder (within one row per class),
    // without capping at the class size: synthetic counts may exceed it.
    double whole = 0.0;
    for (std::size_t s : sizes) whole += static_cast<double>(s);
    std::vector<std::size_t> alloc(sizes.size(), 0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        double share = static_cast<double>(n_syn) * static_cast<double>(sizes[g]) / whole;
        alloc[g] = static_cast<std::size_t>(std::floor(share));
        assigned += alloc[g];
        frac.emplace_back(share - std::floor(share), g);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [f, g] : frac) {
        if (assigned >= n_syn) break;
        if (sizes[g] > 0) {
            ++alloc[g];
            ++assigned;
        }
    }
    return alloc;
}

inline void copy_cell(const DataTable& src, std::size_t src_row, DataTable& dst,
                      std::size_t dst_row, std::size_t col) {
    if (src.is_missing(col, src_row)) return;
    if (src.schema()[col].kind == ColumnKind::Numeric)
        dst.set_numeric(col, dst_row, src.numeric(col, src_row));
    else
        dst.set_category(col, dst_row, src.category(col, src_row));
}

} // namespace gen_detail

// ---------------------------------------------------------------------------
// Independent-marginal bootstrap

/// Each column sampled independently from its training empirical marginal.
/// Stratified requests sample per class from the class-conditional marginals.
inline DataTable gen_marginal(const DataTable& train, const GenRequest& req) {
    if (train.row_count() == 0) throw ValidationError("gen_marginal: empty training table");
    std::size_t n_syn = req.resolve_n(train.row_count());
    DataTable out(train.schema(), train.target());
    out.reserve(n_syn);

    bool stratify = req.stratify && gen_detail::has_class_target(train);
    if (!stratify) {
        for (std::size_t i = 0; i < n_syn; ++i) {
            std::size_t r = out.add_row();
            RngStream rng(req.seed, 0x3a61u, i);
            for (std::size_t c = 0; c < train.column_count(); ++c) {
                auto src = static_cast<std::size_t>(rng.uniform_int(train.row_count()));
                gen_detail::copy_cell(train, src, out, r, c);
            }
        }
        return out;
    }

    std::size_t tc = train.target_index();
    auto groups = gen_detail::rows_by_class(train);
    auto quotas = gen_detail::class_quotas(groups, n_syn);
    std::size_t emitted = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& rows = groups[g];
        for (std::size_t j = 0; j < quotas[g]; ++j, ++emitted) {
            std::size_t r = out.add_row();
            RngStream rng(req.seed, 0x3a61u, emitted);
            for (std::size_t c = 0; c < train.column_count(); ++c) {
                if (c == tc) {
                    out.set_category(c, r, static_cast<std::int32_t>(g));
                    continue;
                }
                auto src = rows[static_cast<std::size_t>(rng.uniform_int(rows.size()))];
                gen_detail::copy_cell(train, src, out, r, c);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SMOTE-style interpolation

/// Interpolates between a seed row and one of its k nearest same-class
/// neighbours (preprocessed-space distances). One u ~ U(0,1) per synthetic
/// row drives numeric interpolation; categorical cells copy the seed when
/// u < 0.5, else the neighbour. Regression tables interpolate the target
/// like any other numeric column, with neighbours over the full table.
inline DataTable gen_smote(const DataTable& train, const GenRequest& req, int k = 5) {
    if (train.row_count() == 0) throw ValidationError("gen_smote: empty training table");
    if (k < 1) throw ValidationError("gen_smote: k must be at least 1");
    std::size_t n_syn = req.resolve_n(train.row_count());
    Preprocessor pre = Preprocessor::fit(train);
    Eigen::MatrixXd enc = pre.transform(train);

    bool by_class = gen_detail::has_class_target(train);
    std::vector<std::vector<std::size_t>> groups;
    if (by_class) {
        std::size_t tc = train.target_index();
        groups = gen_detail::rows_by_class(train);
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (!groups[g].empty() && groups[g].size() <= static_cast<std::size_t>(k))
                throw ValidationError("gen_smote: class '" +
                                      train.schema()[tc].categories[g] +
                                      "' has too few rows for k = " + std::to_string(k));
    } else {
        if (train.row_count() <= static_cast<std::size_t>(k))
            throw ValidationError("gen_smote: table has too few rows for k = " +
                                  std::to_string(k));
        groups.emplace_back();
        for (std::size_t r = 0; r < train.row_count(); ++r) groups[0].push_back(r);
    }

    // k nearest same-group neighbours per row; ties break on row index.
    std::vector<std::vector<std::size_t>> neighbours(train.row_count());
    for (const auto& rows : groups) {
        if (rows.empty()) continue;
        Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), enc.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            block.row(static_cast<Eigen::Index>(i)) =
                enc.row(static_cast<Eigen::Index>(rows[i]));
        Eigen::VectorXd sq = block.rowwise().squaredNorm();
        Eigen::MatrixXd cross = block * block.transpose();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::vector<std::pair<double, std::size_t>> order;
            order.reserve(rows.size() - 1);
            for (std::size_t j = 0; j < rows.size(); ++j) {
                if (i == j) continue;
                double d2 = sq(static_cast<Eigen::Index>(i)) +
                            sq(static_cast<Eigen::Index>(j)) -
                            2.0 * cross(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(j));
                order.emplace_back(std::max(d2, 0.0), rows[j]);
            }
            auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk),
                              order.end());
            for (std::size_t j = 0; j < kk; ++j)
                neighbours[rows[i]].push_back(order[j].second);
        }
    }

    std::vector<std::size_t> quotas;
    if (by_class)
        quotas = gen_detail::class_quotas(groups, n_syn);
    else
        quotas = {n_syn};

    DataTable out(train.schema(), train.target());
    out.reserve(n_syn);
    std::size_t emitted = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& rows = groups[g];
        for (std::size_t j = 0; j < quotas[g]; ++j, ++emitted) {
            RngStream rng(req.seed, 0x50c7u, emitted);
            std::size_t seed_row =
                rows[static_cast<std::size_t>(rng.uniform_int(rows.size()))];
            const auto& nbs = neighbours[seed_row];
            std::size_t nb = nbs[static_cast<std::size_t>(rng.uniform_int(nbs.size()))];
            double u = rng.uniform();
            std::size_t r = out.add_row();
            for (std::size_t c = 0; c < train.column_count(); ++c) {
                if (train.schema()[c].kind == ColumnKind::Numeric) {
                    double a = pre.raw_numeric(train, c, seed_row);
                    double b = pre.raw_numeric(train, c, nb);
                    out.set_numeric(c, r, a + u * (b - a));
                } else {
                    std::size_t src = u < 0.5 ? seed_row : nb;
                    out.set_category(c, r, pre.raw_category(train, c, src));
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bayesian network: BIC hill climbing + maximum-likelihood CPTs

struct BnFitConfig {
    enum class Score { Bic };
    Score score = Score::Bic;
    int max_parents = 3;
    int max_iters = 200;
    int numeric_bins = 8;
};

struct BnFit {
    ScmModel model;
    // Numeric columns carried as binned categoricals: bins+1 boundaries per
    // column, used to de-bin generated cells.
    std::map<std::string, std::vector<double>> debin_edges;
    bool iteration_cap_hit = false;
    std::vector<double> bic_trace;
};

namespace gen_detail {

struct CodedColumn {
    std::string name;
    std::vector<std::size_t> codes;     // one per row
    std::size_t cardinality = 1;
    bool was_numeric = false;
    std::vector<double> debin_edges;    // numeric only: cardinality + 1 boundaries
    std::vector<std::string> states;
};

inline CodedColumn discretise_column(const DataTable& t, std::size_t c,
                                     const Preprocessor& pre, int bins) {
    CodedColumn out;
    out.name = t.schema()[c].name;
    out.codes.resize(t.row_count());
    if (t.schema()[c].kind == ColumnKind::Categorical) {
        out.cardinality = t.schema()[c].categories.size();
        out.states = t.schema()[c].categories;
        for (std::size_t r = 0; r < t.row_count(); ++r)
            out.codes[r] = static_cast<std::size_t>(pre.raw_category(t, c, r));
        return out;
    }
    out.was_numeric = true;
    std::vector<double> values(t.row_count());
    for (std::size_t r = 0; r < t.row_count(); ++r)
        values[r] = pre.raw_numeric(t, c, r);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int b = 1; b < bins; ++b) {
        double q = quantile_sorted(sorted, static_cast<double>(b) / bins);
        if (cuts.empty() || q > cuts.back()) cuts.push_back(q);
    }
    // Interior cuts equal to the maximum leave an empty last bin; drop them.
    while (!cuts.empty() && cuts.back() >= sorted.back()) cuts.pop_back();
    out.cardinality = cuts.size() + 1;
    out.debin_edges.push_back(sorted.front());
    out.debin_edges.insert(out.debin_edges.end(), cuts.begin(), cuts.end());
    out.debin_edges.push_back(sorted.back());
    for (std::size_t b = 0; b < out.cardinality; ++b)
        out.states.push_back("b" + std::to_string(b));
    for (std::size_t r = 0; r < t.row_count(); ++r)
        out.codes[r] = detail::bin_of(values[r], cuts);
    return out;
}

/// Decomposable BIC family score: multinomial log-likelihood minus
/// 0.5 ln(n) q (r - 1).
class BicScorer {
public:
    BicScorer(const std::vector<CodedColumn>& cols, std::size_t n) : cols_(cols), n_(n) {}

    double family(std::size_t v, const std::vector<std::size_t>& parents) {
        auto key = std::make_pair(v, parents);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        std::size_t q = 1;
        for (std::size_t p : parents) q *= cols_[p].cardinality;
        std::size_t r = cols_[v].cardinality;
        std::map<std::size_t, std::vector<double>> counts;  // config -> per-state
        for (std::size_t row = 0; row < n_; ++row) {
            std::size_t cfg = 0;
            for (std::size_t p : parents) cfg = cfg * cols_[p].cardinality + cols_[p].codes[row];
            auto& cell = counts[cfg];
            if (cell.empty()) cell.assign(r, 0.0);
            cell[cols_[v].codes[row]] += 1.0;
        }
        double ll = 0.0;
        for (const auto& [cfg, cell] : counts) {
            double total = 0.0;
            for (double x : cell) total += x;
            for (double x : cell)
                if (x > 0.0) ll += x * std::log(x / total);
        }
        double penalty = 0.5 * std::log(static_cast<double>(n_)) *
                         static_cast<double>(q) * static_cast<double>(r - 1);
        double score = ll - penalty;
        cache_.emplace(std::move(key), score);
        return score;
    }

private:
    const std::vector<CodedColumn>& cols_;
    std::size_t n_;
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> cache_;
};

inline bool reaches(const std::vector<std::set<std::size_t>>& children, std::size_t from,
                    std::size_t to) {
    std::vector<std::size_t> stack{from};
    std::set<std::size_t> seen;
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        if (!seen.insert(v).second) continue;
        for (std::size_t c : children[v]) stack.push_back(c);
    }
    return false;
}

} // namespace gen_detail

/// Greedy hill climbing over add/remove/reverse edge moves maximising BIC.
/// Tie-breaks are fixed by the move enumeration order (adds, removes,
/// reverses; each in lexicographic node-name order), so the fit is
/// deterministic. The returned model is fully discrete; numeric columns are
/// carried as binned categoricals with their bin edges recorded.
inline BnFit bn_fit(const DataTable& train, const BnFitConfig& cfg = {},
                    std::uint64_t seed = 0) {
    (void)seed;  // the search is deterministic; kept for interface symmetry
    if (train.row_count() == 0) throw ValidationError("bn_fit: empty training table");
    if (cfg.numeric_bins < 2) throw ValidationError("bn_fit: numeric_bins must be >= 2");
    if (cfg.max_parents < 0) throw ValidationError("bn_fit: max_parents must be >= 0");

    const std::size_t d = train.column_count();
    Preprocessor pre = Preprocessor::fit(train);
    std::vector<gen_detail::CodedColumn> cols;
    for (std::size_t c = 0; c < d; ++c)
        cols.push_back(gen_detail::discretise_column(train, c, pre, cfg.numeric_bins));

    // Lexicographic node order for deterministic move enumeration.
    std::vector<std::size_t> by_name(d);
    for (std::size_t i = 0; i < d; ++i) by_name[i] = i;
    std::sort(by_name.begin(), by_name.end(),
              [&](std::size_t a, std::size_t b) { return cols[a].name < cols[b].name; });

    std::vector<std::set<std::size_t>> parents(d), children(d);
    gen_detail::BicScorer scorer(cols, train.row_count());

    auto family_of = [&](std::size_t v, const std::set<std::size_t>& ps) {
        std::vector<std::size_t> sorted(ps.begin(), ps.end());
        return scorer.family(v, sorted);
    };

    double total = 0.0;
    for (std::size_t v = 0; v < d; ++v) total += family_of(v, parents[v]);

    std::vector<double> bic_trace{total};

    struct Move {
        enum Kind { Add, Remove, Reverse } kind;
        std::size_t u, v;
        double delta;
    };

    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        bool found = false;
        Move best{Move::Add, 0, 0, 1e-9};
        auto consider = [&](Move::Kind kind, std::size_t u, std::size_t v, double delta) {
            if (delta > best.delta) {
                best = {kind, u, v, delta};
                found = true;
            }
        };
        for (std::size_t ui : by_name)
            for (std::size_t vi : by_name) {
                if (ui == vi || parents[vi].count(ui)) continue;
                if (parents[vi].size() >= static_cast<std::size_t>(cfg.max_parents)) continue;
                if (gen_detail::reaches(children, vi, ui)) continue;  // would cycle
                auto with = parents[vi];
                with.insert(ui);
                consider(Move::Add, ui, vi,
                         family_of(vi, with) - family_of(vi, parents[vi]));
            }
        for (std::size_t ui : by_name)
            for (std::size_t vi : by_name) {
                if (!parents[vi].count(ui)) continue;
                auto without = parents[vi];
                without.erase(ui);
                consider(Move::Remove, ui, vi,
                         family_of(vi, without) - family_of(vi, parents[vi]));
            }
        for (std::size_t ui : by_name)
            for (std::size_t vi : by_name) {
                if (!parents[vi].count(ui)) continue;
                if (parents[ui].size() >= static_cast<std::size_t>(cfg.max_parents)) continue;
                // Reversal is legal iff no alternative path u -> v remains.
                children[ui].erase(vi);
                bool cycles = gen_detail::reaches(children, ui, vi);
                children[ui].insert(vi);
                if (cycles) continue;
                auto pu = parents[ui];
                pu.insert(vi);
                auto pv = parents[vi];
                pv.erase(ui);
                double delta = family_of(ui, pu) - family_of(ui, parents[ui]) +
                               family_of(vi, pv) - family_of(vi, parents[vi]);
                consider(Move::Reverse, ui, vi, delta);
            }
        if (!found) break;

        switch (best.kind) {
            case Move::Add:
                parents[best.v].insert(best.u);
                children[best.u].insert(best.v);
                break;
            case Move::Remove:
                parents[best.v].erase(best.u);
                children[best.u].erase(best.v);
                break;
            case Move::Reverse:
                parents[best.v].erase(best.u);
                children[best.u].erase(best.v);
                parents[best.u].insert(best.v);
                children[best.v].insert(best.u);
                break;
        }
        total += best.delta;
        if (total + 1e-6 < bic_trace.back())
            throw Error("bn_fit: BIC decreased across an accepted move");
        bic_trace.push_back(total);
    }

    // Maximum-likelihood CPTs with Laplace smoothing 1, parents in column order.
    std::map<std::string, std::vector<double>> debin_edges;
    std::vector<NodeCpd> cpds;
    for (std::size_t v = 0; v < d; ++v) {
        DiscreteCpd cpd;
        cpd.variable = cols[v].name;
        cpd.states = cols[v].states;
        std::vector<std::size_t> ps(parents[v].begin(), parents[v].end());
        std::size_t q = 1;
        for (std::size_t p : ps) {
            cpd.parents.push_back(cols[p].name);
            q *= cols[p].cardinality;
        }
        std::size_t r = cols[v].cardinality;
        std::vector<std::vector<double>> counts(q, std::vector<double>(r, 1.0));
        for (std::size_t row = 0; row < train.row_count(); ++row) {
            std::size_t cfg_idx = 0;
            for (std::size_t p : ps)
                cfg_idx = cfg_idx * cols[p].cardinality + cols[p].codes[row];
            counts[cfg_idx][cols[v].codes[row]] += 1.0;
        }
        for (auto& rowv : counts) {
            double sum = 0.0;
            for (double x : rowv) sum += x;
            for (double& x : rowv) x /= sum;
        }
        cpd.table = std::move(counts);
        cpds.emplace_back(std::move(cpd));
        if (cols[v].was_numeric) debin_edges[cols[v].name] = cols[v].debin_edges;
    }

    bool classification = gen_detail::has_class_target(train);
    return BnFit{ScmModel("bn", classification ? Task::Classification : Task::Regression,
                          train.target(), std::move(cpds)),
                 std::move(debin_edges), iter == cfg.max_iters, std::move(bic_trace)};
}

/// Sample the fitted network. Numeric columns come back de-binned by a
/// uniform draw within the recorded bin edges. Stratified requests fill
/// per-class quotas by rejection with a bounded budget.
inline DataTable bn_generate(const BnFit& fit, const DataTable& train,
                             const GenRequest& req) {
    std::size_t n_syn = req.resolve_n(train.row_count());
    const ScmModel& scm = fit.model;
    const Dag& dag = scm.dag();

    DataTable out(train.schema(), train.target());
    out.reserve(n_syn);

    bool stratify = req.stratify && gen_detail::has_class_target(train) &&
                    scm.task() == Task::Classification;
    std::vector<std::size_t> quota;
    std::size_t target_idx = 0;
    if (stratify) {
        quota = gen_detail::class_quotas(gen_detail::rows_by_class(train), n_syn);
        target_idx = train.target_index();
    }

    std::vector<std::string> order = topological_order(dag);
    std::vector<int> order_idx;
    for (const auto& name : order) order_idx.push_back(dag.index_of(name));

    const std::size_t budget = 1000 * n_syn + 1000;
    std::size_t emitted = 0;
    std::vector<std::size_t> sampled(dag.node_count(), 0);
    for (std::size_t attempt = 0; emitted < n_syn; ++attempt) {
        if (attempt >= budget) {
            std::string unfilled;
            for (std::size_t g = 0; g < quota.size(); ++g)
                if (quota[g] > 0) {
                    unfilled = train.schema()[target_idx].categories[g];
                    break;
                }
            throw ValidationError("bn_generate: rejection budget exhausted for class '" +
                                  unfilled + "'");
        }
        for (int vi : order_idx) {
            const auto& cpd = std::get<DiscreteCpd>(scm.cpds()[static_cast<std::size_t>(vi)]);
            std::size_t cfg_idx = 0;
            for (const auto& p : cpd.parents) {
                int pi = dag.index_of(p);
                cfg_idx = cfg_idx * std::get<DiscreteCpd>(
                                        scm.cpds()[static_cast<std::size_t>(pi)])
                                        .states.size() +
                          sampled[static_cast<std::size_t>(pi)];
            }
            RngStream stream(req.seed, 0xb4e5u, static_cast<std::uint64_t>(vi), attempt);
            const auto& probs = cpd.table[cfg_idx];
            double u = stream.uniform();
            std::size_t k = 0;
            double cum = 0.0;
            for (; k + 1 < probs.size(); ++k) {
                cum += probs[k];
                if (u < cum) break;
            }
            sampled[static_cast<std::size_t>(vi)] = k;
        }
        if (stratify) {
            std::size_t cls = sampled[target_idx];
            if (quota[cls] == 0) continue;
            --quota[cls];
        }
        std::size_t r = out.add_row();
        for (std::size_t c = 0; c < train.column_count(); ++c) {
            const auto& name = train.schema()[c].name;
            std::size_t code = sampled[static_cast<std::size_t>(dag.index_of(name))];
            auto edge_it = fit.debin_edges.find(name);
            if (edge_it == fit.debin_edges.end()) {
                out.set_category(c, r, static_cast<std::int32_t>(code));
            } else {
                const auto& edges = edge_it->second;
                double lo = edges[code], hi = edges[code + 1];
                RngStream stream(req.seed, 0xdeb1u, c, attempt);
                out.set_numeric(c, r, lo + stream.uniform() * (hi - lo));
            }
        }
        ++emitted;
    }
    return out;
}

/// Fit-and-sample convenience wrapper.
inline DataTable gen_bayes_net(const DataTable& train, const GenRequest& req,
                               const BnFitConfig& cfg = {}) {
    BnFit fit = bn_fit(train, cfg, req.seed);
    return bn_generate(fit, train, req);
}

// ---------------------------------------------------------------------------

/// Validate an externally generated CSV against the dataset schema.
inline DataTable ingest_synthetic(const std::string& csv_text,
                                  const std::vector<ColumnSchema>& schema,
                                  const std::optional<std::string>& target = {}) {
    return load_csv(csv_text, schema, target);
}

} // namespace tabbench
