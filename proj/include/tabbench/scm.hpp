#pragma once

// Structural causal models: discrete CPT and (conditional) linear-Gaussian
// mechanisms, validation, prior sampling, and the JSON carrier format.
//
// Mixed networks are supported two ways: a discrete node may take numeric
// parents through declared threshold bins, and a Gaussian node may take
// discrete parents through one (intercept, weights, noise_std) entry per
// joint discrete-parent configuration (row-major, first parent slowest).
// Root nodes sample from their declared marginal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabbench/dag.hpp"
#include "tabbench/error.hpp"
#include "tabbench/rng.hpp"
#include "tabbench/table.hpp"

namespace tabbench {

struct DiscreteCpd {
    std::string variable;
    std::vector<std::string> states;
    std::vector<std::string> parents;               // declared order = row-indexing order
    std::vector<std::vector<double>> table;         // rows x states
    std::map<std::string, std::vector<double>> parent_bins;  // numeric parents only

    bool operator==(const DiscreteCpd&) const = default;
};

struct GaussianConfig {
    double intercept = 0.0;
    std::vector<double> weights;  // one per numeric parent, declared order
    double noise_std = 0.0;

    bool operator==(const GaussianConfig&) const = default;
};

struct LinearGaussianCpd {
    std::string variable;
    std::vector<std::string> parents;       // declared order
    std::vector<GaussianConfig> configs;    // one per joint discrete-parent config

    const GaussianConfig& single() const { return configs.at(0); }

    bool operator==(const LinearGaussianCpd&) const = default;
};

using NodeCpd = std::variant<DiscreteCpd, LinearGaussianCpd>;

enum class Task { Classification, Regression };

inline const std::string& cpd_variable(const NodeCpd& cpd) {
    return std::visit([](const auto& c) -> const std::string& { return c.variable; }, cpd);
}

inline const std::vector<std::string>& cpd_parents(const NodeCpd& cpd) {
    return std::visit([](const auto& c) -> const std::vector<std::string>& { return c.parents; },
                      cpd);
}

class ScmModel {
public:
    ScmModel(std::string name, Task task, std::optional<std::string> target,
             std::vector<NodeCpd> cpds)
        : name_(std::move(name)),
          task_(task),
          target_(std::move(target)),
          cpds_(std::move(cpds)),
          dag_(build_dag(cpds_)) {
        validate();
    }

    const std::string& name() const { return name_; }
    Task task() const { return task_; }
    const std::optional<std::string>& target() const { return target_; }
    const Dag& dag() const { return dag_; }
    const std::vector<NodeCpd>& cpds() const { return cpds_; }

    const NodeCpd& cpd(const std::string& node) const {
        return cpds_[static_cast<std::size_t>(dag_.index_of(node))];
    }
    bool is_discrete(const std::string& node) const {
        return std::holds_alternative<DiscreteCpd>(cpd(node));
    }

    bool operator==(const ScmModel& other) const {
        return name_ == other.name_ && task_ == other.task_ && target_ == other.target_ &&
               cpds_ == other.cpds_;
    }

private:
    static Dag build_dag(const std::vector<NodeCpd>& cpds) {
        std::vector<std::string> nodes;
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& cpd : cpds) {
            nodes.push_back(cpd_variable(cpd));
            for (const auto& p : cpd_parents(cpd))
                edges.emplace_back(p, cpd_variable(cpd));
        }
        return Dag(std::move(nodes), edges);
    }

    std::size_t parent_cardinality(const std::string& parent, const DiscreteCpd& child) const {
        int pi = dag_.index_of(parent);
        if (std::holds_alternative<DiscreteCpd>(cpds_[static_cast<std::size_t>(pi)]))
            return std::get<DiscreteCpd>(cpds_[static_cast<std::size_t>(pi)]).states.size();
        auto it = child.parent_bins.find(parent);
        if (it == child.parent_bins.end())
            throw ValidationError("node '" + child.variable + "': numeric parent '" + parent +
                                  "' has no declared bins");
        return it->second.size() + 1;
    }

    void validate() const {
        for (std::size_t i = 0; i < cpds_.size(); ++i) {
            const auto& cpd = cpds_[i];
            const std::string& v = cpd_variable(cpd);
            // Declared parents must match graph parents as a set.
            std::vector<std::string> declared = cpd_parents(cpd);
            std::sort(declared.begin(), declared.end());
            if (std::adjacent_find(declared.begin(), declared.end()) != declared.end())
                throw ValidationError("node '" + v + "': duplicate parent");

            if (const auto* d = std::get_if<DiscreteCpd>(&cpd)) {
                if (d->states.empty())
                    throw ValidationError("node '" + v + "': no states");
                std::vector<std::string> s = d->states;
                std::sort(s.begin(), s.end());
                if (std::adjacent_find(s.begin(), s.end()) != s.end())
                    throw ValidationError("node '" + v + "': duplicate state");
                std::size_t rows = 1;
                for (const auto& p : d->parents) rows *= parent_cardinality(p, *d);
                if (d->table.size() != rows)
                    throw ValidationError("node '" + v + "': table has " +
                                          std::to_string(d->table.size()) + " rows, expected " +
                                          std::to_string(rows));
                for (std::size_t r = 0; r < d->table.size(); ++r) {
                    if (d->table[r].size() != d->states.size())
                        throw ValidationError("node '" + v + "': row " + std::to_string(r) +
                                              " has wrong width");
                    double sum = 0.0;
                    for (double p : d->table[r]) {
                        if (!(p >= 0.0 && p <= 1.0))
                            throw ValidationError("node '" + v + "': probability outside [0,1] in row " +
                                                  std::to_string(r));
                        sum += p;
                    }
                    if (std::abs(sum - 1.0) > 1e-9)
                        throw ValidationError("node '" + v + "': row " + std::to_string(r) +
                                              " sums to " + std::to_string(sum));
                }
                for (const auto& [p, bins] : d->parent_bins) {
                    if (std::find(d->parents.begin(), d->parents.end(), p) == d->parents.end())
                        throw ValidationError("node '" + v + "': bins declared for non-parent '" +
                                              p + "'");
                    if (!std::is_sorted(bins.begin(), bins.end()))
                        throw ValidationError("node '" + v + "': bins for '" + p +
                                              "' are not ascending");
                    for (double b : bins)
                        if (!std::isfinite(b))
                            throw ValidationError("node '" + v + "': non-finite bin for '" + p + "'");
                }
            } else {
                const auto& g = std::get<LinearGaussianCpd>(cpd);
                std::size_t n_discrete_cfgs = 1;
                std::size_t n_numeric = 0;
                for (const auto& p : g.parents) {
                    int pi = dag_.index_of(p);
                    if (const auto* pd =
                            std::get_if<DiscreteCpd>(&cpds_[static_cast<std::size_t>(pi)]))
                        n_discrete_cfgs *= pd->states.size();
                    else
                        ++n_numeric;
                }
                if (g.configs.size() != n_discrete_cfgs)
                    throw ValidationError("node '" + v + "': " + std::to_string(g.configs.size()) +
                                          " configs, expected " + std::to_string(n_discrete_cfgs));
                for (const auto& cfg : g.configs) {
                    if (cfg.weights.size() != n_numeric)
                        throw ValidationError("node '" + v + "': weights length " +
                                              std::to_string(cfg.weights.size()) + ", expected " +
                                              std::to_string(n_numeric));
                    if (!std::isfinite(cfg.noise_std) || cfg.noise_std < 0.0)
                        throw ValidationError("node '" + v + "': noise_std must be finite and >= 0");
                    if (!std::isfinite(cfg.intercept))
                        throw ValidationError("node '" + v + "': non-finite intercept");
                    for (double w : cfg.weights)
                        if (!std::isfinite(w))
                            throw ValidationError("node '" + v + "': non-finite weight");
                }
            }
        }
        if (task_ == Task::Classification) {
            if (!target_) throw ValidationError("classification model needs a target");
            if (!is_discrete(*target_))
                throw ValidationError("classification target '" + *target_ + "' must be discrete");
        }
        if (target_) dag_.index_of(*target_);
    }

    std::string name_;
    Task task_;
    std::optional<std::string> target_;
    std::vector<NodeCpd> cpds_;
    Dag dag_;
};

// ---------------------------------------------------------------------------
// Prior sampling

namespace detail {

inline std::size_t bin_of(double value, const std::vector<double>& thresholds) {
    std::size_t b = 0;
    while (b < thresholds.size() && value > thresholds[b]) ++b;
    return b;
}

} // namespace detail

/// i.i.d. rows from the joint distribution: roots draw from their marginal
/// and values propagate in topological order. Each (node, row) cell uses its
/// own counter-based stream keyed (seed, node index, row index), so the
/// output is independent of evaluation schedule and bit-identical per seed.
inline DataTable prior_sample(const ScmModel& scm, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("prior_sample: n must be positive");
    const Dag& dag = scm.dag();

    std::vector<ColumnSchema> schema;
    for (const auto& node : dag.nodes()) {
        ColumnSchema col;
        col.name = node;
        if (scm.is_discrete(node)) {
            col.kind = ColumnKind::Categorical;
            col.categories = std::get<DiscreteCpd>(scm.cpd(node)).states;
        } else {
            col.kind = ColumnKind::Numeric;
        }
        schema.push_back(std::move(col));
    }
    DataTable out(schema, scm.target());
    out.reserve(n);

    std::vector<std::string> order = topological_order(dag);
    std::vector<int> order_idx;
    for (const auto& name : order) order_idx.push_back(dag.index_of(name));

    std::vector<double> num_val(dag.node_count(), 0.0);
    std::vector<std::size_t> cat_val(dag.node_count(), 0);

    for (std::size_t r = 0; r < n; ++r) {
        out.add_row();
        for (int vi : order_idx) {
            const auto& node = dag.name(vi);
            const NodeCpd& cpd = scm.cpd(node);
            RngStream stream(seed, static_cast<std::uint64_t>(vi), r);
            if (const auto* d = std::get_if<DiscreteCpd>(&cpd)) {
                std::size_t row = 0;
                for (const auto& p : d->parents) {
                    int pi = dag.index_of(p);
                    std::size_t card, val;
                    if (scm.is_discrete(p)) {
                        card = std::get<DiscreteCpd>(scm.cpd(p)).states.size();
                        val = cat_val[static_cast<std::size_t>(pi)];
                    } else {
                        const auto& bins = d->parent_bins.at(p);
                        card = bins.size() + 1;
                        val = detail::bin_of(num_val[static_cast<std::size_t>(pi)], bins);
                    }
                    row = row * card + val;
                }
                const auto& probs = d->table[row];
                double u = stream.uniform();
                std::size_t k = 0;
                double cum = 0.0;
                for (; k + 1 < probs.size(); ++k) {
                    cum += probs[k];
                    if (u < cum) break;
                }
                cat_val[static_cast<std::size_t>(vi)] = k;
                out.set_category(static_cast<std::size_t>(vi), r,
                                 static_cast<std::int32_t>(k));
            } else {
                const auto& g = std::get<LinearGaussianCpd>(cpd);
                std::size_t cfg_idx = 0;
                double mean = 0.0;
                std::size_t w = 0;
                // First pass fixes the config; numeric contribution needs the
                // config's weights, so gather numeric parent values along the way.
                std::vector<double> numeric_parents;
                for (const auto& p : g.parents) {
                    int pi = dag.index_of(p);
                    if (scm.is_discrete(p)) {
                        std::size_t card = std::get<DiscreteCpd>(scm.cpd(p)).states.size();
                        cfg_idx = cfg_idx * card + cat_val[static_cast<std::size_t>(pi)];
                    } else {
                        numeric_parents.push_back(num_val[static_cast<std::size_t>(pi)]);
                    }
                }
                const GaussianConfig& cfg = g.configs[cfg_idx];
                mean = cfg.intercept;
                for (double x : numeric_parents) mean += cfg.weights[w++] * x;
                double value = mean + cfg.noise_std * stream.normal();
                num_val[static_cast<std::size_t>(vi)] = value;
                out.set_numeric(static_cast<std::size_t>(vi), r, value);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON carrier format

inline nlohmann::json scm_to_json(const ScmModel& scm) {
    nlohmann::json j;
    j["name"] = scm.name();
    j["task"] = scm.task() == Task::Classification ? "classification" : "regression";
    if (scm.target()) j["target"] = *scm.target();
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& cpd : scm.cpds()) {
        nlohmann::json nj;
        nj["name"] = cpd_variable(cpd);
        nj["parents"] = cpd_parents(cpd);
        if (const auto* d = std::get_if<DiscreteCpd>(&cpd)) {
            nj["kind"] = "discrete";
            nj["states"] = d->states;
            nj["table"] = d->table;
            if (!d->parent_bins.empty()) nj["parent_bins"] = d->parent_bins;
        } else {
            const auto& g = std::get<LinearGaussianCpd>(cpd);
            nj["kind"] = "gaussian";
            if (g.configs.size() == 1) {
                nj["intercept"] = g.configs[0].intercept;
                nj["weights"] = g.configs[0].weights;
                nj["noise_std"] = g.configs[0].noise_std;
            } else {
                nlohmann::json cfgs = nlohmann::json::array();
                for (const auto& cfg : g.configs) {
                    nlohmann::json cj;
                    cj["intercept"] = cfg.intercept;
                    cj["weights"] = cfg.weights;
                    cj["noise_std"] = cfg.noise_std;
                    cfgs.push_back(std::move(cj));
                }
                nj["configs"] = std::move(cfgs);
            }
        }
        nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

inline ScmModel parse_scm_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("scm json: ") + e.what());
    }
    auto fail = [](const std::string& path, const std::string& what) -> ValidationError {
        return ValidationError("scm json: " + path + ": " + what);
    };
    if (!j.is_object()) throw fail("$", "expected an object");
    std::string name = j.value("name", "scm");
    std::string task_str = j.value("task", "classification");
    Task task;
    if (task_str == "classification")
        task = Task::Classification;
    else if (task_str == "regression")
        task = Task::Regression;
    else
        throw fail("$.task", "must be 'classification' or 'regression'");
    std::optional<std::string> target;
    if (j.contains("target")) {
        if (!j["target"].is_string()) throw fail("$.target", "expected a string");
        target = j["target"].get<std::string>();
    }
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw fail("$.nodes", "expected an array");

    std::vector<NodeCpd> cpds;
    std::size_t idx = 0;
    for (const auto& nj : j["nodes"]) {
        std::string path = "$.nodes[" + std::to_string(idx++) + "]";
        if (!nj.is_object()) throw fail(path, "expected an object");
        if (!nj.contains("name") || !nj["name"].is_string())
            throw fail(path + ".name", "expected a string");
        std::string node_name = nj["name"].get<std::string>();
        std::vector<std::string> parents;
        if (nj.contains("parents")) {
            if (!nj["parents"].is_array()) throw fail(path + ".parents", "expected an array");
            parents = nj["parents"].get<std::vector<std::string>>();
        }
        std::string kind = nj.value("kind", "");
        if (kind == "discrete") {
            DiscreteCpd d;
            d.variable = node_name;
            d.parents = parents;
            if (!nj.contains("states") || !nj["states"].is_array())
                throw fail(path + ".states", "expected an array");
            d.states = nj["states"].get<std::vector<std::string>>();
            if (!nj.contains("table") || !nj["table"].is_array())
                throw fail(path + ".table", "expected an array of rows");
            for (const auto& row : nj["table"]) {
                if (!row.is_array()) throw fail(path + ".table", "expected rows of numbers");
                d.table.push_back(row.get<std::vector<double>>());
            }
            if (nj.contains("parent_bins")) {
                if (!nj["parent_bins"].is_object())
                    throw fail(path + ".parent_bins", "expected an object");
                for (const auto& [p, bins] : nj["parent_bins"].items())
                    d.parent_bins[p] = bins.get<std::vector<double>>();
            }
            cpds.emplace_back(std::move(d));
        } else if (kind == "gaussian") {
            LinearGaussianCpd g;
            g.variable = node_name;
            g.parents = parents;
            if (nj.contains("configs")) {
                if (!nj["configs"].is_array())
                    throw fail(path + ".configs", "expected an array");
                for (const auto& cj : nj["configs"]) {
                    GaussianConfig cfg;
                    cfg.intercept = cj.value("intercept", 0.0);
                    if (cj.contains("weights"))
                        cfg.weights = cj["weights"].get<std::vector<double>>();
                    if (!cj.contains("noise_std") || !cj["noise_std"].is_number())
                        throw fail(path + ".configs", "each config needs noise_std");
                    cfg.noise_std = cj["noise_std"].get<double>();
                    g.configs.push_back(std::move(cfg));
                }
            } else {
                GaussianConfig cfg;
                cfg.intercept = nj.value("intercept", 0.0);
                if (nj.contains("weights"))
                    cfg.weights = nj["weights"].get<std::vector<double>>();
                if (!nj.contains("noise_std") || !nj["noise_std"].is_number())
                    throw fail(path + ".noise_std", "expected a number");
                cfg.noise_std = nj["noise_std"].get<double>();
                g.configs.push_back(std::move(cfg));
            }
            cpds.emplace_back(std::move(g));
        } else {
            throw fail(path + ".kind", "must be 'discrete' or 'gaussian'");
        }
    }
    try {
        return ScmModel(std::move(name), task, std::move(target), std::move(cpds));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("scm json: ") + e.what());
    }
}

} // namespace tabbench
