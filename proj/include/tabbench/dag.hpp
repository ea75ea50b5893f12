#pragma once

// Directed acyclic graphs, d-separation, CPDAG conversion and the
// enumeration of ground-truth conditional-independence relations.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tabbench/error.hpp"
#include "tabbench/rng.hpp"

namespace tabbench {

class Dag {
public:
    Dag(std::vector<std::string> nodes,
        const std::vector<std::pair<std::string, std::string>>& edges)
        : nodes_(std::move(nodes)) {
        if (nodes_.empty()) throw ValidationError("Dag: empty node list");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].empty()) throw ValidationError("Dag: empty node name");
            if (!index_.emplace(nodes_[i], static_cast<int>(i)).second)
                throw ValidationError("Dag: duplicate node '" + nodes_[i] + "'");
        }
        parents_.resize(nodes_.size());
        children_.resize(nodes_.size());
        std::set<std::pair<int, int>> seen;
        for (const auto& [from, to] : edges) {
            int u = index_of(from), v = index_of(to);
            if (u == v) throw ValidationError("Dag: self-loop on '" + from + "'");
            if (!seen.emplace(u, v).second)
                throw ValidationError("Dag: duplicate edge " + from + " -> " + to);
            parents_[v].push_back(u);
            children_[u].push_back(v);
        }
        for (auto& p : parents_) std::sort(p.begin(), p.end());
        for (auto& c : children_) std::sort(c.begin(), c.end());
        edge_set_ = std::move(seen);
        if (!is_acyclic())
            throw ValidationError("Dag: edge relation contains a cycle: " + find_cycle());
    }

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& name(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    int index_of(const std::string& node) const {
        auto it = index_.find(node);
        if (it == index_.end())
            throw ValidationError("unknown variable '" + node + "'");
        return it->second;
    }

    bool has_node(const std::string& node) const { return index_.count(node) > 0; }
    bool has_edge(int u, int v) const { return edge_set_.count({u, v}) > 0; }
    bool adjacent(int u, int v) const { return has_edge(u, v) || has_edge(v, u); }

    const std::vector<int>& parents(int v) const { return parents_[static_cast<std::size_t>(v)]; }
    const std::vector<int>& children(int v) const { return children_[static_cast<std::size_t>(v)]; }
    const std::set<std::pair<int, int>>& edges() const { return edge_set_; }

    /// All ancestors of the given set, including the set itself.
    std::vector<bool> ancestral_set(const std::vector<int>& seed) const {
        std::vector<bool> in(nodes_.size(), false);
        std::deque<int> queue(seed.begin(), seed.end());
        for (int v : seed) in[static_cast<std::size_t>(v)] = true;
        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            for (int p : parents(v))
                if (!in[static_cast<std::size_t>(p)]) {
                    in[static_cast<std::size_t>(p)] = true;
                    queue.push_back(p);
                }
        }
        return in;
    }

private:
    std::string find_cycle() const {
        // DFS for one back edge; nodes on the stack form the cycle.
        std::vector<int> state(nodes_.size(), 0);  // 0 new, 1 on stack, 2 done
        std::vector<int> stack, cycle;
        auto dfs = [&](auto&& self, int v) -> bool {
            state[static_cast<std::size_t>(v)] = 1;
            stack.push_back(v);
            for (int c : children(v)) {
                if (state[static_cast<std::size_t>(c)] == 1) {
                    auto it = std::find(stack.begin(), stack.end(), c);
                    cycle.assign(it, stack.end());
                    cycle.push_back(c);
                    return true;
                }
                if (state[static_cast<std::size_t>(c)] == 0 && self(self, c)) return true;
            }
            stack.pop_back();
            state[static_cast<std::size_t>(v)] = 2;
            return false;
        };
        for (std::size_t v = 0; v < nodes_.size(); ++v)
            if (state[v] == 0 && dfs(dfs, static_cast<int>(v))) break;
        std::string msg;
        for (std::size_t i = 0; i < cycle.size(); ++i) {
            if (i) msg += " -> ";
            msg += name(cycle[i]);
        }
        return msg;
    }

    bool is_acyclic() const {
        std::vector<int> indeg(nodes_.size(), 0);
        for (std::size_t v = 0; v < nodes_.size(); ++v)
            indeg[v] = static_cast<int>(parents_[v].size());
        std::deque<int> ready;
        for (std::size_t v = 0; v < nodes_.size(); ++v)
            if (indeg[v] == 0) ready.push_back(static_cast<int>(v));
        std::size_t emitted = 0;
        while (!ready.empty()) {
            int v = ready.front();
            ready.pop_front();
            ++emitted;
            for (int c : children(v))
                if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
        }
        return emitted == nodes_.size();
    }

    std::vector<std::string> nodes_;
    std::map<std::string, int> index_;
    std::vector<std::vector<int>> parents_, children_;
    std::set<std::pair<int, int>> edge_set_;
};

/// Parents precede children; ties broken by lexicographic node name.
inline std::vector<std::string> topological_order(const Dag& dag) {
    const std::size_t n = dag.node_count();
    std::vector<int> indeg(n, 0);
    for (std::size_t v = 0; v < n; ++v)
        indeg[v] = static_cast<int>(dag.parents(static_cast<int>(v)).size());
    auto name_less = [&](int a, int b) { return dag.name(a) < dag.name(b); };
    std::vector<int> ready;
    for (std::size_t v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.push_back(static_cast<int>(v));
    std::sort(ready.begin(), ready.end(), name_less);
    std::vector<std::string> order;
    order.reserve(n);
    while (!ready.empty()) {
        int v = ready.front();
        ready.erase(ready.begin());
        order.push_back(dag.name(v));
        for (int c : dag.children(v)) {
            if (--indeg[static_cast<std::size_t>(c)] == 0) {
                auto pos = std::lower_bound(ready.begin(), ready.end(), c, name_less);
                ready.insert(pos, c);
            }
        }
    }
    return order;
}

// ---------------------------------------------------------------------------
// d-separation (Bayes-ball reachability)

/// True iff every path between x and y is blocked by z.
inline bool is_d_separated(const Dag& dag, const std::string& x, const std::string& y,
                           const std::vector<std::string>& z) {
    int xi = dag.index_of(x);
    int yi = dag.index_of(y);
    if (xi == yi) throw ValidationError("is_d_separated: x and y must differ");
    std::vector<bool> observed(dag.node_count(), false);
    std::vector<int> zidx;
    for (const auto& name : z) {
        int i = dag.index_of(name);
        if (i == xi || i == yi)
            throw ValidationError("is_d_separated: conditioning set overlaps x or y");
        if (!observed[static_cast<std::size_t>(i)]) {
            observed[static_cast<std::size_t>(i)] = true;
            zidx.push_back(i);
        }
    }
    // Ancestors of z enable collider bounce-back.
    std::vector<bool> anc_z = dag.ancestral_set(zidx);

    // State (node, entered-from-child?). Start as if x were entered from a
    // virtual child so the trail may leave along any edge.
    const std::size_t n = dag.node_count();
    std::vector<bool> visited_up(n, false), visited_down(n, false);
    std::deque<std::pair<int, bool>> queue;
    queue.emplace_back(xi, true);
    while (!queue.empty()) {
        auto [v, from_child] = queue.front();
        queue.pop_front();
        auto vi = static_cast<std::size_t>(v);
        if (from_child ? visited_up[vi] : visited_down[vi]) continue;
        (from_child ? visited_up[vi] : visited_down[vi]) = true;
        if (!observed[vi] && v == yi) return false;
        if (from_child) {
            if (!observed[vi]) {
                for (int p : dag.parents(v)) queue.emplace_back(p, true);
                for (int c : dag.children(v)) queue.emplace_back(c, false);
            }
        } else {
            if (!observed[vi])
                for (int c : dag.children(v)) queue.emplace_back(c, false);
            if (anc_z[vi])
                for (int p : dag.parents(v)) queue.emplace_back(p, true);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// CPDAG

class Cpdag {
public:
    Cpdag(std::vector<std::string> nodes,
          std::set<std::pair<std::string, std::string>> directed,
          std::set<std::pair<std::string, std::string>> undirected)
        : nodes_(std::move(nodes)), directed_(std::move(directed)) {
        for (auto [a, b] : undirected) {
            if (b < a) std::swap(a, b);
            undirected_.emplace(a, b);
        }
        for (const auto& [a, b] : undirected_) {
            if (directed_.count({a, b}) || directed_.count({b, a}))
                throw ValidationError("Cpdag: edge " + a + " - " + b +
                                      " is both directed and undirected");
        }
        // Directed part must be acyclic; reuse Dag validation.
        std::vector<std::pair<std::string, std::string>> de(directed_.begin(),
                                                            directed_.end());
        Dag check(nodes_, de);
    }

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::set<std::pair<std::string, std::string>>& directed_edges() const {
        return directed_;
    }
    const std::set<std::pair<std::string, std::string>>& undirected_edges() const {
        return undirected_;
    }

    bool operator==(const Cpdag& other) const {
        return nodes_ == other.nodes_ && directed_ == other.directed_ &&
               undirected_ == other.undirected_;
    }

private:
    std::vector<std::string> nodes_;
    std::set<std::pair<std::string, std::string>> directed_;
    std::set<std::pair<std::string, std::string>> undirected_;  // stored (min, max)
};

/// Completed PDAG of the Markov equivalence class: compelled edges stay
/// directed, reversible edges become undirected. Compelled-edge labelling
/// over a total edge order (Chickering).
inline Cpdag to_cpdag(const Dag& dag) {
    // Topological position of every node.
    std::vector<std::string> topo = topological_order(dag);
    std::vector<int> pos(dag.node_count());
    for (std::size_t i = 0; i < topo.size(); ++i)
        pos[static_cast<std::size_t>(dag.index_of(topo[i]))] = static_cast<int>(i);

    // Total edge order: by head position ascending, then tail descending.
    std::vector<std::pair<int, int>> edges(dag.edges().begin(), dag.edges().end());
    std::sort(edges.begin(), edges.end(), [&](const auto& e1, const auto& e2) {
        auto k1 = std::make_pair(pos[static_cast<std::size_t>(e1.second)],
                                 -pos[static_cast<std::size_t>(e1.first)]);
        auto k2 = std::make_pair(pos[static_cast<std::size_t>(e2.second)],
                                 -pos[static_cast<std::size_t>(e2.first)]);
        return k1 < k2;
    });

    enum class Label : std::uint8_t { Unknown, Compelled, Reversible };
    std::map<std::pair<int, int>, Label> label;
    for (const auto& e : edges) label[e] = Label::Unknown;

    auto label_all_into = [&](int y, Label value, bool unknown_only) {
        for (int w : dag.parents(y)) {
            auto& l = label[{w, y}];
            if (!unknown_only || l == Label::Unknown) l = value;
        }
    };

    for (const auto& edge : edges) {
        if (label[edge] != Label::Unknown) continue;
        auto [x, y] = edge;
        bool resolved = false;
        for (int w : dag.parents(x)) {
            if (label[{w, x}] != Label::Compelled) continue;
            if (!dag.has_edge(w, y)) {
                label[{x, y}] = Label::Compelled;
                label_all_into(y, Label::Compelled, /*unknown_only=*/false);
                resolved = true;
                break;
            }
            label[{w, y}] = Label::Compelled;
        }
        if (resolved) continue;
        bool has_external_parent = false;
        for (int zp : dag.parents(y)) {
            if (zp != x && !dag.has_edge(zp, x)) {
                has_external_parent = true;
                break;
            }
        }
        Label verdict = has_external_parent ? Label::Compelled : Label::Reversible;
        label[{x, y}] = verdict;
        label_all_into(y, verdict, /*unknown_only=*/true);
    }

    std::set<std::pair<std::string, std::string>> directed, undirected;
    for (const auto& [e, l] : label) {
        const std::string& a = dag.name(e.first);
        const std::string& b = dag.name(e.second);
        if (l == Label::Compelled)
            directed.emplace(a, b);
        else
            undirected.emplace(std::min(a, b), std::max(a, b));
    }
    return Cpdag(dag.nodes(), std::move(directed), std::move(undirected));
}

/// Same skeleton and same v-structures, i.e. identical CPDAGs.
inline bool markov_equivalent(const Dag& a, const Dag& b) {
    std::vector<std::string> na = a.nodes(), nb = b.nodes();
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    if (na != nb) throw ValidationError("markov_equivalent: node sets differ");

    auto skeleton = [](const Dag& g) {
        std::set<std::pair<std::string, std::string>> s;
        for (const auto& [u, v] : g.edges()) {
            std::string x = g.name(u), y = g.name(v);
            s.emplace(std::min(x, y), std::max(x, y));
        }
        return s;
    };
    auto v_structures = [](const Dag& g) {
        std::set<std::tuple<std::string, std::string, std::string>> vs;
        for (std::size_t c = 0; c < g.node_count(); ++c) {
            const auto& ps = g.parents(static_cast<int>(c));
            for (std::size_t i = 0; i < ps.size(); ++i)
                for (std::size_t j = i + 1; j < ps.size(); ++j)
                    if (!g.adjacent(ps[i], ps[j])) {
                        std::string p1 = g.name(ps[i]), p2 = g.name(ps[j]);
                        if (p2 < p1) std::swap(p1, p2);
                        vs.emplace(p1, g.name(static_cast<int>(c)), p2);
                    }
        }
        return vs;
    };
    return skeleton(a) == skeleton(b) && v_structures(a) == v_structures(b);
}

// ---------------------------------------------------------------------------
// Ground-truth conditional-independence relations

struct CiStatement {
    std::string x;                   // x < y lexicographically
    std::string y;
    std::vector<std::string> z;      // sorted
    bool independent = false;

    bool operator==(const CiStatement& o) const {
        return x == o.x && y == o.y && z == o.z && independent == o.independent;
    }
};

enum class CiLevel { Global, Local };

struct CiRelationSet {
    std::vector<CiStatement> statements;
    CiLevel level = CiLevel::Global;
    std::optional<std::string> target;
    int max_cond_size = 0;
};

struct CiEnumerationOptions {
    int max_cond_size = 2;
    std::size_t statement_cap = 20000;  // 0 disables the cap
    std::uint64_t seed = 0;             // subsampling stream when capped
};

namespace detail {

/// Stratified subsample preserving the independent/dependent ratio and the
/// original statement order.
inline void subsample_statements(std::vector<CiStatement>& stmts, std::size_t cap,
                                 std::uint64_t seed) {
    if (cap == 0 || stmts.size() <= cap) return;
    std::vector<std::size_t> indep, dep;
    for (std::size_t i = 0; i < stmts.size(); ++i)
        (stmts[i].independent ? indep : dep).push_back(i);
    auto total = static_cast<double>(stmts.size());
    auto keep_indep = static_cast<std::size_t>(
        std::round(static_cast<double>(cap) * static_cast<double>(indep.size()) / total));
    keep_indep = std::min(keep_indep, indep.size());
    std::size_t keep_dep = std::min(cap - keep_indep, dep.size());
    keep_indep = std::min(indep.size(), cap - keep_dep);

    RngStream rng(seed, 0x5ca1e);
    auto take = [&](std::vector<std::size_t>& pool, std::size_t k) {
        // Partial Fisher-Yates; selection only, order restored later.
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
    };
    take(indep, keep_indep);
    take(dep, keep_dep);
    std::vector<std::size_t> keep;
    keep.reserve(keep_indep + keep_dep);
    keep.insert(keep.end(), indep.begin(), indep.end());
    keep.insert(keep.end(), dep.begin(), dep.end());
    std::sort(keep.begin(), keep.end());
    std::vector<CiStatement> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) out.push_back(std::move(stmts[i]));
    stmts = std::move(out);
}

} // namespace detail

/// Enumerate d-separation labels for every admitted pair and every
/// conditioning set up to the size bound. Output order is lexicographic in
/// (x, y, sorted z). Statement counts beyond the cap are subsampled,
/// stratified by label.
inline CiRelationSet enumerate_ci_relations(const Dag& dag,
                                            const std::optional<std::string>& target,
                                            CiLevel level,
                                            const CiEnumerationOptions& opts = {}) {
    if (opts.max_cond_size < 0)
        throw ValidationError("enumerate_ci_relations: negative max_cond_size");
    if (level == CiLevel::Local) {
        if (!target) throw ValidationError("enumerate_ci_relations: local level needs a target");
        dag.index_of(*target);  // must name a node
    }
    std::vector<std::string> sorted_nodes = dag.nodes();
    std::sort(sorted_nodes.begin(), sorted_nodes.end());
    int max_z = opts.max_cond_size;
    if (dag.node_count() >= 2)
        max_z = std::min<int>(max_z, static_cast<int>(dag.node_count()) - 2);

    CiRelationSet out;
    out.level = level;
    out.target = target;
    out.max_cond_size = max_z;

    for (std::size_t i = 0; i < sorted_nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < sorted_nodes.size(); ++j) {
            const std::string& x = sorted_nodes[i];
            const std::string& y = sorted_nodes[j];
            if (level == CiLevel::Local && x != *target && y != *target) continue;
            std::vector<std::string> rest;
            for (const auto& node : sorted_nodes)
                if (node != x && node != y) rest.push_back(node);
            // Depth-first subset walk emits conditioning sets in
            // lexicographic order of their sorted contents.
            std::vector<std::string> current;
            auto emit = [&]() {
                CiStatement s;
                s.x = x;
                s.y = y;
                s.z = current;
                s.independent = is_d_separated(dag, x, y, current);
                out.statements.push_back(std::move(s));
            };
            auto walk = [&](auto&& self, std::size_t start) -> void {
                emit();
                if (static_cast<int>(current.size()) >= max_z) return;
                for (std::size_t k = start; k < rest.size(); ++k) {
                    current.push_back(rest[k]);
                    self(self, k + 1);
                    current.pop_back();
                }
            };
            walk(walk, 0);
        }
    }
    detail::subsample_statements(out.statements, opts.statement_cap, opts.seed);
    return out;
}

} // namespace tabbench
