#pragma once

// Independent brute-force oracles used only by tests. They deliberately
// avoid the library's reachability and compelled-edge code paths:
// d-separation is decided by enumerating every simple path, and CPDAGs by
// intersecting the orientations of the full Markov equivalence class.

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tabbench/dag.hpp"
#include "tabbench/rng.hpp"

namespace oracles {

using tabbench::Dag;

inline std::vector<std::vector<int>> all_simple_paths(const Dag& g, int x, int y) {
    std::vector<std::vector<int>> paths;
    std::vector<int> path{x};
    std::vector<bool> visited(g.node_count(), false);
    visited[static_cast<std::size_t>(x)] = true;
    auto dfs = [&](auto&& self, int cur) -> void {
        if (cur == y) {
            paths.push_back(path);
            return;
        }
        std::vector<int> neighbours = g.parents(cur);
        neighbours.insert(neighbours.end(), g.children(cur).begin(), g.children(cur).end());
        std::sort(neighbours.begin(), neighbours.end());
        for (int nxt : neighbours) {
            if (visited[static_cast<std::size_t>(nxt)]) continue;
            visited[static_cast<std::size_t>(nxt)] = true;
            path.push_back(nxt);
            self(self, nxt);
            path.pop_back();
            visited[static_cast<std::size_t>(nxt)] = false;
        }
    };
    dfs(dfs, x);
    return paths;
}

/// A path is active given z iff every interior collider is in z or has a
/// descendant in z, and every interior non-collider is outside z.
inline bool path_active(const Dag& g, const std::vector<int>& path,
                        const std::vector<bool>& in_z, const std::vector<bool>& anc_z) {
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        int prev = path[i - 1], cur = path[i], next = path[i + 1];
        bool collider = g.has_edge(prev, cur) && g.has_edge(next, cur);
        if (collider) {
            if (!anc_z[static_cast<std::size_t>(cur)]) return false;
        } else {
            if (in_z[static_cast<std::size_t>(cur)]) return false;
        }
    }
    return true;
}

inline bool dsep_bruteforce(const Dag& g, const std::string& x, const std::string& y,
                            const std::vector<std::string>& z) {
    int xi = g.index_of(x), yi = g.index_of(y);
    std::vector<bool> in_z(g.node_count(), false);
    std::vector<int> zidx;
    for (const auto& name : z) {
        int i = g.index_of(name);
        in_z[static_cast<std::size_t>(i)] = true;
        zidx.push_back(i);
    }
    std::vector<bool> anc_z = g.ancestral_set(zidx);
    for (const auto& path : all_simple_paths(g, xi, yi))
        if (path_active(g, path, in_z, anc_z)) return false;
    return true;
}

// ---------------------------------------------------------------------------

inline std::set<std::tuple<std::string, std::string, std::string>> v_structures_of(
    const std::vector<std::string>& nodes,
    const std::set<std::pair<std::string, std::string>>& edges) {
    auto adjacent = [&](const std::string& a, const std::string& b) {
        return edges.count({a, b}) || edges.count({b, a});
    };
    std::set<std::tuple<std::string, std::string, std::string>> vs;
    for (const auto& c : nodes) {
        std::vector<std::string> parents;
        for (const auto& [u, v] : edges)
            if (v == c) parents.push_back(u);
        for (std::size_t i = 0; i < parents.size(); ++i)
            for (std::size_t j = i + 1; j < parents.size(); ++j)
                if (!adjacent(parents[i], parents[j])) {
                    std::string a = parents[i], b = parents[j];
                    if (b < a) std::swap(a, b);
                    vs.emplace(a, c, b);
                }
    }
    return vs;
}

inline bool edge_set_acyclic(const std::vector<std::string>& nodes,
                             const std::set<std::pair<std::string, std::string>>& edges) {
    std::set<std::string> done;
    auto dfs = [&](auto&& self, const std::string& v,
                   std::set<std::string>& stack) -> bool {
        if (stack.count(v)) return false;
        if (done.count(v)) return true;
        stack.insert(v);
        for (const auto& [u, w] : edges)
            if (u == v && !self(self, w, stack)) return false;
        stack.erase(v);
        done.insert(v);
        return true;
    };
    for (const auto& v : nodes) {
        std::set<std::string> stack;
        if (!dfs(dfs, v, stack)) return false;
    }
    return true;
}

/// CPDAG by definition: enumerate every DAG with the same skeleton and the
/// same v-structures, then keep each edge directed only if its orientation
/// is constant across the class.
inline tabbench::Cpdag cpdag_by_class_intersection(const Dag& g) {
    std::vector<std::pair<std::string, std::string>> skeleton;
    for (const auto& [u, v] : g.edges()) {
        std::string a = g.name(u), b = g.name(v);
        skeleton.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(skeleton.begin(), skeleton.end());

    std::set<std::pair<std::string, std::string>> own_edges;
    for (const auto& [u, v] : g.edges()) own_edges.emplace(g.name(u), g.name(v));
    auto own_vs = v_structures_of(g.nodes(), own_edges);

    const std::size_t m = skeleton.size();
    std::vector<std::set<std::pair<std::string, std::string>>> members;
    for (std::size_t mask = 0; mask < (1u << m); ++mask) {
        std::set<std::pair<std::string, std::string>> edges;
        for (std::size_t e = 0; e < m; ++e) {
            if (mask & (1u << e))
                edges.emplace(skeleton[e].second, skeleton[e].first);
            else
                edges.emplace(skeleton[e].first, skeleton[e].second);
        }
        if (!edge_set_acyclic(g.nodes(), edges)) continue;
        if (v_structures_of(g.nodes(), edges) != own_vs) continue;
        members.push_back(std::move(edges));
    }

    std::set<std::pair<std::string, std::string>> directed, undirected;
    for (const auto& [a, b] : skeleton) {
        bool always_ab = true, always_ba = true;
        for (const auto& member : members) {
            if (!member.count({a, b})) always_ab = false;
            if (!member.count({b, a})) always_ba = false;
        }
        if (always_ab)
            directed.emplace(a, b);
        else if (always_ba)
            directed.emplace(b, a);
        else
            undirected.emplace(a, b);
    }
    return tabbench::Cpdag(g.nodes(), std::move(directed), std::move(undirected));
}

// ---------------------------------------------------------------------------

/// Random DAG: random topological order, each forward pair becomes an edge
/// with the given probability.
inline Dag random_dag(std::size_t n, double edge_prob, tabbench::RngStream& rng) {
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back("N" + std::to_string(i));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(i))]);
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < edge_prob)
                edges.emplace_back(nodes[order[i]], nodes[order[j]]);
    return Dag(nodes, edges);
}

/// Every subset of `pool` with size <= k, in no particular order.
inline std::vector<std::vector<std::string>> subsets_up_to(
    const std::vector<std::string>& pool, std::size_t k) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> cur;
    auto walk = [&](auto&& self, std::size_t start) -> void {
        out.push_back(cur);
        if (cur.size() >= k) return;
        for (std::size_t i = start; i < pool.size(); ++i) {
            cur.push_back(pool[i]);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    walk(walk, 0);
    return out;
}

} // namespace oracles
