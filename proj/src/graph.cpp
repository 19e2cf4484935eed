#include "cbnkit/graph.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>

#include "cbnkit/errors.hpp"

namespace cbnkit {

Graph::Graph(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i], static_cast<int>(i)).second) {
            throw GraphError("duplicate node name: " + nodes_[i]);
        }
    }
    marks_.assign(nodes_.size() * nodes_.size(), kNone);
}

std::optional<int> Graph::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Graph::index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw GraphError("unknown node: " + std::string(name));
    return *idx;
}

void Graph::check_pair(int a, int b) const {
    const auto n = static_cast<int>(nodes_.size());
    if (a < 0 || b < 0 || a >= n || b >= n) throw GraphError("node index out of range");
    if (a == b) throw GraphError("self-loop on " + nodes_[static_cast<std::size_t>(a)]);
}

void Graph::add_directed(int from, int to) {
    check_pair(from, to);
    if (adjacent(from, to)) throw GraphError("pair already adjacent: " + name(from) + ", " + name(to));
    mark(from, to) = kDirected;
    ++n_directed_;
}

void Graph::add_undirected(int a, int b) {
    check_pair(a, b);
    if (adjacent(a, b)) throw GraphError("pair already adjacent: " + name(a) + ", " + name(b));
    mark(a, b) = kUndirected;
    mark(b, a) = kUndirected;
    ++n_undirected_;
}

void Graph::remove_edge(int a, int b) {
    check_pair(a, b);
    if (mark(a, b) == kUndirected) {
        --n_undirected_;
    } else if (mark(a, b) == kDirected || mark(b, a) == kDirected) {
        --n_directed_;
    }
    mark(a, b) = kNone;
    mark(b, a) = kNone;
}

void Graph::set_directed(int from, int to) {
    remove_edge(from, to);
    add_directed(from, to);
}

std::vector<int> Graph::parents(int v) const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(size()); ++u) {
        if (mark(u, v) == kDirected) out.push_back(u);
    }
    return out;
}

std::vector<int> Graph::children(int v) const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(size()); ++u) {
        if (mark(v, u) == kDirected) out.push_back(u);
    }
    return out;
}

std::vector<int> Graph::neighbors(int v) const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(size()); ++u) {
        if (mark(v, u) == kUndirected) out.push_back(u);
    }
    return out;
}

std::vector<int> Graph::adjacents(int v) const {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(size()); ++u) {
        if (u != v && adjacent(u, v)) out.push_back(u);
    }
    return out;
}

std::vector<int> Graph::canonical_order() const {
    std::vector<int> order(size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return name(a) < name(b); });
    return order;
}

std::vector<Edge> Graph::directed_edges() const {
    std::vector<Edge> out;
    for (int a : canonical_order()) {
        for (int b : canonical_order()) {
            if (mark(a, b) == kDirected) out.emplace_back(a, b);
        }
    }
    return out;
}

std::vector<Edge> Graph::undirected_edges() const {
    std::vector<Edge> out;
    for (int a : canonical_order()) {
        for (int b : canonical_order()) {
            if (name(a) < name(b) && mark(a, b) == kUndirected) out.emplace_back(a, b);
        }
    }
    return out;
}

bool Graph::operator==(const Graph& other) const {
    if (size() != other.size() || num_directed() != other.num_directed() ||
        num_undirected() != other.num_undirected()) {
        return false;
    }
    for (const auto& n : nodes_) {
        if (!other.find(n)) return false;
    }
    for (auto [a, b] : directed_edges()) {
        if (!other.has_directed(other.index_of(name(a)), other.index_of(name(b)))) return false;
    }
    for (auto [a, b] : undirected_edges()) {
        if (!other.has_undirected(other.index_of(name(a)), other.index_of(name(b)))) return false;
    }
    return true;
}

std::uint64_t Graph::fingerprint() const {
    // FNV-1a over the canonical edge listing.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (auto [a, b] : directed_edges()) {
        mix(name(a));
        mix(">");
        mix(name(b));
        mix(";");
    }
    for (auto [a, b] : undirected_edges()) {
        mix(name(a));
        mix("-");
        mix(name(b));
        mix(";");
    }
    return h;
}

const char* to_string(GraphKind kind) {
    switch (kind) {
        case GraphKind::Dag: return "DAG";
        case GraphKind::Cpdag: return "CPDAG";
        case GraphKind::Pdag: return "PDAG";
    }
    return "?";
}

namespace {

std::optional<std::vector<int>> try_topological_order(const Graph& g) {
    const int n = static_cast<int>(g.size());
    std::vector<int> indegree(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : g.directed_edges()) ++indegree[static_cast<std::size_t>(b)];
    std::vector<int> order;
    std::deque<int> ready;
    for (int v : g.canonical_order()) {
        if (indegree[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
    }
    while (!ready.empty()) {
        int v = ready.front();
        ready.pop_front();
        order.push_back(v);
        for (int c : g.children(v)) {
            if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
        }
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

void check_disjoint(std::span<const int> a, std::span<const int> b, const char* what) {
    for (int x : a) {
        if (std::find(b.begin(), b.end(), x) != b.end()) throw InvalidArgument(std::string(what) + " sets overlap");
    }
}

void check_nodes(const Graph& g, std::span<const int> s) {
    for (int v : s) {
        if (v < 0 || static_cast<std::size_t>(v) >= g.size()) throw GraphError("unknown node index");
    }
}

}  // namespace

bool is_acyclic(const Graph& g) { return try_topological_order(g).has_value(); }

bool is_dag(const Graph& g) { return g.num_undirected() == 0 && is_acyclic(g); }

std::vector<int> topological_order(const Graph& g) {
    auto order = try_topological_order(g);
    if (!order) throw GraphError("graph contains a directed cycle");
    return *order;
}

bool has_directed_path(const Graph& g, int from, int to) {
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack{from};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int c : g.children(v)) {
            if (c == to) return true;
            if (!seen[static_cast<std::size_t>(c)]) {
                seen[static_cast<std::size_t>(c)] = 1;
                stack.push_back(c);
            }
        }
    }
    return false;
}

std::vector<int> ancestors(const Graph& g, std::span<const int> targets) {
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack(targets.begin(), targets.end());
    for (int t : targets) seen[static_cast<std::size_t>(t)] = 2;
    std::vector<int> out;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int p : g.parents(v)) {
            if (!seen[static_cast<std::size_t>(p)]) {
                seen[static_cast<std::size_t>(p)] = 1;
                out.push_back(p);
                stack.push_back(p);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> descendants(const Graph& g, std::span<const int> sources) {
    std::vector<char> seen(g.size(), 0);
    std::vector<int> stack(sources.begin(), sources.end());
    for (int t : sources) seen[static_cast<std::size_t>(t)] = 2;
    std::vector<int> out;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int c : g.children(v)) {
            if (!seen[static_cast<std::size_t>(c)]) {
                seen[static_cast<std::size_t>(c)] = 1;
                out.push_back(c);
                stack.push_back(c);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool d_separated(const Graph& g, std::span<const int> x, std::span<const int> y, std::span<const int> z) {
    check_nodes(g, x);
    check_nodes(g, y);
    check_nodes(g, z);
    check_disjoint(x, y, "X/Y");
    check_disjoint(x, z, "X/Z");
    check_disjoint(y, z, "Y/Z");
    const auto n = g.size();
    std::vector<char> in_z(n, 0), in_y(n, 0), z_or_anc(n, 0);
    for (int v : z) in_z[static_cast<std::size_t>(v)] = z_or_anc[static_cast<std::size_t>(v)] = 1;
    for (int v : y) in_y[static_cast<std::size_t>(v)] = 1;
    for (int v : ancestors(g, z)) z_or_anc[static_cast<std::size_t>(v)] = 1;

    // Reachability over (node, direction): 0 = arrived from a child (moving
    // up), 1 = arrived from a parent (moving down).
    std::vector<char> visited(2 * n, 0);
    std::vector<std::pair<int, int>> stack;
    for (int v : x) stack.emplace_back(v, 0);
    while (!stack.empty()) {
        auto [v, dir] = stack.back();
        stack.pop_back();
        const auto key = 2 * static_cast<std::size_t>(v) + static_cast<std::size_t>(dir);
        if (visited[key]) continue;
        visited[key] = 1;
        const auto vi = static_cast<std::size_t>(v);
        if (!in_z[vi] && in_y[vi]) return false;
        if (dir == 0) {
            if (in_z[vi]) continue;
            for (int p : g.parents(v)) stack.emplace_back(p, 0);
            for (int c : g.children(v)) stack.emplace_back(c, 1);
        } else {
            if (!in_z[vi]) {
                for (int c : g.children(v)) stack.emplace_back(c, 1);
            }
            if (z_or_anc[vi]) {
                for (int p : g.parents(v)) stack.emplace_back(p, 0);
            }
        }
    }
    return true;
}

std::vector<int> markov_blanket(const Graph& g, int x) {
    check_nodes(g, std::span<const int>(&x, 1));
    std::set<int> mb;
    for (int p : g.parents(x)) mb.insert(p);
    for (int c : g.children(x)) {
        mb.insert(c);
        for (int sp : g.parents(c)) {
            if (sp != x) mb.insert(sp);
        }
    }
    return {mb.begin(), mb.end()};
}

std::vector<std::tuple<int, int, int>> v_structures(const Graph& g) {
    std::vector<std::tuple<int, int, int>> out;
    for (int c : g.canonical_order()) {
        auto pa = g.parents(c);
        std::sort(pa.begin(), pa.end(), [&](int a, int b) { return g.name(a) < g.name(b); });
        for (std::size_t i = 0; i < pa.size(); ++i) {
            for (std::size_t j = i + 1; j < pa.size(); ++j) {
                if (!g.adjacent(pa[i], pa[j])) out.emplace_back(pa[i], c, pa[j]);
            }
        }
    }
    return out;
}

int apply_meek_rules(Graph& g) {
    const int n = static_cast<int>(g.size());
    int oriented = 0;
    bool changed = true;
    auto orient = [&](int a, int b) {
        g.set_directed(a, b);
        ++oriented;
        changed = true;
    };
    while (changed) {
        changed = false;
        for (auto [a0, b0] : g.undirected_edges()) {
            // Try both orientations of each undirected edge; the rules are
            // checked for a -> b.
            for (int flip = 0; flip < 2; ++flip) {
                const int a = flip ? b0 : a0;
                const int b = flip ? a0 : b0;
                if (!g.has_undirected(a, b)) break;
                bool fire = false;
                // R1: c -> a - b, c and b non-adjacent.
                for (int c = 0; c < n && !fire; ++c) {
                    if (g.has_directed(c, a) && c != b && !g.adjacent(c, b)) fire = true;
                }
                // R2: a -> c -> b.
                for (int c = 0; c < n && !fire; ++c) {
                    if (g.has_directed(a, c) && g.has_directed(c, b)) fire = true;
                }
                // R3: a - c -> b, a - d -> b, c and d non-adjacent.
                if (!fire) {
                    std::vector<int> cs;
                    for (int c = 0; c < n; ++c) {
                        if (g.has_undirected(a, c) && g.has_directed(c, b)) cs.push_back(c);
                    }
                    for (std::size_t i = 0; i < cs.size() && !fire; ++i) {
                        for (std::size_t j = i + 1; j < cs.size() && !fire; ++j) {
                            if (!g.adjacent(cs[i], cs[j])) fire = true;
                        }
                    }
                }
                // R4: a - c -> d -> b, a adjacent to d, c and b non-adjacent.
                for (int c = 0; c < n && !fire; ++c) {
                    if (!g.has_undirected(a, c) || c == b || g.adjacent(c, b)) continue;
                    for (int d = 0; d < n && !fire; ++d) {
                        if (g.has_directed(c, d) && g.has_directed(d, b) && g.adjacent(a, d)) fire = true;
                    }
                }
                if (fire) {
                    orient(a, b);
                    break;
                }
            }
        }
    }
    return oriented;
}

Graph skeleton(const Graph& g) {
    Graph s(g.nodes());
    for (auto [a, b] : g.directed_edges()) s.add_undirected(a, b);
    for (auto [a, b] : g.undirected_edges()) s.add_undirected(a, b);
    return s;
}

Graph dag_to_cpdag(const Graph& dag) {
    if (!is_dag(dag)) throw GraphError("dag_to_cpdag requires a DAG");
    Graph cpdag = skeleton(dag);
    for (auto [a, c, b] : v_structures(dag)) {
        cpdag.set_directed(a, c);
        cpdag.set_directed(b, c);
    }
    apply_meek_rules(cpdag);
    return cpdag;
}

Graph cpdag_to_dag(const Graph& pdag, std::uint64_t seed) {
    Graph work = pdag;
    Graph result = pdag;
    std::mt19937_64 rng(seed);
    std::vector<char> alive(pdag.size(), 1);
    std::size_t remaining = pdag.size();
    const auto order = pdag.canonical_order();
    while (remaining > 0) {
        std::vector<int> candidates;
        for (int x : order) {
            if (!alive[static_cast<std::size_t>(x)]) continue;
            if (!work.children(x).empty()) continue;
            const auto adj = work.adjacents(x);
            bool ok = true;
            for (int y : work.neighbors(x)) {
                for (int other : adj) {
                    if (other != y && !work.adjacent(y, other)) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
            if (ok) candidates.push_back(x);
        }
        if (candidates.empty()) {
            throw NoConsistentExtension("partially directed graph has no consistent DAG extension");
        }
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const int x = candidates[pick(rng)];
        for (int y : work.neighbors(x)) result.set_directed(y, x);
        for (int y : work.adjacents(x)) work.remove_edge(x, y);
        alive[static_cast<std::size_t>(x)] = 0;
        --remaining;
    }
    return result;
}

Graph remove_incoming(const Graph& g, std::span<const int> x) {
    Graph out = g;
    for (int v : x) {
        for (int p : g.parents(v)) out.remove_edge(p, v);
    }
    return out;
}

Graph remove_outgoing(const Graph& g, std::span<const int> x) {
    Graph out = g;
    for (int v : x) {
        for (int c : g.children(v)) out.remove_edge(v, c);
    }
    return out;
}

MutilatedViews mutilated_views(const Graph& g, std::span<const int> x) {
    return {remove_incoming(g, x), remove_outgoing(g, x)};
}

Graph reorder_nodes(const Graph& g, const std::vector<std::string>& order) {
    Graph out(order);
    if (out.size() != g.size()) throw GraphError("reorder_nodes: node sets differ");
    for (const auto& n : g.nodes()) out.index_of(n);
    for (auto [a, b] : g.directed_edges()) out.add_directed(g.name(a), g.name(b));
    for (auto [a, b] : g.undirected_edges()) out.add_undirected(g.name(a), g.name(b));
    return out;
}

}  // namespace cbnkit
