#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cbnkit {

using Edge = std::pair<int, int>;

/// Mixed graph over named nodes: directed edges plus undirected edges, at most
/// one edge per unordered pair, no self-loops. Node indices follow the order
/// given at construction; edge listings and equality are canonicalised by
/// node name so results never depend on that order.
class Graph {
public:
    Graph() = default;
    explicit Graph(std::vector<std::string> nodes);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& name(int v) const { return nodes_.at(static_cast<std::size_t>(v)); }
    int index_of(std::string_view name) const;
    std::optional<int> find(std::string_view name) const;

    bool has_directed(int from, int to) const { return mark(from, to) == kDirected; }
    bool has_undirected(int a, int b) const { return mark(a, b) == kUndirected; }
    bool adjacent(int a, int b) const { return mark(a, b) != kNone || mark(b, a) != kNone; }

    /// Throws GraphError on self-loops or when the pair is already adjacent.
    void add_directed(int from, int to);
    void add_undirected(int a, int b);
    void add_directed(std::string_view from, std::string_view to) { add_directed(index_of(from), index_of(to)); }
    void add_undirected(std::string_view a, std::string_view b) { add_undirected(index_of(a), index_of(b)); }
    /// Removes whatever edge joins the pair; no-op when not adjacent.
    void remove_edge(int a, int b);
    /// Replaces the edge between the pair (if any) by from -> to.
    void set_directed(int from, int to);

    std::vector<int> parents(int v) const;
    std::vector<int> children(int v) const;
    std::vector<int> neighbors(int v) const;  // undirected only
    std::vector<int> adjacents(int v) const;

    /// Directed edges sorted by (from name, to name).
    std::vector<Edge> directed_edges() const;
    /// Undirected edges as (a, b) with name(a) < name(b), sorted.
    std::vector<Edge> undirected_edges() const;
    std::size_t num_directed() const { return n_directed_; }
    std::size_t num_undirected() const { return n_undirected_; }
    std::size_t num_edges() const { return n_directed_ + n_undirected_; }

    /// Node indices sorted by name.
    std::vector<int> canonical_order() const;

    /// Same node names and the same named edges.
    bool operator==(const Graph& other) const;

    /// Order-independent fingerprint of the named edge set.
    std::uint64_t fingerprint() const;

private:
    static constexpr std::uint8_t kNone = 0;
    static constexpr std::uint8_t kDirected = 1;
    static constexpr std::uint8_t kUndirected = 2;

    std::uint8_t mark(int a, int b) const {
        return marks_[static_cast<std::size_t>(a) * nodes_.size() + static_cast<std::size_t>(b)];
    }
    std::uint8_t& mark(int a, int b) {
        return marks_[static_cast<std::size_t>(a) * nodes_.size() + static_cast<std::size_t>(b)];
    }
    void check_pair(int a, int b) const;

    std::vector<std::string> nodes_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::uint8_t> marks_;
    std::size_t n_directed_ = 0;
    std::size_t n_undirected_ = 0;
};

enum class GraphKind { Dag, Cpdag, Pdag };
const char* to_string(GraphKind kind);

/// True iff the directed part has no cycle (undirected edges are ignored).
bool is_acyclic(const Graph& g);
/// Fully directed and acyclic.
bool is_dag(const Graph& g);
/// Topological order of the directed part; throws GraphError on a cycle.
std::vector<int> topological_order(const Graph& g);
bool has_directed_path(const Graph& g, int from, int to);
/// Nodes with a directed path into any of `targets`, excluding the targets.
std::vector<int> ancestors(const Graph& g, std::span<const int> targets);
std::vector<int> descendants(const Graph& g, std::span<const int> sources);

/// d-separation of X and Y given Z in a DAG. Sets must be pairwise disjoint.
bool d_separated(const Graph& g, std::span<const int> x, std::span<const int> y, std::span<const int> z);

/// Parents, children and the children's other parents.
std::vector<int> markov_blanket(const Graph& g, int x);

/// Colliders a -> c <- b with a, b non-adjacent, as (a, c, b) with a < b by name.
std::vector<std::tuple<int, int, int>> v_structures(const Graph& g);

/// Orients undirected edges with Meek rules 1-4 until nothing changes.
/// Returns the number of edges oriented.
int apply_meek_rules(Graph& g);

/// Compelled edges directed, reversible edges undirected.
Graph dag_to_cpdag(const Graph& dag);

/// Random consistent extension of a PDAG/CPDAG (same skeleton, same
/// v-structures, acyclic), choosing among admissible sinks with `seed`.
/// Throws NoConsistentExtension when none exists.
Graph cpdag_to_dag(const Graph& pdag, std::uint64_t seed);

/// G with every edge pointing into `x` removed.
Graph remove_incoming(const Graph& g, std::span<const int> x);
/// G with every edge leaving `x` removed.
Graph remove_outgoing(const Graph& g, std::span<const int> x);

struct MutilatedViews {
    Graph g_bar_x;
    Graph g_under_x;
};
MutilatedViews mutilated_views(const Graph& g, std::span<const int> x);

/// Undirected copy of every edge.
Graph skeleton(const Graph& g);

/// Same nodes in `order` (a permutation of g's names), same named edges.
Graph reorder_nodes(const Graph& g, const std::vector<std::string>& order);

}  // namespace cbnkit
