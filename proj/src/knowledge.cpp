#include "cbnkit/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"

namespace cbnkit {

const char* to_string(Tier t) {
    switch (t) {
        case Tier::High: return "high";
        case Tier::Moderate: return "moderate";
        case Tier::Low: return "low";
    }
    return "?";
}

Tier parse_tier(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "high") return Tier::High;
    if (lower == "moderate" || lower == "medium") return Tier::Moderate;
    if (lower == "low") return Tier::Low;
    throw GraphError("unknown confidence tier: " + std::string(s));
}

const char* tier_colour(Tier t) {
    switch (t) {
        case Tier::High: return "green";
        case Tier::Moderate: return "blue";
        case Tier::Low: return "red";
    }
    return "black";
}

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> nodes, std::vector<TieredEdge> edges)
    : base_(std::move(nodes)), edges_(std::move(edges)) {
    for (const auto& e : edges_) base_.add_directed(e.from, e.to);
    for (auto level : {Tier::High, Tier::Moderate, Tier::Low}) {
        if (!is_acyclic(slice(level))) {
            throw GraphError(std::string("knowledge graph slice '") + to_string(level) + "' is cyclic");
        }
    }
}

std::optional<Tier> KnowledgeGraph::tier_of(std::string_view from, std::string_view to) const {
    for (const auto& e : edges_) {
        if (e.from == from && e.to == to) return e.tier;
    }
    return std::nullopt;
}

std::vector<TieredEdge> KnowledgeGraph::edges_up_to(Tier level) const {
    std::vector<TieredEdge> out;
    for (const auto& e : edges_) {
        if (e.tier <= level) out.push_back(e);
    }
    return out;
}

Graph KnowledgeGraph::slice(Tier level) const {
    Graph g(base_.nodes());
    for (const auto& e : edges_) {
        if (e.tier <= level) g.add_directed(e.from, e.to);
    }
    return g;
}

KnowledgeGraph load_knowledge_csv(const std::filesystem::path& path,
                                  const std::optional<std::vector<std::string>>& nodes) {
    const auto rows = read_edge_rows(path);
    Graph universe = graph_from_rows(rows, nodes);
    std::vector<TieredEdge> edges;
    for (const auto& r : rows) {
        if (r.to.empty()) continue;
        if (!r.directed) throw GraphError(path.string() + ": knowledge edges must be directed");
        auto it = r.extra.find("tier");
        if (it == r.extra.end() || it->second.empty()) {
            throw GraphError(path.string() + ": edge " + r.from + "->" + r.to + " has no tier");
        }
        edges.push_back({r.from, r.to, parse_tier(it->second)});
    }
    return KnowledgeGraph(universe.nodes(), std::move(edges));
}

}  // namespace cbnkit
