#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbnkit/graph.hpp"

namespace cbnkit {

/// Expert confidence level of a causal edge. Ordered so that a slice at level
/// L contains every edge whose tier is at most L.
enum class Tier { High = 0, Moderate = 1, Low = 2 };

const char* to_string(Tier t);
Tier parse_tier(std::string_view s);
/// DOT/UI colour for a tier: green, blue, red.
const char* tier_colour(Tier t);

struct TieredEdge {
    std::string from;
    std::string to;
    Tier tier = Tier::High;
};

/// Directed expert graph where every edge carries exactly one tier. Edges keep
/// their file order (agreement tables are reported in that order).
class KnowledgeGraph {
public:
    KnowledgeGraph(std::vector<std::string> nodes, std::vector<TieredEdge> edges);

    const Graph& base() const { return base_; }
    const std::vector<TieredEdge>& edges() const { return edges_; }
    std::optional<Tier> tier_of(std::string_view from, std::string_view to) const;

    /// Edges of tier <= level: High -> high only, Moderate -> high + moderate,
    /// Low -> everything.
    Graph slice(Tier level) const;
    std::vector<TieredEdge> edges_up_to(Tier level) const;

private:
    Graph base_;
    std::vector<TieredEdge> edges_;
};

/// Edge-list CSV with columns from,to,mark,tier. `nodes`, when given, fixes
/// the node universe (e.g. the dataset's variables).
KnowledgeGraph load_knowledge_csv(const std::filesystem::path& path,
                                  const std::optional<std::vector<std::string>>& nodes = std::nullopt);

}  // namespace cbnkit
