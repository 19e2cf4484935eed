#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbnkit/graph.hpp"
#include "json.hpp"

namespace cbnkit {

/// One row of an edge-list CSV. Rows with an empty `to` declare an isolated node.
struct EdgeRow {
    std::string from;
    std::string to;
    bool directed = true;
    std::map<std::string, std::string> extra;
};

std::vector<EdgeRow> read_edge_rows(const std::filesystem::path& path);

/// Builds a graph from rows. With `nodes` the universe is fixed and unknown
/// endpoints are errors; otherwise nodes are collected in order of appearance.
Graph graph_from_rows(const std::vector<EdgeRow>& rows,
                      const std::optional<std::vector<std::string>>& nodes = std::nullopt);

Graph read_edge_list_csv(const std::filesystem::path& path,
                         const std::optional<std::vector<std::string>>& nodes = std::nullopt);

/// Extra per-edge columns, filled by `annotate(from, to)`.
using EdgeAnnotator = std::function<std::vector<std::string>(int, int)>;

void write_edge_list_csv(const Graph& g, const std::filesystem::path& path,
                         const std::vector<std::string>& extra_columns = {}, const EdgeAnnotator& annotate = {});

/// {nodes: [...], edges: [{from, to, directed, ...}]}; `annotate` may add
/// fields (tier, frequency) to each edge object.
nlohmann::json graph_to_json(const Graph& g, const std::function<void(int, int, nlohmann::json&)>& annotate = {});
Graph graph_from_json(const nlohmann::json& j);

/// Graphviz rendering; `colour(from, to)` may return an edge colour.
std::string to_dot(const Graph& g, const std::function<std::optional<std::string>(int, int)>& colour = {});

/// Reads a graph from .csv or .json by extension.
Graph load_graph(const std::filesystem::path& path,
                 const std::optional<std::vector<std::string>>& nodes = std::nullopt);

}  // namespace cbnkit
