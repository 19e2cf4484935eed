#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbnkit/graph.hpp"
#include "json.hpp"

namespace cbnkit {

using NamePair = std::pair<std::string, std::string>;

/// Edge occurrence counts over a set of graphs sharing one node set.
/// Undirected pairs are keyed with the names in ascending order.
struct EdgeTally {
    std::vector<std::string> nodes;
    std::map<NamePair, int> directed;
    std::map<NamePair, int> undirected;
    int n_inputs = 0;

    int directed_freq(const std::string& from, const std::string& to) const;
    int undirected_freq(const std::string& a, const std::string& b) const;
};

/// Throws GraphError when the graphs do not share the same node names.
EdgeTally tally(const std::vector<Graph>& graphs);

enum class EdgeSource { Directed, Undirected, Reversed };
const char* to_string(EdgeSource s);

struct AveragedEdge {
    std::string from;
    std::string to;
    int frequency = 0;
    EdgeSource source = EdgeSource::Directed;
};

struct ExcludedEdge {
    std::string from;
    std::string to;
    bool directed = true;
    int frequency = 0;
};

struct AverageResult {
    Graph graph;
    /// Output edges in insertion order.
    std::vector<AveragedEdge> edges;
    /// Edges that closed a cycle in step 1, stored reversed (as inserted later).
    std::vector<AveragedEdge> reversed_set_c;
    std::vector<ExcludedEdge> excluded_below_threshold;
    /// One line per skipped or re-oriented edge.
    std::vector<std::string> trace;
};

/// Three-step averaging: directed edges by descending frequency with cycle
/// reversal into set C, then undirected edges (oriented low -> high by name
/// unless that closes a cycle), then set C. Equal frequencies are ordered by
/// (from, to) name. Edges below min_freq are dropped first.
AverageResult model_average(const EdgeTally& t, int min_freq);

/// ceil(n / 3); 11 inputs -> 4.
int default_threshold(int n_inputs);

/// Every *.csv / *.json graph in `dir`, sorted by file name.
std::vector<std::pair<std::string, Graph>> load_graph_directory(
    const std::filesystem::path& dir, const std::optional<std::vector<std::string>>& nodes = std::nullopt);

/// Edge list with columns from,to,mark,frequency,source.
void write_average_csv(const AverageResult& r, const std::filesystem::path& path);
nlohmann::json to_json(const AverageResult& r, int min_freq, int n_inputs);

}  // namespace cbnkit
