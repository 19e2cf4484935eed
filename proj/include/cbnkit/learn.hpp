#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbnkit/data.hpp"
#include "cbnkit/graph.hpp"
#include "json.hpp"

namespace cbnkit {

enum class Algorithm { PcStable, GS, IAMB, FastIAMB, HC, TABU, MMHC };

/// Lower-case identifier used in configs and file names ("pc-stable", "fast-iamb", ...).
const char* to_string(Algorithm a);
/// Case-insensitive; accepts '-' or '_' separators and the bare forms ("pcstable").
Algorithm parse_algorithm(std::string_view s);
const std::vector<Algorithm>& all_algorithms();

enum class SymmetryRule { And, Or };

struct LearnConfig {
    Algorithm algorithm = Algorithm::HC;
    double alpha = 0.05;
    std::optional<int> max_indegree;
    int tabu_length = 10;
    int tabu_max_worsening = 10;
    std::chrono::milliseconds time_limit = std::chrono::hours(4);
    std::uint64_t seed = 0;
    /// MB / PC-set symmetry correction for GS, IAMB, fast-IAMB and MMPC.
    SymmetryRule symmetry = SymmetryRule::And;
    /// Largest conditioning set tried by the constraint-based phases.
    std::optional<int> max_condition_size;
    bool min_count_guard = true;

    /// Throws InvalidArgument on alpha outside (0,1), tabu_length < 1,
    /// non-positive time limit or negative bounds.
    void validate() const;
};

LearnConfig learn_config_from_json(const nlohmann::json& j, const LearnConfig& defaults = {});
nlohmann::json to_json(const LearnConfig& c);

struct TracePoint {
    int iteration = 0;
    double bic = 0.0;
};

struct LearnResult {
    Algorithm algorithm = Algorithm::HC;
    Graph graph;
    GraphKind graph_kind = GraphKind::Dag;
    std::vector<TracePoint> score_trace;
    /// CI tests requested (constraint phases) plus family scores computed.
    std::size_t test_count = 0;
    std::chrono::duration<double> elapsed{0.0};
    bool timed_out = false;
    /// v-structure orientations that contradicted an earlier one, "a->b conflicts with b->a".
    std::vector<std::string> conflicts;
};

/// Greedy add/delete/reverse search over DAGs from the empty graph.
LearnResult hill_climb(const Dataset& data, const LearnConfig& config);
LearnResult tabu_search(const Dataset& data, const LearnConfig& config);
LearnResult pc_stable(const Dataset& data, const LearnConfig& config);
LearnResult gs(const Dataset& data, const LearnConfig& config);
LearnResult iamb(const Dataset& data, const LearnConfig& config);
LearnResult fast_iamb(const Dataset& data, const LearnConfig& config);
LearnResult mmhc(const Dataset& data, const LearnConfig& config);

/// Dispatches on config.algorithm.
LearnResult learn(const Dataset& data, const LearnConfig& config);

/// Per-variable Markov blankets (dataset column indices, sorted) as estimated
/// by GS, IAMB or fast-IAMB before the symmetry correction.
std::vector<std::vector<int>> estimate_markov_blankets(const Dataset& data, const LearnConfig& config);

/// Symmetry-corrected MMPC parents-and-children sets as an undirected graph.
Graph mmpc_skeleton(const Dataset& data, const LearnConfig& config);

/// DAG for metric evaluation: identity for DAGs, a seeded consistent
/// extension for CPDAGs. Throws NoConsistentExtension for conflicted PDAGs.
Graph to_dag(const LearnResult& result, std::uint64_t seed);

nlohmann::json to_json(const LearnResult& r);
LearnResult learn_result_from_json(const nlohmann::json& j);

/// Writes <stem>.json, <stem>.csv (edge list) and <stem>.dot; returns the paths.
std::vector<std::filesystem::path> write_learn_result(const LearnResult& r, const std::filesystem::path& dir,
                                                      const std::string& stem);

}  // namespace cbnkit
