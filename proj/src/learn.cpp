#include "cbnkit/learn.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"
#include "learn_internal.hpp"

namespace cbnkit {

namespace {

struct AlgorithmName {
    Algorithm algorithm;
    const char* name;
};

constexpr AlgorithmName kNames[] = {
    {Algorithm::PcStable, "pc-stable"}, {Algorithm::GS, "gs"},   {Algorithm::IAMB, "iamb"},
    {Algorithm::FastIAMB, "fast-iamb"}, {Algorithm::HC, "hc"},   {Algorithm::TABU, "tabu"},
    {Algorithm::MMHC, "mmhc"},
};

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '-' || c == '_' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

GraphKind parse_kind(const std::string& s) {
    for (auto k : {GraphKind::Dag, GraphKind::Cpdag, GraphKind::Pdag}) {
        if (s == to_string(k)) return k;
    }
    throw InvalidArgument("unknown graph kind: " + s);
}

}  // namespace

const char* to_string(Algorithm a) {
    for (const auto& n : kNames) {
        if (n.algorithm == a) return n.name;
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view s) {
    const auto key = squash(s);
    for (const auto& n : kNames) {
        if (squash(n.name) == key) return n.algorithm;
    }
    throw InvalidArgument("unknown algorithm: " + std::string(s));
}

const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> all{Algorithm::PcStable, Algorithm::GS,   Algorithm::IAMB, Algorithm::FastIAMB,
                                            Algorithm::HC,       Algorithm::TABU, Algorithm::MMHC};
    return all;
}

void LearnConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
    if (tabu_length < 1) throw InvalidArgument("tabu_length must be at least 1");
    if (tabu_max_worsening < 0) throw InvalidArgument("tabu_max_worsening must be non-negative");
    if (time_limit.count() <= 0) throw InvalidArgument("time_limit must be positive");
    if (max_indegree && *max_indegree < 0) throw InvalidArgument("max_indegree must be non-negative");
    if (max_condition_size && *max_condition_size < 0) throw InvalidArgument("max_condition_size must be non-negative");
}

LearnConfig learn_config_from_json(const nlohmann::json& j, const LearnConfig& defaults) {
    LearnConfig c = defaults;
    try {
        if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("max_indegree")) {
            c.max_indegree = j.at("max_indegree").is_null() ? std::nullopt : std::optional<int>(j.at("max_indegree").get<int>());
        }
        if (j.contains("tabu_length")) c.tabu_length = j.at("tabu_length").get<int>();
        if (j.contains("tabu_max_worsening")) c.tabu_max_worsening = j.at("tabu_max_worsening").get<int>();
        if (j.contains("time_limit_seconds")) {
            c.time_limit = std::chrono::milliseconds(
                static_cast<long long>(j.at("time_limit_seconds").get<double>() * 1000.0));
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("symmetry")) {
            const auto s = squash(j.at("symmetry").get<std::string>());
            if (s == "and") {
                c.symmetry = SymmetryRule::And;
            } else if (s == "or") {
                c.symmetry = SymmetryRule::Or;
            } else {
                throw InvalidArgument("symmetry must be \"and\" or \"or\"");
            }
        }
        if (j.contains("max_condition_size")) {
            c.max_condition_size = j.at("max_condition_size").is_null()
                                       ? std::nullopt
                                       : std::optional<int>(j.at("max_condition_size").get<int>());
        }
        if (j.contains("min_count_guard")) c.min_count_guard = j.at("min_count_guard").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("learn config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const LearnConfig& c) {
    nlohmann::json j{{"algorithm", to_string(c.algorithm)},
                     {"alpha", c.alpha},
                     {"tabu_length", c.tabu_length},
                     {"tabu_max_worsening", c.tabu_max_worsening},
                     {"time_limit_seconds", static_cast<double>(c.time_limit.count()) / 1000.0},
                     {"seed", c.seed},
                     {"symmetry", c.symmetry == SymmetryRule::And ? "and" : "or"},
                     {"min_count_guard", c.min_count_guard}};
    j["max_indegree"] = c.max_indegree ? nlohmann::json(*c.max_indegree) : nlohmann::json(nullptr);
    j["max_condition_size"] = c.max_condition_size ? nlohmann::json(*c.max_condition_size) : nlohmann::json(nullptr);
    return j;
}

namespace {

LearnResult search(const Dataset& data, LearnConfig config, bool tabu) {
    config.validate();
    detail::Deadline deadline(config.time_limit);
    detail::SearchOptions options;
    options.tabu = tabu;
    auto r = detail::score_search(data, config, options, deadline);
    r.elapsed = deadline.elapsed();
    return r;
}

}  // namespace

LearnResult hill_climb(const Dataset& data, const LearnConfig& config) { return search(data, config, false); }

LearnResult tabu_search(const Dataset& data, const LearnConfig& config) { return search(data, config, true); }

LearnResult pc_stable(const Dataset& data, const LearnConfig& config) {
    config.validate();
    detail::Deadline deadline(config.time_limit);
    return detail::run_pc_stable(data, config, deadline);
}

namespace {

LearnResult mb_learner(const Dataset& data, LearnConfig config, Algorithm a) {
    config.validate();
    config.algorithm = a;
    detail::Deadline deadline(config.time_limit);
    return detail::run_mb_learner(data, config, deadline);
}

}  // namespace

LearnResult gs(const Dataset& data, const LearnConfig& config) { return mb_learner(data, config, Algorithm::GS); }
LearnResult iamb(const Dataset& data, const LearnConfig& config) { return mb_learner(data, config, Algorithm::IAMB); }
LearnResult fast_iamb(const Dataset& data, const LearnConfig& config) {
    return mb_learner(data, config, Algorithm::FastIAMB);
}

LearnResult mmhc(const Dataset& data, const LearnConfig& config) {
    config.validate();
    detail::Deadline deadline(config.time_limit);
    std::size_t tests = 0;
    bool timed_out = false;
    const auto skeleton = detail::run_mmpc(data, config, deadline, &tests, &timed_out);
    const auto n = data.n_vars();
    detail::SearchOptions options;
    options.allowed.assign(n * n, 0);
    for (auto [a, b] : skeleton.undirected_edges()) {
        options.allowed[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)] = 1;
        options.allowed[static_cast<std::size_t>(b) * n + static_cast<std::size_t>(a)] = 1;
    }
    auto r = detail::score_search(data, config, options, deadline);
    r.algorithm = Algorithm::MMHC;
    r.test_count += tests;
    r.timed_out = r.timed_out || timed_out;
    r.elapsed = deadline.elapsed();
    return r;
}

LearnResult learn(const Dataset& data, const LearnConfig& config) {
    switch (config.algorithm) {
        case Algorithm::PcStable: return pc_stable(data, config);
        case Algorithm::GS: return gs(data, config);
        case Algorithm::IAMB: return iamb(data, config);
        case Algorithm::FastIAMB: return fast_iamb(data, config);
        case Algorithm::HC: return hill_climb(data, config);
        case Algorithm::TABU: return tabu_search(data, config);
        case Algorithm::MMHC: return mmhc(data, config);
    }
    throw InvalidArgument("unknown algorithm");
}

std::vector<std::vector<int>> estimate_markov_blankets(const Dataset& data, const LearnConfig& config) {
    config.validate();
    detail::Deadline deadline(config.time_limit);
    try {
        return detail::run_blankets(data, config, deadline, nullptr);
    } catch (const detail::TimedOut&) {
        throw Error("Markov blanket estimation exceeded the time limit");
    }
}

Graph mmpc_skeleton(const Dataset& data, const LearnConfig& config) {
    config.validate();
    detail::Deadline deadline(config.time_limit);
    return detail::run_mmpc(data, config, deadline, nullptr, nullptr);
}

Graph to_dag(const LearnResult& result, std::uint64_t seed) {
    switch (result.graph_kind) {
        case GraphKind::Dag:
            if (!is_dag(result.graph)) throw GraphError("result marked DAG is not acyclic and fully directed");
            return result.graph;
        case GraphKind::Cpdag: return cpdag_to_dag(result.graph, seed);
        case GraphKind::Pdag:
            if (!result.conflicts.empty()) {
                throw NoConsistentExtension("PDAG with conflicting v-structures has no consistent extension");
            }
            return cpdag_to_dag(result.graph, seed);
    }
    throw InvalidArgument("unknown graph kind");
}

nlohmann::json to_json(const LearnResult& r) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : r.score_trace) trace.push_back({t.iteration, t.bic});
    return {{"algorithm", to_string(r.algorithm)},
            {"graph_kind", to_string(r.graph_kind)},
            {"graph", graph_to_json(r.graph)},
            {"score_trace", trace},
            {"test_count", r.test_count},
            {"elapsed_seconds", r.elapsed.count()},
            {"timed_out", r.timed_out},
            {"conflicts", r.conflicts}};
}

LearnResult learn_result_from_json(const nlohmann::json& j) {
    try {
        LearnResult r;
        r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        r.graph_kind = parse_kind(j.at("graph_kind").get<std::string>());
        r.graph = graph_from_json(j.at("graph"));
        for (const auto& t : j.value("score_trace", nlohmann::json::array())) {
            r.score_trace.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
        }
        r.test_count = j.value("test_count", std::size_t{0});
        r.elapsed = std::chrono::duration<double>(j.value("elapsed_seconds", 0.0));
        r.timed_out = j.value("timed_out", false);
        r.conflicts = j.value("conflicts", std::vector<std::string>{});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("learn result: ") + e.what());
    }
}

std::vector<std::filesystem::path> write_learn_result(const LearnResult& r, const std::filesystem::path& dir,
                                                      const std::string& stem) {
    std::filesystem::create_directories(dir);
    const auto json_path = dir / (stem + ".json");
    const auto csv_path = dir / (stem + ".csv");
    const auto dot_path = dir / (stem + ".dot");
    {
        std::ofstream out(json_path);
        if (!out) throw Error("cannot write " + json_path.string());
        out << to_json(r).dump(2) << '\n';
    }
    write_edge_list_csv(r.graph, csv_path);
    {
        std::ofstream out(dot_path);
        if (!out) throw Error("cannot write " + dot_path.string());
        out << to_dot(r.graph);
    }
    return {json_path, csv_path, dot_path};
}

}  // namespace cbnkit
