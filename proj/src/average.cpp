#include "cbnkit/average.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"

namespace cbnkit {

namespace {

NamePair ordered(const std::string& a, const std::string& b) { return a < b ? NamePair{a, b} : NamePair{b, a}; }

struct Candidate {
    std::string from;
    std::string to;
    int frequency;
};

std::vector<Candidate> by_frequency(const std::map<NamePair, int>& counts, int min_freq,
                                    std::vector<ExcludedEdge>& excluded, bool directed) {
    std::vector<Candidate> out;
    for (const auto& [pair, f] : counts) {
        if (f < min_freq) {
            excluded.push_back({pair.first, pair.second, directed, f});
        } else {
            out.push_back({pair.first, pair.second, f});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(b.frequency, a.from, a.to) < std::tie(a.frequency, b.from, b.to);
    });
    return out;
}

bool closes_cycle(const Graph& g, int from, int to) { return has_directed_path(g, to, from); }

}  // namespace

int EdgeTally::directed_freq(const std::string& from, const std::string& to) const {
    auto it = directed.find({from, to});
    return it == directed.end() ? 0 : it->second;
}

int EdgeTally::undirected_freq(const std::string& a, const std::string& b) const {
    auto it = undirected.find(ordered(a, b));
    return it == undirected.end() ? 0 : it->second;
}

EdgeTally tally(const std::vector<Graph>& graphs) {
    EdgeTally t;
    if (graphs.empty()) return t;
    t.nodes = graphs.front().nodes();
    const std::set<std::string> reference(t.nodes.begin(), t.nodes.end());
    for (const auto& g : graphs) {
        if (std::set<std::string>(g.nodes().begin(), g.nodes().end()) != reference) {
            throw GraphError("averaging inputs do not share the same node set");
        }
        for (auto [a, b] : g.directed_edges()) ++t.directed[{g.name(a), g.name(b)}];
        for (auto [a, b] : g.undirected_edges()) ++t.undirected[ordered(g.name(a), g.name(b))];
        ++t.n_inputs;
    }
    return t;
}

const char* to_string(EdgeSource s) {
    switch (s) {
        case EdgeSource::Directed: return "directed";
        case EdgeSource::Undirected: return "undirected";
        case EdgeSource::Reversed: return "reversed";
    }
    return "?";
}

AverageResult model_average(const EdgeTally& t, int min_freq) {
    if (min_freq < 1) throw InvalidArgument("min_freq must be at least 1");
    AverageResult r;
    r.graph = Graph(t.nodes);
    Graph& g = r.graph;
    auto insert = [&](const std::string& from, const std::string& to, int f, EdgeSource s) {
        g.add_directed(from, to);
        r.edges.push_back({from, to, f, s});
    };

    // Step 1: directed edges.
    for (const auto& c : by_frequency(t.directed, min_freq, r.excluded_below_threshold, true)) {
        const int a = g.index_of(c.from), b = g.index_of(c.to);
        if (g.adjacent(a, b)) {
            r.trace.push_back("skip " + c.from + "->" + c.to + ": pair already present");
            continue;
        }
        if (closes_cycle(g, a, b)) {
            r.reversed_set_c.push_back({c.to, c.from, c.frequency, EdgeSource::Reversed});
            r.trace.push_back("defer " + c.from + "->" + c.to + ": closes a cycle, reversed into set C");
            continue;
        }
        insert(c.from, c.to, c.frequency, EdgeSource::Directed);
    }
    // Step 2: undirected edges, low -> high by name unless that closes a cycle.
    for (const auto& c : by_frequency(t.undirected, min_freq, r.excluded_below_threshold, false)) {
        const int a = g.index_of(c.from), b = g.index_of(c.to);
        if (g.adjacent(a, b)) {
            r.trace.push_back("skip " + c.from + "--" + c.to + ": pair already present");
            continue;
        }
        if (closes_cycle(g, a, b)) {
            insert(c.to, c.from, c.frequency, EdgeSource::Undirected);
            r.trace.push_back("orient " + c.from + "--" + c.to + " as " + c.to + "->" + c.from);
        } else {
            insert(c.from, c.to, c.frequency, EdgeSource::Undirected);
        }
    }
    // Step 3: set C. The path that forced the reversal is still present, so
    // these insertions cannot close a cycle.
    auto c_edges = r.reversed_set_c;
    std::stable_sort(c_edges.begin(), c_edges.end(), [](const AveragedEdge& x, const AveragedEdge& y) {
        return std::tie(y.frequency, x.from, x.to) < std::tie(x.frequency, y.from, y.to);
    });
    for (const auto& e : c_edges) {
        const int a = g.index_of(e.from), b = g.index_of(e.to);
        if (g.adjacent(a, b)) {
            r.trace.push_back("skip set-C edge " + e.from + "->" + e.to + ": pair already present");
            continue;
        }
        insert(e.from, e.to, e.frequency, EdgeSource::Reversed);
    }
    return r;
}

int default_threshold(int n_inputs) {
    if (n_inputs < 1) throw InvalidArgument("need at least one input graph");
    return (n_inputs + 2) / 3;
}

std::vector<std::pair<std::string, Graph>> load_graph_directory(const std::filesystem::path& dir,
                                                                const std::optional<std::vector<std::string>>& nodes) {
    if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".csv" || ext == ".json")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Graph>> out;
    for (const auto& f : files) out.emplace_back(f.stem().string(), load_graph(f, nodes));
    return out;
}

void write_average_csv(const AverageResult& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "from,to,mark,frequency,source\n";
    for (const auto& e : r.edges) {
        out << e.from << ',' << e.to << ",directed," << e.frequency << ',' << to_string(e.source) << '\n';
    }
    std::vector<std::string> isolated;
    for (int v = 0; v < static_cast<int>(r.graph.size()); ++v) {
        if (r.graph.adjacents(v).empty()) isolated.push_back(r.graph.name(v));
    }
    std::sort(isolated.begin(), isolated.end());
    for (const auto& n : isolated) out << n << ",,,,\n";
}

nlohmann::json to_json(const AverageResult& r, int min_freq, int n_inputs) {
    std::map<NamePair, const AveragedEdge*> lookup;
    for (const auto& e : r.edges) lookup[{e.from, e.to}] = &e;
    auto graph = graph_to_json(r.graph, [&](int a, int b, nlohmann::json& j) {
        const auto* e = lookup.at({r.graph.name(a), r.graph.name(b)});
        j["frequency"] = e->frequency;
        j["source"] = to_string(e->source);
    });
    nlohmann::json c = nlohmann::json::array();
    for (const auto& e : r.reversed_set_c) c.push_back({{"from", e.from}, {"to", e.to}, {"frequency", e.frequency}});
    nlohmann::json excluded = nlohmann::json::array();
    for (const auto& e : r.excluded_below_threshold) {
        excluded.push_back({{"from", e.from}, {"to", e.to}, {"directed", e.directed}, {"frequency", e.frequency}});
    }
    return {{"min_freq", min_freq},   {"n_inputs", n_inputs},         {"graph", graph},
            {"reversed_set_c", c},    {"excluded_below_threshold", excluded}, {"trace", r.trace}};
}

}  // namespace cbnkit
