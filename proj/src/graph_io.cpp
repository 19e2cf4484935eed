#include "cbnkit/graph_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cbnkit/errors.hpp"
#include "csv.hpp"

namespace cbnkit {

std::vector<EdgeRow> read_edge_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw GraphError("cannot open edge list: " + path.string());
    std::string line;
    // Skip leading comment lines.
    do {
        if (!csv::getline(in, line)) throw GraphError("empty edge list: " + path.string());
    } while (line.empty() || line.front() == '#');
    std::vector<std::string> header;
    for (auto f : csv::split(line)) header.emplace_back(f);
    auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto from_col = col("from");
    const auto to_col = col("to");
    const auto mark_col = col("mark");
    if (!from_col || !to_col) throw GraphError(path.string() + ": edge list needs 'from' and 'to' columns");
    std::vector<EdgeRow> rows;
    std::size_t line_no = 1;
    while (csv::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty() || line.front() == '#') continue;
        auto fields = csv::split(line);
        fields.resize(header.size());
        EdgeRow row;
        row.from = std::string(fields[*from_col]);
        row.to = std::string(fields[*to_col]);
        if (row.from.empty()) throw GraphError(path.string() + ":" + std::to_string(line_no) + ": empty 'from'");
        if (mark_col) {
            const auto mark = fields[*mark_col];
            if (mark.empty() || mark == "directed" || mark == "->") {
                row.directed = true;
            } else if (mark == "undirected" || mark == "--") {
                row.directed = false;
            } else if (!row.to.empty()) {
                throw GraphError(path.string() + ":" + std::to_string(line_no) + ": unknown mark '" +
                                 std::string(mark) + "'");
            }
        }
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c != *from_col && c != *to_col && (!mark_col || c != *mark_col)) {
                row.extra[header[c]] = std::string(fields[c]);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Graph graph_from_rows(const std::vector<EdgeRow>& rows, const std::optional<std::vector<std::string>>& nodes) {
    std::vector<std::string> universe;
    if (nodes) {
        universe = *nodes;
    } else {
        std::set<std::string> seen;
        auto add = [&](const std::string& n) {
            if (!n.empty() && seen.insert(n).second) universe.push_back(n);
        };
        for (const auto& r : rows) {
            add(r.from);
            add(r.to);
        }
    }
    Graph g(universe);
    for (const auto& r : rows) {
        if (r.to.empty()) {
            g.index_of(r.from);
            continue;
        }
        if (r.directed) {
            g.add_directed(r.from, r.to);
        } else {
            g.add_undirected(r.from, r.to);
        }
    }
    return g;
}

Graph read_edge_list_csv(const std::filesystem::path& path, const std::optional<std::vector<std::string>>& nodes) {
    return graph_from_rows(read_edge_rows(path), nodes);
}

void write_edge_list_csv(const Graph& g, const std::filesystem::path& path,
                         const std::vector<std::string>& extra_columns, const EdgeAnnotator& annotate) {
    std::ofstream out(path);
    if (!out) throw GraphError("cannot write " + path.string());
    out << "from,to,mark";
    for (const auto& c : extra_columns) out << ',' << c;
    out << '\n';
    auto write_extra = [&](int a, int b) {
        if (extra_columns.empty()) return;
        auto values = annotate ? annotate(a, b) : std::vector<std::string>{};
        values.resize(extra_columns.size());
        for (const auto& v : values) out << ',' << v;
    };
    for (auto [a, b] : g.directed_edges()) {
        out << g.name(a) << ',' << g.name(b) << ",directed";
        write_extra(a, b);
        out << '\n';
    }
    for (auto [a, b] : g.undirected_edges()) {
        out << g.name(a) << ',' << g.name(b) << ",undirected";
        write_extra(a, b);
        out << '\n';
    }
    for (int v : g.canonical_order()) {
        if (g.adjacents(v).empty()) {
            out << g.name(v) << ",,";
            for (std::size_t i = 0; i < extra_columns.size(); ++i) out << ',';
            out << '\n';
        }
    }
}

nlohmann::json graph_to_json(const Graph& g, const std::function<void(int, int, nlohmann::json&)>& annotate) {
    nlohmann::json edges = nlohmann::json::array();
    auto emit = [&](int a, int b, bool directed) {
        nlohmann::json e{{"from", g.name(a)}, {"to", g.name(b)}, {"directed", directed}};
        if (annotate) annotate(a, b, e);
        edges.push_back(std::move(e));
    };
    for (auto [a, b] : g.directed_edges()) emit(a, b, true);
    for (auto [a, b] : g.undirected_edges()) emit(a, b, false);
    return {{"nodes", g.nodes()}, {"edges", edges}};
}

Graph graph_from_json(const nlohmann::json& j) {
    try {
        Graph g(j.at("nodes").get<std::vector<std::string>>());
        for (const auto& e : j.at("edges")) {
            const auto from = e.at("from").get<std::string>();
            const auto to = e.at("to").get<std::string>();
            if (e.value("directed", true)) {
                g.add_directed(from, to);
            } else {
                g.add_undirected(from, to);
            }
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw GraphError(std::string("invalid graph JSON: ") + e.what());
    }
}

std::string to_dot(const Graph& g, const std::function<std::optional<std::string>(int, int)>& colour) {
    std::ostringstream out;
    out << "digraph G {\n";
    for (int v : g.canonical_order()) out << "  \"" << g.name(v) << "\";\n";
    for (auto [a, b] : g.directed_edges()) {
        out << "  \"" << g.name(a) << "\" -> \"" << g.name(b) << '"';
        if (colour) {
            if (auto c = colour(a, b)) out << " [color=" << *c << ']';
        }
        out << ";\n";
    }
    for (auto [a, b] : g.undirected_edges()) {
        out << "  \"" << g.name(a) << "\" -> \"" << g.name(b) << "\" [dir=none];\n";
    }
    out << "}\n";
    return out.str();
}

Graph load_graph(const std::filesystem::path& path, const std::optional<std::vector<std::string>>& nodes) {
    if (path.extension() == ".json") {
        std::ifstream in(path);
        if (!in) throw GraphError("cannot open " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw GraphError("invalid JSON in " + path.string() + ": " + e.what());
        }
        const auto& graph_json = j.contains("graph") ? j.at("graph") : j;
        Graph g = graph_from_json(graph_json);
        return nodes ? reorder_nodes(g, *nodes) : g;
    }
    return read_edge_list_csv(path, nodes);
}

}  // namespace cbnkit
