#include "cbnkit/metrics.hpp"

#include <fstream>
#include <set>

#include "cbnkit/errors.hpp"

namespace cbnkit {

namespace {

/// Index of every node of `g` in `ref`; throws on differing node sets.
std::vector<int> align(const Graph& g, const Graph& ref) {
    if (g.size() != ref.size()) throw GraphError("graphs have different node sets");
    std::vector<int> map(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        auto idx = ref.find(g.nodes()[v]);
        if (!idx) throw GraphError("graphs have different node sets: " + g.nodes()[v]);
        map[v] = *idx;
    }
    return map;
}

void require_dag(const Graph& g, const char* what) {
    if (!is_dag(g)) throw GraphError(std::string(what) + " must be a DAG");
}

double ratio(int num, int den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

const char* to_string(MetricMode m) { return m == MetricMode::Strict ? "strict" : "skeleton"; }

MetricMode parse_metric_mode(const std::string& s) {
    if (s == "strict") return MetricMode::Strict;
    if (s == "skeleton") return MetricMode::Skeleton;
    throw InvalidArgument("metric mode must be strict or skeleton: " + s);
}

int shd(const Graph& g, const Graph& ref) {
    require_dag(g, "learned graph");
    require_dag(ref, "reference graph");
    const auto m = align(g, ref);
    int d = 0;
    const int n = static_cast<int>(g.size());
    for (int x = 0; x < n; ++x) {
        for (int y = x + 1; y < n; ++y) {
            const int rx = m[static_cast<std::size_t>(x)], ry = m[static_cast<std::size_t>(y)];
            if (g.has_directed(x, y) != ref.has_directed(rx, ry) || g.has_directed(y, x) != ref.has_directed(ry, rx)) ++d;
        }
    }
    return d;
}

ConfusionCounts confusion(const Graph& g, const Graph& ref, MetricMode mode) {
    require_dag(g, "learned graph");
    require_dag(ref, "reference graph");
    const auto m = align(g, ref);
    ConfusionCounts c;
    const int n = static_cast<int>(g.size());
    c.i = n * (n - 1) / 2;
    c.a = static_cast<int>(ref.num_directed());
    int learned = 0;
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            if (!g.has_directed(x, y)) continue;
            ++learned;
            const int rx = m[static_cast<std::size_t>(x)], ry = m[static_cast<std::size_t>(y)];
            if (ref.has_directed(rx, ry)) {
                ++c.tp;
            } else if (ref.has_directed(ry, rx)) {
                if (mode == MetricMode::Skeleton) {
                    ++c.tp;
                } else {
                    ++c.reversed;
                }
            }
        }
    }
    c.fp = learned - c.tp;
    c.fn = c.a - c.tp;
    c.tn = c.i - c.fp;
    return c;
}

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

double f1(const ConfusionCounts& c) {
    const double p = precision(c), r = recall(c);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double bsf(const ConfusionCounts& c) {
    if (c.a <= 0) throw InvalidArgument("BSF is undefined for an empty reference graph");
    if (c.i <= 0) throw InvalidArgument("BSF needs at least two nodes");
    const double a = c.a, i = c.i;
    return 0.5 * (c.tp / a + c.tn / i - c.fp / i - c.fn / a);
}

MetricReport evaluate(const Graph& g, const Graph& ref, MetricMode mode, std::string graph_name,
                      std::string reference_name) {
    MetricReport r;
    r.graph = std::move(graph_name);
    r.reference = std::move(reference_name);
    r.mode = mode;
    r.counts = confusion(g, ref, mode);
    r.shd = shd(g, ref);
    if (mode == MetricMode::Skeleton) {
        // Reversals cost nothing on skeletons.
        const auto m = align(g, ref);
        for (auto [x, y] : g.directed_edges()) {
            if (ref.has_directed(m[static_cast<std::size_t>(y)], m[static_cast<std::size_t>(x)])) --r.shd;
        }
    }
    r.precision = precision(r.counts);
    r.recall = recall(r.counts);
    r.f1 = f1(r.counts);
    r.bsf = bsf(r.counts);
    return r;
}

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "graph,reference,mode,shd,tp,fp,fn,tn,reversed,a,i,precision,recall,f1,bsf\n";
    for (const auto& r : reports) {
        const auto& c = r.counts;
        out << r.graph << ',' << r.reference << ',' << to_string(r.mode) << ',' << r.shd << ',' << c.tp << ','
            << c.fp << ',' << c.fn << ',' << c.tn << ',' << c.reversed << ',' << c.a << ',' << c.i << ','
            << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.bsf << '\n';
    }
}

nlohmann::json to_json(const MetricReport& r) {
    const auto& c = r.counts;
    return {{"graph", r.graph},
            {"reference", r.reference},
            {"mode", to_string(r.mode)},
            {"shd", r.shd},
            {"tp", c.tp},
            {"fp", c.fp},
            {"fn", c.fn},
            {"tn", c.tn},
            {"reversed", c.reversed},
            {"a", c.a},
            {"i", c.i},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"bsf", r.bsf}};
}

const char* to_string(AgreementStatus s) {
    switch (s) {
        case AgreementStatus::Match: return "match";
        case AgreementStatus::Reversed: return "reversed";
        case AgreementStatus::Absent: return "absent";
    }
    return "?";
}

int AgreementTable::matches(std::size_t graph) const {
    int k = 0;
    for (const auto& r : rows) k += r.status.at(graph) == AgreementStatus::Match ? 1 : 0;
    return k;
}

int AgreementTable::reversed(std::size_t graph) const {
    int k = 0;
    for (const auto& r : rows) k += r.status.at(graph) == AgreementStatus::Reversed ? 1 : 0;
    return k;
}

int AgreementTable::agreeing(std::size_t graph) const { return matches(graph) + reversed(graph); }

AgreementTable agreement_table(const std::vector<std::pair<std::string, Graph>>& graphs, const KnowledgeGraph& ref,
                               Tier level) {
    AgreementTable t;
    for (const auto& [name, g] : graphs) {
        require_dag(g, "compared graph");
        align(g, ref.base());
        t.graph_names.push_back(name);
    }
    for (const auto& e : ref.edges_up_to(level)) {
        AgreementRow row{e.from, e.to, {}, 0};
        for (const auto& [name, g] : graphs) {
            const int a = g.index_of(e.from), b = g.index_of(e.to);
            auto s = AgreementStatus::Absent;
            if (g.has_directed(a, b)) {
                s = AgreementStatus::Match;
            } else if (g.has_directed(b, a)) {
                s = AgreementStatus::Reversed;
            }
            if (s != AgreementStatus::Absent) ++row.agreeing;
            row.status.push_back(s);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_agreement_csv(const AgreementTable& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "from,to";
    for (const auto& n : t.graph_names) out << ',' << n;
    out << ",agreeing\n";
    for (const auto& r : t.rows) {
        out << r.from << ',' << r.to;
        for (auto s : r.status) out << ',' << to_string(s);
        out << ',' << r.agreeing << '\n';
    }
}

nlohmann::json to_json(const AgreementTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json status = nlohmann::json::array();
        for (auto s : r.status) status.push_back(to_string(s));
        rows.push_back({{"from", r.from}, {"to", r.to}, {"status", status}, {"agreeing", r.agreeing}});
    }
    nlohmann::json totals = nlohmann::json::array();
    for (std::size_t g = 0; g < t.graph_names.size(); ++g) {
        totals.push_back({{"graph", t.graph_names[g]},
                          {"match", t.matches(g)},
                          {"reversed", t.reversed(g)},
                          {"agreeing", t.agreeing(g)},
                          {"of", t.rows.size()}});
    }
    return {{"graphs", t.graph_names}, {"rows", rows}, {"totals", totals}};
}

}  // namespace cbnkit
