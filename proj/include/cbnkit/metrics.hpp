#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cbnkit/graph.hpp"
#include "cbnkit/knowledge.hpp"
#include "json.hpp"

namespace cbnkit {

/// Strict: a reversed edge is neither TP nor TN and counts as one FP and one FN.
/// Skeleton: orientation is ignored throughout.
enum class MetricMode { Strict, Skeleton };
const char* to_string(MetricMode m);
MetricMode parse_metric_mode(const std::string& s);

struct ConfusionCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    int tn = 0;
    int reversed = 0;
    int a = 0;  // edges in the reference
    int i = 0;  // |V|(|V|-1)/2
};

/// Edit count: one per added, deleted or reversed edge. Both graphs must be
/// DAGs over the same node names (matched by name).
int shd(const Graph& g, const Graph& ref);

ConfusionCounts confusion(const Graph& g, const Graph& ref, MetricMode mode = MetricMode::Strict);

/// 0/0 -> 0.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);
/// 0.5 (TP/a + TN/i - FP/i - FN/a); throws InvalidArgument when a = 0.
double bsf(const ConfusionCounts& c);

struct MetricReport {
    std::string graph;
    std::string reference;
    MetricMode mode = MetricMode::Strict;
    int shd = 0;
    ConfusionCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double bsf = 0.0;
};

MetricReport evaluate(const Graph& g, const Graph& ref, MetricMode mode = MetricMode::Strict,
                      std::string graph_name = {}, std::string reference_name = {});

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path);
nlohmann::json to_json(const MetricReport& r);

enum class AgreementStatus { Match, Reversed, Absent };
const char* to_string(AgreementStatus s);

struct AgreementRow {
    std::string from;
    std::string to;
    std::vector<AgreementStatus> status;  // one per graph
    int agreeing = 0;                     // graphs with match or reversed
};

struct AgreementTable {
    std::vector<std::string> graph_names;
    std::vector<AgreementRow> rows;

    int matches(std::size_t graph) const;
    int reversed(std::size_t graph) const;
    /// Match + reversed.
    int agreeing(std::size_t graph) const;
};

/// Rows are the reference edges of tier <= level in file order.
AgreementTable agreement_table(const std::vector<std::pair<std::string, Graph>>& graphs, const KnowledgeGraph& ref,
                               Tier level = Tier::High);

void write_agreement_csv(const AgreementTable& t, const std::filesystem::path& path);
nlohmann::json to_json(const AgreementTable& t);

}  // namespace cbnkit
