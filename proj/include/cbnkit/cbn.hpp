#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbnkit/data.hpp"
#include "cbnkit/graph.hpp"
#include "json.hpp"

namespace cbnkit {

inline constexpr const char* kCbnSchemaVersion = "1.0";

/// P(child | parents). Rows are parent configurations with the first parent
/// varying fastest; inside a row the child state varies fastest, so entry
/// (j, k) lives at table[j * r + k].
struct Cpt {
    int child = -1;
    std::vector<int> parents;
    std::vector<double> table;
};

/// Dense table over `scope`, first variable varying fastest.
struct Factor {
    std::vector<int> scope;
    std::vector<int> cards;
    std::vector<double> values;
};

Factor multiply(const Factor& a, const Factor& b);
Factor sum_out(const Factor& f, int var);
Factor reduce(const Factor& f, int var, int state);

/// Causal Bayesian network: DAG plus one CPT per node, parents in DAG index order.
class Cbn {
public:
    Cbn() = default;
    /// `variables[i]` describes dag node i (names must match). Throws
    /// GraphError / InvalidArgument when the DAG, parents or rows are invalid.
    Cbn(Graph dag, std::vector<VariableSpec> variables, std::vector<Cpt> cpts);

    const Graph& dag() const { return dag_; }
    std::size_t size() const { return dag_.size(); }
    const std::vector<VariableSpec>& variables() const { return variables_; }
    const std::string& name(int v) const { return dag_.name(v); }
    int cardinality(int v) const { return variables_[static_cast<std::size_t>(v)].cardinality(); }
    const Cpt& cpt(int v) const { return cpts_[static_cast<std::size_t>(v)]; }
    const std::vector<Cpt>& cpts() const { return cpts_; }

    /// Throws InvalidArgument for unknown names or labels.
    int index_of(std::string_view name) const;
    int state_of(int v, std::string_view label) const;

    Factor factor(int v) const;

private:
    Graph dag_;
    std::vector<VariableSpec> variables_;
    std::vector<Cpt> cpts_;
};

/// (N_ijk + pseudo_count) / (N_ij + pseudo_count * r_i); unseen rows with
/// pseudo_count = 0 become uniform.
Cbn fit_cpts(const Graph& dag, const Dataset& data, double pseudo_count = 1.0);

using Assignment = std::map<int, int>;
using NamedAssignment = std::map<std::string, std::string>;

Assignment resolve(const Cbn& net, const NamedAssignment& named);

/// Exact P(target | evidence) by variable elimination (barren nodes pruned,
/// min-degree order). Throws ZeroProbabilityEvidence.
std::vector<double> posterior(const Cbn& net, int target, const Assignment& evidence = {});

struct InterventionQuery {
    int target = -1;
    Assignment do_assignments;
    Assignment evidence;
};

/// Throws InvalidArgument when do and evidence keys overlap or include the target.
void validate(const Cbn& net, const InterventionQuery& q);

/// Network with each intervened node's parents cut and its CPT a point mass.
Cbn mutilate(const Cbn& net, const Assignment& do_assignments);

/// P(target | do(...), evidence) in the mutilated network.
std::vector<double> intervene(const Cbn& net, const InterventionQuery& q);

/// P(target = s | do(x = x1)) - P(target = s | do(x = x0)).
double ace(const Cbn& net, int target, int target_state, int x, int x1, int x0);

/// Do-calculus rule applicability as d-separation of Y and Z given X u W in
/// the rule's mutilated graph. Rule 1: G_{bar X}; rule 2: G_{bar X, underline Z};
/// rule 3: G_{bar X, bar Z(W)} with Z(W) the Z-nodes that are not ancestors of
/// any W-node in G_{bar X}.
bool docalc_rule_applies(const Graph& dag, int rule, std::span<const int> x, std::span<const int> y,
                         std::span<const int> z, std::span<const int> w);

struct DeltaEntry {
    std::string variable;
    std::string state;
    double baseline = 0.0;     // P(target = positive)
    double intervened = 0.0;   // P(target = positive | do(variable = state))
    double delta_pp = 0.0;     // 100 * (intervened - baseline)
};

struct EffectEntry {
    std::string variable;  // intervened
    std::string state;
    std::string other;     // observed variable
    std::string other_state;
    double delta_pp = 0.0;
};

struct DeltaReport {
    std::string target;
    std::string target_state;
    double baseline = 0.0;
    std::vector<DeltaEntry> entries;
    /// Change of every other variable's marginal under each intervention.
    std::vector<EffectEntry> matrix;
};

DeltaReport intervention_delta_report(const Cbn& net, int target, int target_state,
                                      const std::vector<int>& intervene_vars, bool include_matrix = true);

struct SensitivityEntry {
    std::string node;
    int row = 0;
    std::string state;
    double theta = 0.0;
    double derivative = 0.0;
};

struct NodeSensitivity {
    std::string node;
    double max_abs_derivative = 0.0;
    bool ancestor = false;  // target itself or one of its ancestors
};

struct SensitivityReport {
    std::string target;
    std::string target_state;
    double epsilon = 0.0;
    std::vector<SensitivityEntry> entries;
    /// Descending by max |derivative|, ties by name.
    std::vector<NodeSensitivity> ranking;
};

/// dP(target = s) / dtheta for every CPT entry by central differences with
/// proportional co-normalisation of the rest of the row. Nodes that are not
/// the target or its ancestors are reported as exactly zero.
SensitivityReport sensitivity(const Cbn& net, int target, int target_state, double epsilon = 1e-4);

struct CvReport {
    std::string target;
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<double> fold_accuracy;
    std::vector<std::size_t> fold_size;
    double mean_accuracy = 0.0;
    /// Share of the most frequent target state in the whole dataset.
    double majority_rate = 0.0;
};

/// Stratified k-fold CV: fit on the training folds, predict the target as the
/// argmax (lowest state on ties) of its posterior given every other DAG node.
CvReport cross_validate(const Graph& dag, const Dataset& data, const std::string& target, int folds,
                        std::uint64_t seed, double pseudo_count = 1.0);

nlohmann::json to_json(const Cbn& net);
Cbn cbn_from_json(const nlohmann::json& j);
void save_cbn(const Cbn& net, const std::filesystem::path& path);
Cbn load_cbn(const std::filesystem::path& path);

nlohmann::json to_json(const DeltaReport& r);
nlohmann::json to_json(const SensitivityReport& r);
nlohmann::json to_json(const CvReport& r);
void write_delta_csv(const DeltaReport& r, const std::filesystem::path& path);
void write_effect_matrix_csv(const DeltaReport& r, const std::filesystem::path& path);
void write_sensitivity_csv(const SensitivityReport& r, const std::filesystem::path& path);

}  // namespace cbnkit
