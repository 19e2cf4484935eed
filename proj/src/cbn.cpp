#include "cbnkit/cbn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"

namespace cbnkit {

namespace {

std::vector<std::size_t> strides_of(const std::vector<int>& cards) {
    std::vector<std::size_t> s(cards.size(), 1);
    for (std::size_t i = 1; i < cards.size(); ++i) s[i] = s[i - 1] * static_cast<std::size_t>(cards[i - 1]);
    return s;
}

std::size_t position(const Factor& f, int var) {
    auto it = std::find(f.scope.begin(), f.scope.end(), var);
    if (it == f.scope.end()) throw InvalidArgument("variable not in factor scope");
    return static_cast<std::size_t>(it - f.scope.begin());
}

std::size_t rows_of(const Cbn& net, const std::vector<int>& parents) {
    std::size_t q = 1;
    for (int p : parents) q *= static_cast<std::size_t>(net.cardinality(p));
    return q;
}

void check_node(const Cbn& net, int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= net.size()) throw InvalidArgument("node index out of range");
}

void check_assignment(const Cbn& net, const Assignment& a) {
    for (auto [v, s] : a) {
        check_node(net, v);
        if (s < 0 || s >= net.cardinality(v)) {
            throw InvalidArgument("state " + std::to_string(s) + " out of range for " + net.name(v));
        }
    }
}

/// Eliminates everything but `target` from `factors` after reducing by
/// `evidence`, returning the normalised distribution over the target.
std::vector<double> eliminate(std::vector<Factor> factors, int target, int target_card, const Assignment& evidence) {
    for (auto& f : factors) {
        for (auto [v, s] : evidence) {
            if (std::find(f.scope.begin(), f.scope.end(), v) != f.scope.end()) f = reduce(f, v, s);
        }
    }
    std::set<int> hidden;
    for (const auto& f : factors) {
        for (int v : f.scope) {
            if (v != target) hidden.insert(v);
        }
    }
    while (!hidden.empty()) {
        // Min-degree: fewest distinct neighbours in the current factor set.
        int best = -1;
        std::size_t best_degree = 0;
        for (int v : hidden) {
            std::set<int> nb;
            for (const auto& f : factors) {
                if (std::find(f.scope.begin(), f.scope.end(), v) == f.scope.end()) continue;
                nb.insert(f.scope.begin(), f.scope.end());
            }
            if (best < 0 || nb.size() < best_degree) {
                best = v;
                best_degree = nb.size();
            }
        }
        Factor prod{{}, {}, {1.0}};
        std::vector<Factor> rest;
        for (auto& f : factors) {
            if (std::find(f.scope.begin(), f.scope.end(), best) != f.scope.end()) {
                prod = multiply(prod, f);
            } else {
                rest.push_back(std::move(f));
            }
        }
        rest.push_back(sum_out(prod, best));
        factors = std::move(rest);
        hidden.erase(best);
    }
    std::vector<double> out(static_cast<std::size_t>(target_card), 1.0);
    for (const auto& f : factors) {
        if (f.scope.empty()) {
            for (auto& o : out) o *= f.values[0];
        } else {
            for (std::size_t k = 0; k < out.size(); ++k) out[k] *= f.values[k];
        }
    }
    const double z = std::accumulate(out.begin(), out.end(), 0.0);
    if (!(z > 0.0)) throw ZeroProbabilityEvidence("evidence has probability zero");
    for (auto& o : out) o /= z;
    return out;
}

/// Target, evidence nodes and their ancestors: everything else is barren.
std::vector<int> relevant_nodes(const Cbn& net, int target, const Assignment& evidence) {
    std::vector<int> roots{target};
    for (auto [v, s] : evidence) roots.push_back(v);
    auto anc = ancestors(net.dag(), roots);
    anc.insert(anc.end(), roots.begin(), roots.end());
    std::sort(anc.begin(), anc.end());
    anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
    return anc;
}

}  // namespace

Factor multiply(const Factor& a, const Factor& b) {
    Factor out;
    out.scope = a.scope;
    out.cards = a.cards;
    for (std::size_t i = 0; i < b.scope.size(); ++i) {
        if (std::find(a.scope.begin(), a.scope.end(), b.scope[i]) == a.scope.end()) {
            out.scope.push_back(b.scope[i]);
            out.cards.push_back(b.cards[i]);
        }
    }
    const auto sa = strides_of(a.cards), sb = strides_of(b.cards);
    std::vector<std::size_t> stride_a(out.scope.size(), 0), stride_b(out.scope.size(), 0);
    std::size_t size = 1;
    for (std::size_t l = 0; l < out.scope.size(); ++l) {
        for (std::size_t i = 0; i < a.scope.size(); ++i) {
            if (a.scope[i] == out.scope[l]) stride_a[l] = sa[i];
        }
        for (std::size_t i = 0; i < b.scope.size(); ++i) {
            if (b.scope[i] == out.scope[l]) stride_b[l] = sb[i];
        }
        size *= static_cast<std::size_t>(out.cards[l]);
    }
    out.values.resize(size);
    std::vector<int> assign(out.scope.size(), 0);
    std::size_t j = 0, k = 0;
    for (std::size_t i = 0; i < size; ++i) {
        out.values[i] = a.values[j] * b.values[k];
        for (std::size_t l = 0; l < assign.size(); ++l) {
            if (++assign[l] == out.cards[l]) {
                assign[l] = 0;
                j -= static_cast<std::size_t>(out.cards[l] - 1) * stride_a[l];
                k -= static_cast<std::size_t>(out.cards[l] - 1) * stride_b[l];
            } else {
                j += stride_a[l];
                k += stride_b[l];
                break;
            }
        }
    }
    return out;
}

Factor sum_out(const Factor& f, int var) {
    const auto p = position(f, var);
    const auto s = strides_of(f.cards)[p];
    const auto c = static_cast<std::size_t>(f.cards[p]);
    Factor out;
    out.scope = f.scope;
    out.cards = f.cards;
    out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(p));
    out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
    out.values.assign(f.values.size() / c, 0.0);
    for (std::size_t idx = 0; idx < f.values.size(); ++idx) out.values[idx % s + (idx / (s * c)) * s] += f.values[idx];
    return out;
}

Factor reduce(const Factor& f, int var, int state) {
    const auto p = position(f, var);
    const auto s = strides_of(f.cards)[p];
    const auto c = static_cast<std::size_t>(f.cards[p]);
    if (state < 0 || static_cast<std::size_t>(state) >= c) throw InvalidArgument("state out of range in reduce");
    Factor out;
    out.scope = f.scope;
    out.cards = f.cards;
    out.scope.erase(out.scope.begin() + static_cast<std::ptrdiff_t>(p));
    out.cards.erase(out.cards.begin() + static_cast<std::ptrdiff_t>(p));
    out.values.reserve(f.values.size() / c);
    for (std::size_t idx = 0; idx < f.values.size(); ++idx) {
        if ((idx / s) % c == static_cast<std::size_t>(state)) out.values.push_back(f.values[idx]);
    }
    return out;
}

Cbn::Cbn(Graph dag, std::vector<VariableSpec> variables, std::vector<Cpt> cpts)
    : dag_(std::move(dag)), variables_(std::move(variables)), cpts_(std::move(cpts)) {
    if (!is_dag(dag_)) throw GraphError("a causal network needs a DAG");
    if (variables_.size() != dag_.size() || cpts_.size() != dag_.size()) {
        throw InvalidArgument("one variable and one CPT per node required");
    }
    for (std::size_t v = 0; v < dag_.size(); ++v) {
        if (variables_[v].name != dag_.nodes()[v]) throw InvalidArgument("variable order must follow the DAG nodes");
        variables_[v].validate();
    }
    for (std::size_t v = 0; v < cpts_.size(); ++v) {
        auto& c = cpts_[v];
        if (c.child != static_cast<int>(v)) throw InvalidArgument("CPT " + std::to_string(v) + " has the wrong child");
        if (c.parents != dag_.parents(c.child)) throw InvalidArgument("CPT parents of " + name(c.child) + " differ from the DAG");
        const auto r = static_cast<std::size_t>(cardinality(c.child));
        const auto q = rows_of(*this, c.parents);
        if (c.table.size() != q * r) throw InvalidArgument("CPT of " + name(c.child) + " has the wrong size");
        for (std::size_t j = 0; j < q; ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < r; ++k) {
                const double p = c.table[j * r + k];
                if (!(p >= 0.0) || p > 1.0) throw InvalidArgument("CPT of " + name(c.child) + " has an invalid entry");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("CPT row of " + name(c.child) + " does not sum to 1");
        }
    }
}

int Cbn::index_of(std::string_view n) const {
    auto idx = dag_.find(n);
    if (!idx) throw InvalidArgument("unknown variable: " + std::string(n));
    return *idx;
}

int Cbn::state_of(int v, std::string_view label) const {
    auto s = variables_.at(static_cast<std::size_t>(v)).state_index(label);
    if (!s) throw InvalidArgument("unknown state '" + std::string(label) + "' for " + name(v));
    return *s;
}

Factor Cbn::factor(int v) const {
    const auto& c = cpt(v);
    Factor f;
    f.scope.push_back(v);
    f.cards.push_back(cardinality(v));
    for (int p : c.parents) {
        f.scope.push_back(p);
        f.cards.push_back(cardinality(p));
    }
    f.values = c.table;
    return f;
}

Cbn fit_cpts(const Graph& dag, const Dataset& data, double pseudo_count) {
    if (!(pseudo_count >= 0.0)) throw InvalidArgument("pseudo count must be non-negative");
    std::vector<int> column(dag.size());
    std::vector<VariableSpec> vars;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        column[v] = data.index_of(dag.nodes()[v]);
        vars.push_back(data.variable(static_cast<std::size_t>(column[v])));
    }
    std::vector<Cpt> cpts;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        Cpt c{static_cast<int>(v), dag.parents(static_cast<int>(v)), {}};
        std::vector<int> scope{column[v]};
        for (int p : c.parents) scope.push_back(column[static_cast<std::size_t>(p)]);
        const auto t = count(data, scope);
        const auto r = static_cast<std::size_t>(data.cardinality(static_cast<std::size_t>(column[v])));
        c.table.resize(t.size());
        for (std::size_t j = 0; j < t.size() / r; ++j) {
            double nj = 0.0;
            for (std::size_t k = 0; k < r; ++k) nj += static_cast<double>(t.counts[j * r + k]);
            const double denom = nj + pseudo_count * static_cast<double>(r);
            for (std::size_t k = 0; k < r; ++k) {
                c.table[j * r + k] = denom > 0.0 ? (static_cast<double>(t.counts[j * r + k]) + pseudo_count) / denom
                                                 : 1.0 / static_cast<double>(r);
            }
        }
        cpts.push_back(std::move(c));
    }
    return Cbn(dag, std::move(vars), std::move(cpts));
}

Assignment resolve(const Cbn& net, const NamedAssignment& named) {
    Assignment a;
    for (const auto& [var, state] : named) {
        const int v = net.index_of(var);
        a[v] = net.state_of(v, state);
    }
    return a;
}

std::vector<double> posterior(const Cbn& net, int target, const Assignment& evidence) {
    check_node(net, target);
    check_assignment(net, evidence);
    if (evidence.count(target)) throw InvalidArgument("target " + net.name(target) + " is also evidence");
    std::vector<Factor> factors;
    for (int v : relevant_nodes(net, target, evidence)) factors.push_back(net.factor(v));
    return eliminate(std::move(factors), target, net.cardinality(target), evidence);
}

void validate(const Cbn& net, const InterventionQuery& q) {
    check_node(net, q.target);
    check_assignment(net, q.do_assignments);
    check_assignment(net, q.evidence);
    if (q.do_assignments.count(q.target) || q.evidence.count(q.target)) {
        throw InvalidArgument("target " + net.name(q.target) + " cannot be intervened on or observed");
    }
    for (auto [v, s] : q.do_assignments) {
        if (q.evidence.count(v)) throw InvalidArgument(net.name(v) + " is both intervened on and observed");
    }
}

Cbn mutilate(const Cbn& net, const Assignment& do_assignments) {
    check_assignment(net, do_assignments);
    std::vector<int> xs;
    for (auto [v, s] : do_assignments) xs.push_back(v);
    Graph g = remove_incoming(net.dag(), xs);
    auto cpts = net.cpts();
    for (auto [v, s] : do_assignments) {
        auto& c = cpts[static_cast<std::size_t>(v)];
        c.parents.clear();
        c.table.assign(static_cast<std::size_t>(net.cardinality(v)), 0.0);
        c.table[static_cast<std::size_t>(s)] = 1.0;
    }
    return Cbn(std::move(g), net.variables(), std::move(cpts));
}

std::vector<double> intervene(const Cbn& net, const InterventionQuery& q) {
    validate(net, q);
    if (q.do_assignments.empty()) return posterior(net, q.target, q.evidence);
    auto evidence = q.evidence;
    evidence.insert(q.do_assignments.begin(), q.do_assignments.end());
    return posterior(mutilate(net, q.do_assignments), q.target, evidence);
}

double ace(const Cbn& net, int target, int target_state, int x, int x1, int x0) {
    check_node(net, target);
    if (target_state < 0 || target_state >= net.cardinality(target)) throw InvalidArgument("target state out of range");
    if (x1 == x0) throw InvalidArgument("ACE needs two different treatment states");
    const auto p1 = intervene(net, {target, {{x, x1}}, {}});
    const auto p0 = intervene(net, {target, {{x, x0}}, {}});
    return p1[static_cast<std::size_t>(target_state)] - p0[static_cast<std::size_t>(target_state)];
}

bool docalc_rule_applies(const Graph& dag, int rule, std::span<const int> x, std::span<const int> y,
                         std::span<const int> z, std::span<const int> w) {
    if (!is_dag(dag)) throw GraphError("do-calculus needs a DAG");
    std::vector<int> given(x.begin(), x.end());
    given.insert(given.end(), w.begin(), w.end());
    const Graph g_bar_x = remove_incoming(dag, x);
    switch (rule) {
        case 1: return d_separated(g_bar_x, y, z, given);
        case 2: return d_separated(remove_outgoing(g_bar_x, z), y, z, given);
        case 3: {
            const auto anc_w = ancestors(g_bar_x, w);
            std::vector<int> z_w;
            for (int v : z) {
                if (std::find(anc_w.begin(), anc_w.end(), v) == anc_w.end()) z_w.push_back(v);
            }
            return d_separated(remove_incoming(g_bar_x, z_w), y, z, given);
        }
        default: throw InvalidArgument("do-calculus rule must be 1, 2 or 3");
    }
}

DeltaReport intervention_delta_report(const Cbn& net, int target, int target_state,
                                      const std::vector<int>& intervene_vars, bool include_matrix) {
    check_node(net, target);
    if (target_state < 0 || target_state >= net.cardinality(target)) throw InvalidArgument("target state out of range");
    DeltaReport r;
    r.target = net.name(target);
    r.target_state = net.variables()[static_cast<std::size_t>(target)].states[static_cast<std::size_t>(target_state)];
    r.baseline = posterior(net, target)[static_cast<std::size_t>(target_state)];
    const auto n = static_cast<int>(net.size());
    std::vector<std::vector<double>> marginal;
    if (include_matrix) {
        for (int o = 0; o < n; ++o) marginal.push_back(posterior(net, o));
    }
    for (int v : intervene_vars) {
        check_node(net, v);
        if (v == target) throw InvalidArgument("cannot intervene on the target");
        const auto& spec = net.variables()[static_cast<std::size_t>(v)];
        for (int s = 0; s < spec.cardinality(); ++s) {
            const auto p = intervene(net, {target, {{v, s}}, {}})[static_cast<std::size_t>(target_state)];
            r.entries.push_back({spec.name, spec.states[static_cast<std::size_t>(s)], r.baseline, p, 100.0 * (p - r.baseline)});
            if (!include_matrix) continue;
            for (int o = 0; o < n; ++o) {
                if (o == v) continue;
                const auto po = intervene(net, {o, {{v, s}}, {}});
                const auto& ospec = net.variables()[static_cast<std::size_t>(o)];
                for (int k = 0; k < ospec.cardinality(); ++k) {
                    const auto ki = static_cast<std::size_t>(k);
                    r.matrix.push_back({spec.name, spec.states[static_cast<std::size_t>(s)], ospec.name,
                                        ospec.states[ki], 100.0 * (po[ki] - marginal[static_cast<std::size_t>(o)][ki])});
                }
            }
        }
    }
    return r;
}

SensitivityReport sensitivity(const Cbn& net, int target, int target_state, double epsilon) {
    check_node(net, target);
    if (target_state < 0 || target_state >= net.cardinality(target)) throw InvalidArgument("target state out of range");
    if (!(epsilon > 0.0) || epsilon >= 0.5) throw InvalidArgument("epsilon must lie in (0, 0.5)");
    SensitivityReport rep;
    rep.target = net.name(target);
    rep.target_state = net.variables()[static_cast<std::size_t>(target)].states[static_cast<std::size_t>(target_state)];
    rep.epsilon = epsilon;

    const auto relevant = relevant_nodes(net, target, {});
    std::vector<Factor> factors;
    for (int v : relevant) factors.push_back(net.factor(v));
    const auto ts = static_cast<std::size_t>(target_state);
    const int tc = net.cardinality(target);

    for (int v = 0; v < static_cast<int>(net.size()); ++v) {
        const auto& c = net.cpt(v);
        const auto r = static_cast<std::size_t>(net.cardinality(v));
        const auto& states = net.variables()[static_cast<std::size_t>(v)].states;
        auto it = std::find(relevant.begin(), relevant.end(), v);
        NodeSensitivity node{net.name(v), 0.0, it != relevant.end()};
        const auto slot = static_cast<std::size_t>(it - relevant.begin());
        for (std::size_t idx = 0; idx < c.table.size(); ++idx) {
            const double theta = c.table[idx];
            double d = 0.0;
            if (node.ancestor) {
                const std::size_t row = idx / r;
                auto eval = [&](double value) {
                    auto& vals = factors[slot].values;
                    const double rest = 1.0 - theta;
                    for (std::size_t k = 0; k < r; ++k) {
                        const auto cell = row * r + k;
                        if (cell == idx) {
                            vals[cell] = value;
                        } else if (rest > 0.0) {
                            vals[cell] = c.table[cell] * (1.0 - value) / rest;
                        } else {
                            vals[cell] = (1.0 - value) / static_cast<double>(r - 1);
                        }
                    }
                    const double p = eliminate(factors, target, tc, {})[ts];
                    std::copy(c.table.begin() + static_cast<std::ptrdiff_t>(row * r),
                              c.table.begin() + static_cast<std::ptrdiff_t>((row + 1) * r),
                              vals.begin() + static_cast<std::ptrdiff_t>(row * r));
                    return p;
                };
                const double hi = std::min(1.0, theta + epsilon), lo = std::max(0.0, theta - epsilon);
                d = (eval(hi) - eval(lo)) / (hi - lo);
            }
            rep.entries.push_back({net.name(v), static_cast<int>(idx / r), states[idx % r], theta, d});
            node.max_abs_derivative = std::max(node.max_abs_derivative, std::abs(d));
        }
        rep.ranking.push_back(std::move(node));
    }
    std::stable_sort(rep.ranking.begin(), rep.ranking.end(), [](const auto& a, const auto& b) {
        if (a.max_abs_derivative != b.max_abs_derivative) return a.max_abs_derivative > b.max_abs_derivative;
        return a.node < b.node;
    });
    return rep;
}

CvReport cross_validate(const Graph& dag, const Dataset& data, const std::string& target, int folds,
                        std::uint64_t seed, double pseudo_count) {
    if (folds < 2) throw InvalidArgument("cross-validation needs at least two folds");
    if (static_cast<std::size_t>(folds) > data.n_rows()) throw InvalidArgument("more folds than rows");
    if (!is_dag(dag)) throw GraphError("cross-validation needs a DAG");
    auto t_idx = dag.find(target);
    if (!t_idx) throw InvalidArgument("target not in the graph: " + target);
    const int t = *t_idx;
    std::vector<int> column(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v) column[v] = data.index_of(dag.nodes()[v]);
    const auto& tcol = data.column(static_cast<std::size_t>(column[static_cast<std::size_t>(t)]));
    const int tc = data.cardinality(static_cast<std::size_t>(column[static_cast<std::size_t>(t)]));

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(tc));
    for (std::size_t row = 0; row < data.n_rows(); ++row) by_class[tcol[row]].push_back(row);
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(data.n_rows());
    std::size_t next = 0;
    for (auto& rows : by_class) {
        std::shuffle(rows.begin(), rows.end(), rng);
        for (auto row : rows) fold_of[row] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
    }

    CvReport rep;
    rep.target = target;
    rep.folds = folds;
    rep.seed = seed;
    std::size_t majority = 0;
    for (const auto& rows : by_class) majority = std::max(majority, rows.size());
    rep.majority_rate = static_cast<double>(majority) / static_cast<double>(data.n_rows());

    std::vector<int> family{t};
    for (int c : dag.children(t)) family.push_back(c);
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t row = 0; row < data.n_rows(); ++row) (fold_of[row] == f ? test : train).push_back(row);
        const Cbn net = fit_cpts(dag, data.select_rows(train), pseudo_count);
        std::size_t correct = 0;
        std::vector<double> score(static_cast<std::size_t>(tc));
        for (auto row : test) {
            for (int s = 0; s < tc; ++s) {
                double p = 1.0;
                for (int m : family) {
                    const auto& cpt = net.cpt(m);
                    std::size_t j = 0, stride = 1;
                    for (int par : cpt.parents) {
                        const int state = par == t ? s : data.at(row, static_cast<std::size_t>(column[static_cast<std::size_t>(par)]));
                        j += static_cast<std::size_t>(state) * stride;
                        stride *= static_cast<std::size_t>(net.cardinality(par));
                    }
                    const int ms = m == t ? s : data.at(row, static_cast<std::size_t>(column[static_cast<std::size_t>(m)]));
                    p *= cpt.table[j * static_cast<std::size_t>(net.cardinality(m)) + static_cast<std::size_t>(ms)];
                }
                score[static_cast<std::size_t>(s)] = p;
            }
            const auto pred = std::max_element(score.begin(), score.end()) - score.begin();
            if (pred == tcol[row]) ++correct;
        }
        rep.fold_size.push_back(test.size());
        rep.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
    }
    rep.mean_accuracy = std::accumulate(rep.fold_accuracy.begin(), rep.fold_accuracy.end(), 0.0) / folds;
    return rep;
}

nlohmann::json to_json(const Cbn& net) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : net.variables()) vars.push_back({{"name", v.name}, {"states", v.states}});
    nlohmann::json cpts = nlohmann::json::array();
    for (const auto& c : net.cpts()) {
        std::vector<std::string> parents;
        for (int p : c.parents) parents.push_back(net.name(p));
        const auto r = static_cast<std::size_t>(net.cardinality(c.child));
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t j = 0; j < c.table.size() / r; ++j) {
            rows.push_back(std::vector<double>(c.table.begin() + static_cast<std::ptrdiff_t>(j * r),
                                               c.table.begin() + static_cast<std::ptrdiff_t>((j + 1) * r)));
        }
        cpts.push_back({{"node", net.name(c.child)}, {"parents", parents}, {"rows", rows}});
    }
    return {{"schema_version", kCbnSchemaVersion}, {"variables", vars}, {"graph", graph_to_json(net.dag())}, {"cpts", cpts}};
}

Cbn cbn_from_json(const nlohmann::json& j) {
    try {
        Graph g = graph_from_json(j.at("graph"));
        std::vector<VariableSpec> vars(g.size());
        for (const auto& v : j.at("variables")) {
            const int idx = g.index_of(v.at("name").get<std::string>());
            vars[static_cast<std::size_t>(idx)] = {v.at("name").get<std::string>(), v.at("states").get<std::vector<std::string>>(), {}};
        }
        std::vector<Cpt> cpts(g.size());
        for (const auto& c : j.at("cpts")) {
            const int child = g.index_of(c.at("node").get<std::string>());
            Cpt cpt{child, {}, {}};
            for (const auto& p : c.at("parents")) cpt.parents.push_back(g.index_of(p.get<std::string>()));
            for (const auto& row : c.at("rows")) {
                for (const auto& x : row) cpt.table.push_back(x.get<double>());
            }
            cpts[static_cast<std::size_t>(child)] = std::move(cpt);
        }
        return Cbn(std::move(g), std::move(vars), std::move(cpts));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network JSON: ") + e.what());
    }
}

void save_cbn(const Cbn& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << to_json(net).dump(2) << '\n';
}

Cbn load_cbn(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return cbn_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

nlohmann::json to_json(const DeltaReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"variable", e.variable},
                           {"state", e.state},
                           {"baseline", e.baseline},
                           {"intervened", e.intervened},
                           {"delta_pp", e.delta_pp}});
    }
    nlohmann::json matrix = nlohmann::json::array();
    for (const auto& m : r.matrix) {
        matrix.push_back({{"variable", m.variable},
                          {"state", m.state},
                          {"other", m.other},
                          {"other_state", m.other_state},
                          {"delta_pp", m.delta_pp}});
    }
    return {{"schema_version", kCbnSchemaVersion},
            {"target", r.target},
            {"target_state", r.target_state},
            {"baseline", r.baseline},
            {"entries", entries},
            {"matrix", matrix}};
}

nlohmann::json to_json(const SensitivityReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"node", e.node}, {"row", e.row}, {"state", e.state}, {"theta", e.theta}, {"derivative", e.derivative}});
    }
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& n : r.ranking) {
        ranking.push_back({{"node", n.node}, {"max_abs_derivative", n.max_abs_derivative}, {"ancestor", n.ancestor}});
    }
    return {{"schema_version", kCbnSchemaVersion},
            {"target", r.target},
            {"target_state", r.target_state},
            {"epsilon", r.epsilon},
            {"entries", entries},
            {"ranking", ranking}};
}

nlohmann::json to_json(const CvReport& r) {
    return {{"schema_version", kCbnSchemaVersion},
            {"target", r.target},
            {"folds", r.folds},
            {"seed", r.seed},
            {"fold_accuracy", r.fold_accuracy},
            {"fold_size", r.fold_size},
            {"mean_accuracy", r.mean_accuracy},
            {"majority_rate", r.majority_rate}};
}

void write_delta_csv(const DeltaReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "variable,state,target,target_state,baseline,intervened,delta_pp\n";
    for (const auto& e : r.entries) {
        out << e.variable << ',' << e.state << ',' << r.target << ',' << r.target_state << ',' << e.baseline << ','
            << e.intervened << ',' << e.delta_pp << '\n';
    }
}

void write_effect_matrix_csv(const DeltaReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "variable,state,other,other_state,delta_pp\n";
    for (const auto& m : r.matrix) {
        out << m.variable << ',' << m.state << ',' << m.other << ',' << m.other_state << ',' << m.delta_pp << '\n';
    }
}

void write_sensitivity_csv(const SensitivityReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "node,row,state,theta,derivative\n";
    for (const auto& e : r.entries) {
        out << e.node << ',' << e.row << ',' << e.state << ',' << e.theta << ',' << e.derivative << '\n';
    }
}

}  // namespace cbnkit
