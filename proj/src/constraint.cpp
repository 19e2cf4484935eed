#include <algorithm>
#include <set>

#include "cbnkit/errors.hpp"
#include "learn_internal.hpp"

namespace cbnkit::detail {

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::vector<int> erase_copy(std::vector<int> v, int x) {
    v.erase(std::remove(v.begin(), v.end(), x), v.end());
    return v;
}

/// Sorts node indices by their position in the name order.
void sort_by_rank(std::vector<int>& v, const std::vector<int>& rank) {
    std::sort(v.begin(), v.end(), [&](int a, int b) { return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]; });
}

std::vector<int> ranks_of(const std::vector<int>& order) {
    std::vector<int> rank(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    return rank;
}

std::size_t max_subset_size(const LearnConfig& config, std::size_t available) {
    if (!config.max_condition_size) return available;
    return std::min(available, static_cast<std::size_t>(*config.max_condition_size));
}

class Tester {
public:
    Tester(const Dataset& data, const LearnConfig& config, const Deadline& deadline)
        : ci_(data, CiOptions{config.alpha, config.min_count_guard}), deadline_(deadline),
          n_(static_cast<double>(data.n_rows())) {}

    CiTestResult test(int x, int y, std::span<const int> z) {
        if (deadline_.expired()) throw TimedOut{};
        return ci_.test(x, y, z);
    }
    bool independent(int x, int y, std::span<const int> z) { return test(x, y, z).independent; }
    /// Empirical conditional mutual information from the cached statistic.
    double association(const CiTestResult& r) const { return r.statistic / (2.0 * n_); }
    std::size_t calls() const { return ci_.calls(); }

private:
    CiTester ci_;
    const Deadline& deadline_;
    double n_;
};

/// Searches subsets of `pool` (sizes 0..cap) for one separating x and y.
std::optional<std::vector<int>> find_sepset(Tester& t, int x, int y, const std::vector<int>& pool, std::size_t cap) {
    std::optional<std::vector<int>> found;
    for (std::size_t k = 0; k <= cap && !found; ++k) {
        for_each_subset(pool, k, [&](std::span<const int> s) {
            if (t.independent(x, y, s)) {
                found = std::vector<int>(s.begin(), s.end());
                return true;
            }
            return false;
        });
    }
    return found;
}

void shrink(Tester& t, int target, std::vector<int>& mb) {
    for (int x : std::vector<int>(mb)) {
        const auto rest = erase_copy(mb, x);
        if (t.independent(target, x, rest)) mb = rest;
    }
}

std::vector<int> grow_shrink(Tester& t, int target, const std::vector<int>& order) {
    std::vector<int> mb;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int x : order) {
            if (x == target || contains(mb, x)) continue;
            if (!t.independent(target, x, mb)) {
                mb.push_back(x);
                changed = true;
            }
        }
    }
    shrink(t, target, mb);
    return mb;
}

std::vector<int> iamb_blanket(Tester& t, int target, const std::vector<int>& order) {
    std::vector<int> mb;
    while (true) {
        int best = -1;
        double best_assoc = -1.0;
        bool best_dependent = false;
        for (int x : order) {
            if (x == target || contains(mb, x)) continue;
            const auto r = t.test(target, x, mb);
            const double a = t.association(r);
            if (a > best_assoc) {
                best = x;
                best_assoc = a;
                best_dependent = !r.independent;
            }
        }
        if (best < 0 || !best_dependent) break;
        mb.push_back(best);
    }
    shrink(t, target, mb);
    return mb;
}

std::vector<int> fast_iamb_blanket(Tester& t, int target, const std::vector<int>& order) {
    std::vector<int> mb;
    std::set<std::vector<int>> seen;
    while (true) {
        std::vector<std::pair<double, int>> dependent;
        for (int x : order) {
            if (x == target || contains(mb, x)) continue;
            const auto r = t.test(target, x, mb);
            if (!r.independent) dependent.emplace_back(t.association(r), x);
        }
        if (dependent.empty()) break;
        std::stable_sort(dependent.begin(), dependent.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& d : dependent) mb.push_back(d.second);
        shrink(t, target, mb);
        auto key = mb;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) break;
    }
    return mb;
}

std::vector<std::vector<int>> blankets(Tester& t, const Dataset& data, const LearnConfig& config,
                                       const std::vector<int>& order, const std::vector<int>& rank) {
    std::vector<std::vector<int>> mbs(data.n_vars());
    for (int v : order) {
        auto& mb = mbs[static_cast<std::size_t>(v)];
        switch (config.algorithm) {
            case Algorithm::GS: mb = grow_shrink(t, v, order); break;
            case Algorithm::IAMB: mb = iamb_blanket(t, v, order); break;
            case Algorithm::FastIAMB: mb = fast_iamb_blanket(t, v, order); break;
            default: throw InvalidArgument("Markov blanket estimation needs GS, IAMB or fast-IAMB");
        }
        sort_by_rank(mb, rank);
    }
    return mbs;
}

std::vector<std::vector<int>> symmetrise(const std::vector<std::vector<int>>& sets, SymmetryRule rule,
                                         const std::vector<int>& rank) {
    std::vector<std::vector<int>> out(sets.size());
    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = 0; b < sets.size(); ++b) {
            if (a == b) continue;
            const bool ab = contains(sets[a], static_cast<int>(b));
            const bool ba = contains(sets[b], static_cast<int>(a));
            if (rule == SymmetryRule::And ? (ab && ba) : (ab || ba)) out[a].push_back(static_cast<int>(b));
        }
        sort_by_rank(out[a], rank);
    }
    return out;
}

LearnResult finish(Graph g, GraphKind kind, std::vector<std::string> conflicts, std::size_t tests, Algorithm a,
                   bool timed_out, const Deadline& deadline) {
    LearnResult r;
    r.algorithm = a;
    r.graph = std::move(g);
    r.graph_kind = kind;
    r.conflicts = std::move(conflicts);
    r.test_count = tests;
    r.timed_out = timed_out;
    r.elapsed = deadline.elapsed();
    return r;
}

}  // namespace

GraphKind orient_from_sepsets(Graph& g, const SepsetMap& sepsets, std::vector<std::string>& conflicts) {
    const Graph skel = g;
    const auto order = skel.canonical_order();
    auto orient = [&](int a, int b) {
        if (g.has_directed(a, b)) return;
        if (g.has_undirected(a, b)) {
            g.set_directed(a, b);
            return;
        }
        conflicts.push_back(g.name(a) + "->" + g.name(b) + " conflicts with " + g.name(b) + "->" + g.name(a));
    };
    for (int z : order) {
        std::vector<int> nb;
        for (int v : order) {
            if (skel.adjacent(z, v)) nb.push_back(v);
        }
        for (std::size_t i = 0; i < nb.size(); ++i) {
            for (std::size_t j = i + 1; j < nb.size(); ++j) {
                const int x = nb[i], y = nb[j];
                if (skel.adjacent(x, y)) continue;
                auto it = sepsets.find(pair_key(x, y));
                if (it == sepsets.end() || contains(it->second, z)) continue;
                orient(x, z);
                orient(y, z);
            }
        }
    }
    apply_meek_rules(g);
    return conflicts.empty() ? GraphKind::Cpdag : GraphKind::Pdag;
}

LearnResult run_pc_stable(const Dataset& data, const LearnConfig& config, const Deadline& deadline) {
    Graph g(data.names());
    const auto order = g.canonical_order();
    const auto rank = ranks_of(order);
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = i + 1; j < order.size(); ++j) g.add_undirected(order[i], order[j]);
    }
    Tester t(data, config, deadline);
    SepsetMap sepsets;
    bool timed_out = false;
    try {
        for (std::size_t level = 0;; ++level) {
            if (config.max_condition_size && level > static_cast<std::size_t>(*config.max_condition_size)) break;
            // Adjacency sets are frozen for the whole level.
            std::vector<std::vector<int>> snapshot(g.size());
            for (int v : order) {
                auto& s = snapshot[static_cast<std::size_t>(v)];
                s = g.adjacents(v);
                sort_by_rank(s, rank);
            }
            bool any = false;
            for (int x : order) {
                for (int y : snapshot[static_cast<std::size_t>(x)]) {
                    if (!g.adjacent(x, y)) continue;
                    const auto pool = erase_copy(snapshot[static_cast<std::size_t>(x)], y);
                    if (pool.size() < level) continue;
                    any = true;
                    for_each_subset(pool, level, [&](std::span<const int> s) {
                        if (!t.independent(x, y, s)) return false;
                        g.remove_edge(x, y);
                        sepsets[pair_key(x, y)] = std::vector<int>(s.begin(), s.end());
                        return true;
                    });
                }
            }
            if (!any) break;
        }
    } catch (const TimedOut&) {
        timed_out = true;
    }
    std::vector<std::string> conflicts;
    const auto kind = orient_from_sepsets(g, sepsets, conflicts);
    return finish(std::move(g), kind, std::move(conflicts), t.calls(), Algorithm::PcStable, timed_out, deadline);
}

std::vector<std::vector<int>> run_blankets(const Dataset& data, const LearnConfig& config, const Deadline& deadline,
                                           std::size_t* tests) {
    const Graph names(data.names());
    const auto order = names.canonical_order();
    const auto rank = ranks_of(order);
    Tester t(data, config, deadline);
    auto mbs = blankets(t, data, config, order, rank);
    if (tests) *tests = t.calls();
    return mbs;
}

LearnResult run_mb_learner(const Dataset& data, const LearnConfig& config, const Deadline& deadline) {
    Graph g(data.names());
    const auto order = g.canonical_order();
    const auto rank = ranks_of(order);
    Tester t(data, config, deadline);
    SepsetMap sepsets;
    bool timed_out = false;
    try {
        const auto mbs = symmetrise(blankets(t, data, config, order, rank), config.symmetry, rank);
        for (std::size_t i = 0; i < order.size(); ++i) {
            for (std::size_t j = i + 1; j < order.size(); ++j) {
                const int x = order[i], y = order[j];
                const auto& mx = mbs[static_cast<std::size_t>(x)];
                const auto& my = mbs[static_cast<std::size_t>(y)];
                if (!contains(mx, y)) continue;
                auto px = erase_copy(mx, y);
                auto py = erase_copy(my, x);
                const auto& pool = py.size() < px.size() ? py : px;
                auto sep = find_sepset(t, x, y, pool, max_subset_size(config, pool.size()));
                if (sep) {
                    sepsets[pair_key(x, y)] = *sep;
                } else {
                    g.add_undirected(x, y);
                }
            }
        }
    } catch (const TimedOut&) {
        timed_out = true;
    }
    std::vector<std::string> conflicts;
    const auto kind = orient_from_sepsets(g, sepsets, conflicts);
    return finish(std::move(g), kind, std::move(conflicts), t.calls(), config.algorithm, timed_out, deadline);
}

Graph run_mmpc(const Dataset& data, const LearnConfig& config, const Deadline& deadline, std::size_t* tests,
               bool* timed_out) {
    Graph g(data.names());
    const auto order = g.canonical_order();
    const auto rank = ranks_of(order);
    Tester t(data, config, deadline);
    std::vector<std::vector<int>> pc(order.size());
    try {
        for (int target : order) {
            std::vector<int> cpc;
            std::set<int> excluded;
            while (true) {
                int best = -1;
                double best_assoc = 0.0;
                for (int x : order) {
                    if (x == target || contains(cpc, x) || excluded.count(x)) continue;
                    // Minimum association of x with target over subsets of the current CPC.
                    double min_assoc = -1.0;
                    const std::size_t cap = max_subset_size(config, cpc.size());
                    bool separated = false;
                    for (std::size_t k = 0; k <= cap && !separated; ++k) {
                        separated = for_each_subset(cpc, k, [&](std::span<const int> s) {
                            const auto r = t.test(target, x, s);
                            if (r.independent) return true;
                            const double a = t.association(r);
                            if (min_assoc < 0.0 || a < min_assoc) min_assoc = a;
                            return false;
                        });
                    }
                    if (separated) {
                        excluded.insert(x);
                        continue;
                    }
                    if (min_assoc > best_assoc) {
                        best = x;
                        best_assoc = min_assoc;
                    }
                }
                if (best < 0) break;
                cpc.push_back(best);
                sort_by_rank(cpc, rank);
            }
            for (int x : std::vector<int>(cpc)) {
                const auto rest = erase_copy(cpc, x);
                if (find_sepset(t, target, x, rest, max_subset_size(config, rest.size()))) cpc = rest;
            }
            pc[static_cast<std::size_t>(target)] = cpc;
        }
    } catch (const TimedOut&) {
        if (timed_out) *timed_out = true;
    }
    const auto sym = symmetrise(pc, config.symmetry, rank);
    for (std::size_t a = 0; a < sym.size(); ++a) {
        for (int b : sym[a]) {
            if (!g.adjacent(static_cast<int>(a), b)) g.add_undirected(static_cast<int>(a), b);
        }
    }
    if (tests) *tests = t.calls();
    return g;
}

}  // namespace cbnkit::detail
