#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

#include "learn_internal.hpp"

namespace cbnkit::detail {

namespace {

enum Op { kAdd = 0, kDelete = 1, kReverse = 2 };

struct Move {
    Op op = kAdd;
    int from = -1;
    int to = -1;
    double gain = 0.0;
};

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::vector<int> name_order(const Graph& g) { return g.canonical_order(); }

LearnResult score_search(const Dataset& data, const LearnConfig& config, const SearchOptions& options,
                         const Deadline& deadline) {
    const int n = static_cast<int>(data.n_vars());
    const auto un = static_cast<std::size_t>(n);
    Graph g(data.names());
    BicScorer scorer(data);
    const auto order = name_order(g);

    // Per-edge hashes keyed by names so the tabu fingerprint ignores column order.
    std::vector<std::uint64_t> edge_hash(un * un);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            edge_hash[static_cast<std::size_t>(a) * un + static_cast<std::size_t>(b)] =
                mix(std::hash<std::string>{}(g.name(a) + '\x1f' + g.name(b)));
        }
    }
    auto eh = [&](int a, int b) { return edge_hash[static_cast<std::size_t>(a) * un + static_cast<std::size_t>(b)]; };

    std::vector<std::vector<int>> parents(un);
    std::vector<double> local(un);
    for (int v = 0; v < n; ++v) local[static_cast<std::size_t>(v)] = scorer.family(v, {}).bic();
    auto family = [&](int child, std::vector<int> pa) { return scorer.family(child, pa).bic(); };
    auto with = [](std::vector<int> pa, int x) {
        pa.push_back(x);
        return pa;
    };
    auto without = [](std::vector<int> pa, int x) {
        pa.erase(std::find(pa.begin(), pa.end(), x));
        return pa;
    };
    auto indegree_ok = [&](int v) {
        return !config.max_indegree || static_cast<int>(parents[static_cast<std::size_t>(v)].size()) < *config.max_indegree;
    };
    auto allowed = [&](int from, int to) {
        return options.allowed.empty() || options.allowed[static_cast<std::size_t>(from) * un + static_cast<std::size_t>(to)];
    };

    double current = 0.0;
    for (double l : local) current += l;
    std::uint64_t fingerprint = 0;
    std::deque<std::uint64_t> tabu_list;
    if (options.tabu) tabu_list.push_back(fingerprint);
    auto is_tabu = [&](std::uint64_t f) {
        return options.tabu && std::find(tabu_list.begin(), tabu_list.end(), f) != tabu_list.end();
    };

    LearnResult result;
    result.algorithm = options.tabu ? Algorithm::TABU : Algorithm::HC;
    result.score_trace.push_back({0, current});
    Graph best = g;
    double best_score = current;
    int worsening = 0;
    int iteration = 0;

    while (true) {
        if (deadline.expired()) {
            result.timed_out = true;
            break;
        }
        std::optional<Move> chosen;
        auto consider = [&](Op op, int from, int to, double gain, std::uint64_t next_fp) {
            if (is_tabu(next_fp)) return;
            // Moves are visited in (op, from name, to name) order; a later move
            // must beat the incumbent by more than rounding noise.
            const double tol = 1e-9 * std::max(1.0, std::abs(gain));
            if (!chosen || gain > chosen->gain + tol) chosen = Move{op, from, to, gain};
        };
        for (int from : order) {
            for (int to : order) {
                if (from == to || g.adjacent(from, to) || !allowed(from, to) || !indegree_ok(to)) continue;
                if (has_directed_path(g, to, from)) continue;
                const auto& pa = parents[static_cast<std::size_t>(to)];
                const double gain = family(to, with(pa, from)) - local[static_cast<std::size_t>(to)];
                consider(kAdd, from, to, gain, fingerprint ^ eh(from, to));
            }
        }
        for (int from : order) {
            for (int to : order) {
                if (from == to || !g.has_directed(from, to)) continue;
                const auto& pa = parents[static_cast<std::size_t>(to)];
                const double gain = family(to, without(pa, from)) - local[static_cast<std::size_t>(to)];
                consider(kDelete, from, to, gain, fingerprint ^ eh(from, to));
            }
        }
        for (int from : order) {
            for (int to : order) {
                if (from == to || !g.has_directed(from, to) || !allowed(to, from) || !indegree_ok(from)) continue;
                g.remove_edge(from, to);
                const bool cyclic = has_directed_path(g, from, to);
                g.add_directed(from, to);
                if (cyclic) continue;
                const auto& pt = parents[static_cast<std::size_t>(to)];
                const auto& pf = parents[static_cast<std::size_t>(from)];
                const double gain = family(to, without(pt, from)) - local[static_cast<std::size_t>(to)] +
                                    family(from, with(pf, to)) - local[static_cast<std::size_t>(from)];
                consider(kReverse, from, to, gain, fingerprint ^ eh(from, to) ^ eh(to, from));
            }
        }
        if (!chosen) break;
        const double eps = 1e-10 * std::max(1.0, std::abs(current));
        const bool improving = chosen->gain > eps;
        if (!improving && (!options.tabu || worsening >= config.tabu_max_worsening)) break;

        const int a = chosen->from, b = chosen->to;
        auto& pa = parents[static_cast<std::size_t>(a)];
        auto& pb = parents[static_cast<std::size_t>(b)];
        switch (chosen->op) {
            case kAdd:
                g.add_directed(a, b);
                pb.push_back(a);
                fingerprint ^= eh(a, b);
                break;
            case kDelete:
                g.remove_edge(a, b);
                pb = without(pb, a);
                fingerprint ^= eh(a, b);
                break;
            case kReverse:
                g.set_directed(b, a);
                pb = without(pb, a);
                pa.push_back(b);
                fingerprint ^= eh(a, b) ^ eh(b, a);
                local[static_cast<std::size_t>(a)] = family(a, pa);
                break;
        }
        local[static_cast<std::size_t>(b)] = family(b, pb);
        current = 0.0;
        for (double l : local) current += l;
        ++iteration;
        result.score_trace.push_back({iteration, current});
        if (options.tabu) {
            tabu_list.push_back(fingerprint);
            while (static_cast<int>(tabu_list.size()) > config.tabu_length) tabu_list.pop_front();
        }
        if (current > best_score + eps) {
            best = g;
            best_score = current;
            worsening = 0;
        } else {
            ++worsening;
        }
    }

    result.graph = options.tabu ? best : g;
    result.graph_kind = GraphKind::Dag;
    result.test_count = scorer.evaluations();
    return result;
}

}  // namespace cbnkit::detail
