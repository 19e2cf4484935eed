#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cbnkit/learn.hpp"
#include "cbnkit/stats.hpp"

namespace cbnkit::detail {

class Deadline {
public:
    explicit Deadline(std::chrono::milliseconds limit)
        : start_(std::chrono::steady_clock::now()), limit_(limit) {}
    bool expired() const { return std::chrono::steady_clock::now() - start_ >= limit_; }
    std::chrono::duration<double> elapsed() const { return std::chrono::steady_clock::now() - start_; }

private:
    std::chrono::steady_clock::time_point start_;
    std::chrono::milliseconds limit_;
};

struct TimedOut {};

struct SearchOptions {
    /// n*n matrix; allowed[from * n + to] != 0 when from -> to may be added.
    std::vector<char> allowed;
    bool tabu = false;
};

/// HC (tabu = false) or TABU over DAGs on the dataset's columns.
LearnResult score_search(const Dataset& data, const LearnConfig& config, const SearchOptions& options,
                         const Deadline& deadline);

/// Node indices of `g` in name order, and the inverse (rank of each node).
std::vector<int> name_order(const Graph& g);

using SepsetMap = std::map<std::pair<int, int>, std::vector<int>>;

inline std::pair<int, int> pair_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

/// Calls f(subset) for every size-k subset of items in lexicographic order of
/// positions; stops early and returns true when f returns true.
template <typename F>
bool for_each_subset(const std::vector<int>& items, std::size_t k, F&& f) {
    if (k > items.size()) return false;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    std::vector<int> subset(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) subset[i] = items[idx[i]];
        if (f(std::span<const int>(subset))) return true;
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == items.size() - k + (i - 1)) --i;
        if (i == 0) return false;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

/// Orients colliders x -> z <- y for non-adjacent x, y with a recorded sepset
/// not containing z, then applies the Meek rules. Pairs without a sepset are
/// left alone. Conflicting orientations keep the first and are reported.
GraphKind orient_from_sepsets(Graph& g, const SepsetMap& sepsets, std::vector<std::string>& conflicts);

LearnResult run_pc_stable(const Dataset& data, const LearnConfig& config, const Deadline& deadline);
/// GS, IAMB or fast-IAMB per config.algorithm.
LearnResult run_mb_learner(const Dataset& data, const LearnConfig& config, const Deadline& deadline);
std::vector<std::vector<int>> run_blankets(const Dataset& data, const LearnConfig& config, const Deadline& deadline,
                                           std::size_t* tests);
Graph run_mmpc(const Dataset& data, const LearnConfig& config, const Deadline& deadline, std::size_t* tests,
               bool* timed_out);

}  // namespace cbnkit::detail
