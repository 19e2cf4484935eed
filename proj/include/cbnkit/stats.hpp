#pragma once

#include <cstddef>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "cbnkit/data.hpp"
#include "cbnkit/graph.hpp"

namespace cbnkit {

struct CiTestResult {
    double statistic = 0.0;  // G^2
    int dof = 1;
    double p_value = 1.0;
    bool independent = true;
};

/// Upper tail of the chi-square distribution, P(X >= statistic).
double chi_square_sf(double statistic, double dof);

struct CiOptions {
    double alpha = 0.05;
    /// Declare independence when the table has fewer than 5 observations per
    /// degree of freedom.
    bool min_count_guard = true;
};

/// G^2 likelihood-ratio test of x _||_ y | z. Zero cells contribute nothing;
/// dof = (|x|-1)(|y|-1) prod |z| with no reduction for structural zeros.
CiTestResult g2_test(const Dataset& data, int x, int y, std::span<const int> z, const CiOptions& options = {});

/// Empirical conditional mutual information in nats; equals G^2 / (2N).
double mutual_information(const Dataset& data, int x, int y, std::span<const int> z);

struct VectorHash {
    std::size_t operator()(const std::vector<int>& v) const noexcept {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (int x : v) {
            h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

/// Memoising CI tester shared by the constraint-based learners. Results are
/// keyed on the unordered pair and the sorted conditioning set; concurrent
/// callers may race on insertion, and identical values make that harmless.
class CiTester {
public:
    CiTester(const Dataset& data, CiOptions options);

    CiTestResult test(int x, int y, std::span<const int> z);
    double alpha() const { return options_.alpha; }
    const Dataset& data() const { return data_; }

    std::size_t calls() const;
    std::size_t cache_hits() const;

private:
    const Dataset& data_;
    CiOptions options_;
    mutable std::mutex mutex_;
    std::unordered_map<std::vector<int>, CiTestResult, VectorHash> cache_;
    std::size_t calls_ = 0;
    std::size_t hits_ = 0;
};

struct ScoreValue {
    double log_likelihood = 0.0;
    double penalty = 0.0;
    double bic = 0.0;
};

struct FamilyScore {
    double log_likelihood = 0.0;
    double penalty = 0.0;
    double bic() const { return log_likelihood - penalty; }
};

/// Decomposable BIC with per-family memoisation:
///   LL = sum N_ijk ln(N_ijk / N_ij),  penalty = (ln N / 2) (r_i - 1) q_i.
class BicScorer {
public:
    explicit BicScorer(const Dataset& data);

    /// Local score of `child` given `parents` (dataset column indices).
    FamilyScore family(int child, std::span<const int> parents);
    /// Whole-graph score; graph nodes are matched to dataset columns by name.
    ScoreValue score(const Graph& dag);

    const Dataset& data() const { return data_; }
    std::size_t cache_size() const;
    std::size_t evaluations() const;

private:
    FamilyScore compute(int child, std::span<const int> parents) const;

    const Dataset& data_;
    mutable std::mutex mutex_;
    std::unordered_map<std::vector<int>, FamilyScore, VectorHash> cache_;
    std::size_t evaluations_ = 0;
};

ScoreValue bic_score(const Dataset& data, const Graph& dag);

/// Dataset column index of every graph node (by name); throws on unknown nodes.
std::vector<int> column_map(const Dataset& data, const Graph& g);

}  // namespace cbnkit
