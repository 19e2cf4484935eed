#include "cbnkit/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "cbnkit/errors.hpp"

namespace cbnkit {

double chi_square_sf(double statistic, double dof) {
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

namespace {

void check_ci_args(const Dataset& data, int x, int y, std::span<const int> z) {
    const auto n = static_cast<int>(data.n_vars());
    if (x < 0 || y < 0 || x >= n || y >= n) throw DataError("CI test: variable index out of range");
    if (x == y) throw InvalidArgument("CI test: x and y must differ");
    for (int v : z) {
        if (v == x || v == y) throw InvalidArgument("CI test: conditioning set contains x or y");
        if (v < 0 || v >= n) throw DataError("CI test: variable index out of range");
    }
}

/// G^2 statistic over the table counted with scope [x, y, z...].
double g2_statistic(const ContingencyTable& t) {
    const auto rx = static_cast<std::size_t>(t.cardinalities[0]);
    const auto ry = static_cast<std::size_t>(t.cardinalities[1]);
    const std::size_t block = rx * ry;
    const std::size_t nz = t.size() / block;
    std::vector<double> nx(rx), ny(ry);
    double g2 = 0.0;
    for (std::size_t k = 0; k < nz; ++k) {
        const auto* cell = &t.counts[k * block];
        std::fill(nx.begin(), nx.end(), 0.0);
        std::fill(ny.begin(), ny.end(), 0.0);
        double nk = 0.0;
        for (std::size_t j = 0; j < ry; ++j) {
            for (std::size_t i = 0; i < rx; ++i) {
                const auto c = static_cast<double>(cell[j * rx + i]);
                nx[i] += c;
                ny[j] += c;
                nk += c;
            }
        }
        if (nk == 0.0) continue;
        for (std::size_t j = 0; j < ry; ++j) {
            for (std::size_t i = 0; i < rx; ++i) {
                const auto c = static_cast<double>(cell[j * rx + i]);
                if (c > 0.0) g2 += c * std::log(c * nk / (nx[i] * ny[j]));
            }
        }
    }
    return std::max(0.0, 2.0 * g2);
}

std::vector<int> ci_scope(int x, int y, std::span<const int> z) {
    std::vector<int> scope{x, y};
    scope.insert(scope.end(), z.begin(), z.end());
    return scope;
}

}  // namespace

CiTestResult g2_test(const Dataset& data, int x, int y, std::span<const int> z, const CiOptions& options) {
    check_ci_args(data, x, y, z);
    CiTestResult r;
    long long dof = static_cast<long long>(data.cardinality(static_cast<std::size_t>(x)) - 1) *
                    (data.cardinality(static_cast<std::size_t>(y)) - 1);
    for (int v : z) dof *= data.cardinality(static_cast<std::size_t>(v));
    r.dof = static_cast<int>(std::max<long long>(dof, 1));
    if (options.min_count_guard && static_cast<double>(data.n_rows()) < 5.0 * r.dof) {
        r.p_value = 1.0;
        r.independent = true;
        return r;
    }
    r.statistic = g2_statistic(count(data, ci_scope(x, y, z)));
    r.p_value = chi_square_sf(r.statistic, r.dof);
    r.independent = r.p_value > options.alpha;
    return r;
}

double mutual_information(const Dataset& data, int x, int y, std::span<const int> z) {
    check_ci_args(data, x, y, z);
    const auto table = count(data, ci_scope(x, y, z));
    return g2_statistic(table) / (2.0 * static_cast<double>(data.n_rows()));
}

CiTester::CiTester(const Dataset& data, CiOptions options) : data_(data), options_(options) {
    if (!(options_.alpha > 0.0 && options_.alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

CiTestResult CiTester::test(int x, int y, std::span<const int> z) {
    std::vector<int> key{std::min(x, y), std::max(x, y)};
    std::vector<int> sorted_z(z.begin(), z.end());
    std::sort(sorted_z.begin(), sorted_z.end());
    key.insert(key.end(), sorted_z.begin(), sorted_z.end());
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    // Canonical argument order keeps the statistic bit-identical for (x,y) and (y,x).
    auto r = g2_test(data_, key[0], key[1], sorted_z, options_);
    std::lock_guard lock(mutex_);
    cache_[std::move(key)] = r;
    return r;
}

std::size_t CiTester::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::size_t CiTester::cache_hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

BicScorer::BicScorer(const Dataset& data) : data_(data) {
    if (data_.n_rows() == 0) throw DataError("BIC on an empty dataset");
}

FamilyScore BicScorer::compute(int child, std::span<const int> parents) const {
    std::vector<int> scope{child};
    scope.insert(scope.end(), parents.begin(), parents.end());
    const auto table = count(data_, scope);
    const auto r = static_cast<std::size_t>(table.cardinalities[0]);
    const std::size_t q = table.size() / r;
    FamilyScore s;
    for (std::size_t j = 0; j < q; ++j) {
        double nj = 0.0;
        for (std::size_t k = 0; k < r; ++k) nj += static_cast<double>(table.counts[j * r + k]);
        if (nj == 0.0) continue;
        for (std::size_t k = 0; k < r; ++k) {
            const auto c = static_cast<double>(table.counts[j * r + k]);
            if (c > 0.0) s.log_likelihood += c * std::log(c / nj);
        }
    }
    s.penalty = 0.5 * std::log(static_cast<double>(data_.n_rows())) * static_cast<double>(r - 1) *
                static_cast<double>(q);
    return s;
}

FamilyScore BicScorer::family(int child, std::span<const int> parents) {
    std::vector<int> key{child};
    std::vector<int> sorted(parents.begin(), parents.end());
    std::sort(sorted.begin(), sorted.end());
    key.insert(key.end(), sorted.begin(), sorted.end());
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto s = compute(child, sorted);
    std::lock_guard lock(mutex_);
    ++evaluations_;
    cache_[std::move(key)] = s;
    return s;
}

ScoreValue BicScorer::score(const Graph& dag) {
    if (dag.num_undirected() != 0 || !is_acyclic(dag)) throw GraphError("BIC requires a DAG");
    const auto cols = column_map(data_, dag);
    ScoreValue total;
    for (int v = 0; v < static_cast<int>(dag.size()); ++v) {
        std::vector<int> parents;
        for (int p : dag.parents(v)) parents.push_back(cols[static_cast<std::size_t>(p)]);
        const auto f = family(cols[static_cast<std::size_t>(v)], parents);
        total.log_likelihood += f.log_likelihood;
        total.penalty += f.penalty;
    }
    total.bic = total.log_likelihood - total.penalty;
    return total;
}

std::size_t BicScorer::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::size_t BicScorer::evaluations() const {
    std::lock_guard lock(mutex_);
    return evaluations_;
}

ScoreValue bic_score(const Dataset& data, const Graph& dag) {
    BicScorer scorer(data);
    return scorer.score(dag);
}

std::vector<int> column_map(const Dataset& data, const Graph& g) {
    std::vector<int> cols;
    cols.reserve(g.size());
    for (const auto& n : g.nodes()) cols.push_back(data.index_of(n));
    return cols;
}

}  // namespace cbnkit
