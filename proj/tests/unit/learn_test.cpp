#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cbnkit/errors.hpp"
#include "cbnkit/learn.hpp"
#include "cbnkit/stats.hpp"
#include "support/oracles.hpp"

using namespace cbnkit;

namespace {

LearnConfig cfg(Algorithm a) {
    LearnConfig c;
    c.algorithm = a;
    return c;
}

const Dataset& benchmark_data() {
    static const Dataset d = oracle::sample(oracle::benchmark_network(), 10000, 77);
    return d;
}

/// Fraction of true skeleton pairs present (by name) in g.
double skeleton_recall(const Graph& truth, const Graph& g) {
    std::size_t hit = 0, total = 0;
    for (auto [a, b] : truth.directed_edges()) {
        ++total;
        if (g.adjacent(g.index_of(truth.name(a)), g.index_of(truth.name(b)))) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

/// Pairs whose mark differs between two graphs over the same names.
int pattern_distance(const Graph& a, const Graph& b) {
    int d = 0;
    const int n = static_cast<int>(a.size());
    for (int x = 0; x < n; ++x) {
        for (int y = x + 1; y < n; ++y) {
            const int bx = b.index_of(a.name(x)), by = b.index_of(a.name(y));
            const bool same = a.has_directed(x, y) == b.has_directed(bx, by) &&
                              a.has_directed(y, x) == b.has_directed(by, bx) &&
                              a.has_undirected(x, y) == b.has_undirected(bx, by);
            if (!same) ++d;
        }
    }
    return d;
}

}  // namespace

TEST(LearnConfig, ValidationAndJsonRoundTrip) {
    LearnConfig c;
    c.alpha = 1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.alpha = 0.01;
    c.tabu_length = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c.tabu_length = 5;
    c.max_indegree = 3;
    c.algorithm = Algorithm::FastIAMB;
    c.symmetry = SymmetryRule::Or;
    auto back = learn_config_from_json(to_json(c));
    EXPECT_EQ(back.algorithm, Algorithm::FastIAMB);
    EXPECT_EQ(back.alpha, 0.01);
    EXPECT_EQ(back.tabu_length, 5);
    EXPECT_EQ(back.max_indegree, 3);
    EXPECT_EQ(back.symmetry, SymmetryRule::Or);
    EXPECT_THROW(learn_config_from_json(nlohmann::json{{"time_limit_seconds", 0}}), InvalidArgument);
}

TEST(LearnConfig, AlgorithmNames) {
    EXPECT_EQ(parse_algorithm("PC_Stable"), Algorithm::PcStable);
    EXPECT_EQ(parse_algorithm("pcstable"), Algorithm::PcStable);
    EXPECT_EQ(parse_algorithm("Fast-IAMB"), Algorithm::FastIAMB);
    EXPECT_EQ(parse_algorithm("TABU"), Algorithm::TABU);
    EXPECT_THROW(parse_algorithm("fges"), InvalidArgument);
    for (auto a : all_algorithms()) EXPECT_EQ(parse_algorithm(to_string(a)), a);
}

TEST(HillClimb, TwoNodeStrongDependenceMatchesExhaustiveScores) {
    Graph truth({"A", "B"});
    truth.add_directed("A", "B");
    auto net = oracle::strong_network(truth, {2, 3}, 2.0, 1);
    auto data = oracle::sample(net, 10000, 2);
    auto r = hill_climb(data, cfg(Algorithm::HC));
    EXPECT_EQ(r.graph.num_edges(), 1u);

    Graph empty(data.names()), ab(data.names()), ba(data.names());
    ab.add_directed("A", "B");
    ba.add_directed("B", "A");
    const double best = std::max({bic_score(data, empty).bic, bic_score(data, ab).bic, bic_score(data, ba).bic});
    EXPECT_NEAR(bic_score(data, r.graph).bic, best, 1e-9 * std::abs(best));
    EXPECT_GE(bic_score(data, r.graph).bic, bic_score(data, empty).bic);
}

TEST(Learners, IndependentNoiseGivesEmptyGraph) {
    auto data = oracle::independent_columns(5, 5000, 21);
    for (auto a : all_algorithms()) {
        auto r = learn(data, cfg(a));
        EXPECT_EQ(r.graph.num_edges(), 0u) << to_string(a);
        EXPECT_FALSE(r.timed_out);
    }
}

TEST(Learners, SingleVariableGivesEmptyGraph) {
    auto data = oracle::independent_columns(1, 200, 3);
    for (auto a : all_algorithms()) {
        auto r = learn(data, cfg(a));
        EXPECT_EQ(r.graph.size(), 1u);
        EXPECT_EQ(r.graph.num_edges(), 0u) << to_string(a);
    }
}

TEST(HillClimb, TraceStrictlyIncreasing) {
    auto r = hill_climb(benchmark_data(), cfg(Algorithm::HC));
    ASSERT_GE(r.score_trace.size(), 2u);
    for (std::size_t i = 1; i < r.score_trace.size(); ++i) {
        EXPECT_GT(r.score_trace[i].bic, r.score_trace[i - 1].bic);
        EXPECT_EQ(r.score_trace[i].iteration, static_cast<int>(i));
    }
    EXPECT_NEAR(r.score_trace.back().bic, bic_score(benchmark_data(), r.graph).bic, 1e-6);
    EXPECT_TRUE(is_dag(r.graph));
}

TEST(Tabu, DominatesHillClimbAndReducesToIt) {
    const auto& data = benchmark_data();
    auto hc = hill_climb(data, cfg(Algorithm::HC));
    auto tabu = tabu_search(data, cfg(Algorithm::TABU));
    EXPECT_GE(bic_score(data, tabu.graph).bic, bic_score(data, hc.graph).bic - 1e-9);
    EXPECT_TRUE(is_dag(tabu.graph));

    auto c = cfg(Algorithm::TABU);
    c.tabu_max_worsening = 0;
    EXPECT_EQ(tabu_search(data, c).graph, hc.graph);
}

TEST(ScoreLearners, RecoverBenchmarkSkeleton) {
    const auto truth = oracle::benchmark_network().dag;
    for (auto a : {Algorithm::HC, Algorithm::TABU, Algorithm::MMHC}) {
        auto r = learn(benchmark_data(), cfg(a));
        EXPECT_TRUE(is_dag(r.graph));
        EXPECT_GE(skeleton_recall(truth, r.graph), 0.8) << to_string(a);
    }
}

TEST(HillClimb, RespectsMaxIndegree) {
    auto c = cfg(Algorithm::HC);
    c.max_indegree = 1;
    auto r = hill_climb(benchmark_data(), c);
    for (int v = 0; v < static_cast<int>(r.graph.size()); ++v) EXPECT_LE(r.graph.parents(v).size(), 1u);
}

TEST(Learners, DeterministicAcrossRuns) {
    for (auto a : all_algorithms()) {
        auto first = learn(benchmark_data(), cfg(a));
        auto second = learn(benchmark_data(), cfg(a));
        EXPECT_EQ(first.graph, second.graph) << to_string(a);
    }
}

TEST(Learners, TimeLimitFlagsPartialResult) {
    auto c = cfg(Algorithm::HC);
    c.time_limit = std::chrono::milliseconds(1);
    auto data = oracle::sample(oracle::benchmark_network(), 200000, 5);
    for (auto a : {Algorithm::HC, Algorithm::PcStable, Algorithm::MMHC}) {
        c.algorithm = a;
        auto r = learn(data, c);
        EXPECT_TRUE(r.timed_out) << to_string(a);
        EXPECT_TRUE(is_acyclic(r.graph));
    }
}

TEST(Mmhc, EdgesLieInMmpcSkeleton) {
    const auto& data = benchmark_data();
    auto skel = mmpc_skeleton(data, cfg(Algorithm::MMHC));
    auto r = mmhc(data, cfg(Algorithm::MMHC));
    for (auto [a, b] : r.graph.directed_edges()) EXPECT_TRUE(skel.adjacent(a, b));
}

TEST(Mmhc, CloserToTruthThanEmptyGraph) {
    const auto truth = dag_to_cpdag(oracle::benchmark_network().dag);
    auto r = mmhc(benchmark_data(), cfg(Algorithm::MMHC));
    const Graph empty(truth.nodes());
    EXPECT_LE(pattern_distance(dag_to_cpdag(r.graph), truth), pattern_distance(empty, truth));
}

TEST(PcStable, OrientsCollider) {
    Graph truth({"A", "B", "C"});
    truth.add_directed("A", "C");
    truth.add_directed("B", "C");
    auto data = oracle::sample(oracle::strong_network(truth, {2, 2, 3}, 2.0, 3), 10000, 4);
    auto r = pc_stable(data, cfg(Algorithm::PcStable));
    EXPECT_EQ(r.graph_kind, GraphKind::Cpdag);
    EXPECT_EQ(r.graph, truth);
}

TEST(PcStable, SkeletonInvariantUnderColumnPermutation) {
    const auto& data = benchmark_data();
    const auto reference = skeleton(pc_stable(data, cfg(Algorithm::PcStable)).graph);
    auto names = data.names();
    std::mt19937_64 rng(99);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(names.begin(), names.end(), rng);
        auto permuted = data.select_columns(names);
        auto r = pc_stable(permuted, cfg(Algorithm::PcStable));
        EXPECT_EQ(skeleton(r.graph), reference);
        EXPECT_EQ(r.graph, pc_stable(data, cfg(Algorithm::PcStable)).graph);
    }
}

TEST(PcStable, BenchmarkSkeletonMostlyRecovered) {
    auto r = pc_stable(benchmark_data(), cfg(Algorithm::PcStable));
    EXPECT_GE(skeleton_recall(oracle::benchmark_network().dag, r.graph), 0.7);
}

namespace {

/// A -> T <- B with C -> A, D -> B, E -> C, F -> D; MB(T) = {A, B}.
oracle::Network blanket_network() {
    Graph g({"A", "B", "C", "D", "E", "F", "T"});
    g.add_directed("A", "T");
    g.add_directed("B", "T");
    g.add_directed("C", "A");
    g.add_directed("D", "B");
    g.add_directed("E", "C");
    g.add_directed("F", "D");
    return oracle::strong_network(g, {2, 2, 2, 3, 2, 2, 3}, 1.8, 6);
}

}  // namespace

TEST(MarkovBlanketLearners, RecoverTargetBlanket) {
    auto data = oracle::sample(blanket_network(), 20000, 8);
    const int t = data.index_of("T");
    const std::vector<int> expected{data.index_of("A"), data.index_of("B")};
    std::vector<std::vector<std::vector<int>>> per_algorithm;
    for (auto a : {Algorithm::GS, Algorithm::IAMB, Algorithm::FastIAMB}) {
        auto mbs = estimate_markov_blankets(data, cfg(a));
        auto mb = mbs[static_cast<std::size_t>(t)];
        std::sort(mb.begin(), mb.end());
        EXPECT_EQ(mb, expected) << to_string(a);
        per_algorithm.push_back(mbs);
    }
    // fast-IAMB and IAMB agree on every blanket here.
    EXPECT_EQ(per_algorithm[1], per_algorithm[2]);
}

TEST(MarkovBlanketLearners, ProduceBenchmarkPattern) {
    for (auto a : {Algorithm::GS, Algorithm::IAMB, Algorithm::FastIAMB}) {
        auto r = learn(benchmark_data(), cfg(a));
        EXPECT_TRUE(r.graph_kind == GraphKind::Cpdag || r.graph_kind == GraphKind::Pdag);
        EXPECT_GE(skeleton_recall(oracle::benchmark_network().dag, r.graph), 0.7) << to_string(a);
    }
}

TEST(ToDag, IdentityExtensionAndConflict) {
    LearnResult dag;
    dag.graph = oracle::benchmark_network().dag;
    dag.graph_kind = GraphKind::Dag;
    EXPECT_EQ(to_dag(dag, 1), dag.graph);

    LearnResult cpdag;
    cpdag.graph = dag_to_cpdag(dag.graph);
    cpdag.graph_kind = GraphKind::Cpdag;
    auto ext = to_dag(cpdag, 3);
    EXPECT_TRUE(is_dag(ext));
    EXPECT_EQ(dag_to_cpdag(ext), cpdag.graph);

    LearnResult conflicted;
    conflicted.graph = Graph({"A", "B", "C", "D"});
    conflicted.graph.add_directed("A", "B");
    conflicted.graph.add_directed("C", "B");
    conflicted.graph.add_directed("B", "D");
    conflicted.graph_kind = GraphKind::Pdag;
    conflicted.conflicts = {"D->B conflicts with B->D"};
    EXPECT_THROW(to_dag(conflicted, 0), NoConsistentExtension);
}

TEST(LearnResult, JsonRoundTrip) {
    auto r = tabu_search(benchmark_data(), cfg(Algorithm::TABU));
    auto back = learn_result_from_json(to_json(r));
    EXPECT_EQ(back.algorithm, Algorithm::TABU);
    EXPECT_EQ(back.graph, r.graph);
    EXPECT_EQ(back.graph_kind, GraphKind::Dag);
    ASSERT_EQ(back.score_trace.size(), r.score_trace.size());
    EXPECT_EQ(back.score_trace.back().bic, r.score_trace.back().bic);
    EXPECT_EQ(back.test_count, r.test_count);
}
