#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "cbnkit/cbn.hpp"
#include "cbnkit/errors.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace cbnkit;

namespace {

std::vector<int> random_cards(int n, std::mt19937_64& rng) {
    std::vector<int> cards;
    for (int i = 0; i < n; ++i) cards.push_back(2 + static_cast<int>(rng() % 2));
    return cards;
}

Assignment random_evidence(const oracle::Network& net, int target, int count, std::mt19937_64& rng) {
    Assignment e;
    const int n = static_cast<int>(net.dag.size());
    while (static_cast<int>(e.size()) < count) {
        const int v = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        if (v == target || e.count(v)) continue;
        e[v] = static_cast<int>(rng() % static_cast<std::uint64_t>(net.cards[static_cast<std::size_t>(v)]));
    }
    return e;
}

/// Two binary nodes named X and Y with X -> Y.
oracle::Network single_edge(double px1, double py1_x0, double py1_x1) {
    Graph g({"X", "Y"});
    g.add_directed("X", "Y");
    return {g, {2, 2}, {{1 - px1, px1}, {1 - py1_x0, py1_x0, 1 - py1_x1, py1_x1}}};
}

}  // namespace

TEST(Factor, MultiplySumOutReduce) {
    Factor a{{0}, {2}, {0.3, 0.7}};
    Factor b{{1, 0}, {2, 2}, {0.9, 0.1, 0.2, 0.8}};  // P(1 | 0), first scope var fastest
    auto ab = multiply(a, b);
    ASSERT_EQ(ab.scope, (std::vector<int>{0, 1}));
    EXPECT_DOUBLE_EQ(ab.values[0], 0.3 * 0.9);
    EXPECT_DOUBLE_EQ(ab.values[1], 0.7 * 0.2);
    EXPECT_DOUBLE_EQ(ab.values[2], 0.3 * 0.1);
    EXPECT_DOUBLE_EQ(ab.values[3], 0.7 * 0.8);
    auto m = sum_out(ab, 0);
    EXPECT_NEAR(m.values[0], 0.27 + 0.14, 1e-15);
    EXPECT_NEAR(m.values[1], 0.03 + 0.56, 1e-15);
    auto r = reduce(b, 0, 1);
    EXPECT_EQ(r.scope, (std::vector<int>{1}));
    EXPECT_DOUBLE_EQ(r.values[0], 0.2);
    EXPECT_DOUBLE_EQ(r.values[1], 0.8);
}

TEST(Cbn, RejectsInvalidTables) {
    auto net = single_edge(0.4, 0.2, 0.7);
    net.tables[1][0] = 0.5;
    EXPECT_THROW(oracle::to_cbn(net), InvalidArgument);
    auto short_table = single_edge(0.4, 0.2, 0.7);
    short_table.tables[1].pop_back();
    EXPECT_THROW(oracle::to_cbn(short_table), InvalidArgument);
}

TEST(Inference, PosteriorMatchesJointEnumeration) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 4);
        auto dag = oracle::random_dag(n, 0.4, rng());
        auto net = oracle::random_network(dag, random_cards(n, rng), rng());
        const auto cbn = oracle::to_cbn(net);
        const int target = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        const auto ev = random_evidence(net, target, static_cast<int>(rng() % 4), rng);
        const auto got = posterior(cbn, target, ev);
        const auto want = oracle::enumerate_posterior(net, target, ev);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-10);
    }
}

TEST(Inference, InterventionMatchesSurgeryEnumeration) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 4);
        auto dag = oracle::random_dag(n, 0.4, rng());
        auto net = oracle::random_network(dag, random_cards(n, rng), rng());
        const auto cbn = oracle::to_cbn(net);
        const int target = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        auto all = random_evidence(net, target, 1 + static_cast<int>(rng() % 3), rng);
        Assignment dos, ev;
        for (auto [v, s] : all) (dos.empty() || rng() % 2 ? dos : ev)[v] = s;
        const auto got = intervene(cbn, {target, dos, ev});
        const auto want = oracle::enumerate_interventional(net, target, ev, dos);
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-10);
    }
}

TEST(Inference, ZeroProbabilityEvidenceThrows) {
    auto net = single_edge(0.5, 0.0, 1.0);
    const auto cbn = oracle::to_cbn(net);
    EXPECT_NO_THROW(posterior(cbn, 0, {{1, 1}}));
    EXPECT_DOUBLE_EQ(posterior(cbn, 0, {{1, 1}})[1], 1.0);
    Graph g({"X", "Y", "Z"});
    g.add_directed("X", "Y");
    oracle::Network det{g, {2, 2, 2}, {{1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {0.5, 0.5}}};
    EXPECT_THROW(posterior(oracle::to_cbn(det), 2, {{1, 1}}), ZeroProbabilityEvidence);
    EXPECT_THROW(intervene(oracle::to_cbn(det), {2, {{0, 0}}, {{1, 1}}}), ZeroProbabilityEvidence);
}

TEST(Inference, QueryValidation) {
    const auto cbn = oracle::to_cbn(single_edge(0.4, 0.2, 0.7));
    EXPECT_THROW(intervene(cbn, {1, {{0, 1}}, {{0, 1}}}), InvalidArgument);
    EXPECT_THROW(intervene(cbn, {1, {{1, 1}}, {}}), InvalidArgument);
    EXPECT_THROW(posterior(cbn, 1, {{1, 0}}), InvalidArgument);
    EXPECT_THROW(posterior(cbn, 1, {{0, 2}}), InvalidArgument);
    EXPECT_THROW(posterior(cbn, 5), InvalidArgument);
    EXPECT_THROW(resolve(cbn, {{"X", "7"}}), InvalidArgument);
    EXPECT_THROW(resolve(cbn, {{"Q", "1"}}), InvalidArgument);
    EXPECT_EQ(resolve(cbn, {{"X", "1"}}).at(0), 1);
}

TEST(Fit, LaplaceSmoothedCounts) {
    auto net = single_edge(0.3, 0.2, 0.9);
    auto data = oracle::sample(net, 500, 3);
    Graph dag({"X", "Y"});
    dag.add_directed("X", "Y");
    auto cbn = fit_cpts(dag, data, 1.0);
    std::array<double, 4> n{};
    for (std::size_t r = 0; r < data.n_rows(); ++r) n[static_cast<std::size_t>(data.at(r, 0) * 2 + data.at(r, 1))] += 1;
    EXPECT_DOUBLE_EQ(cbn.cpt(0).table[1], (n[2] + n[3] + 1) / (500.0 + 2));
    EXPECT_DOUBLE_EQ(cbn.cpt(1).table[3], (n[3] + 1) / (n[2] + n[3] + 2));
    EXPECT_DOUBLE_EQ(cbn.cpt(1).table[0], (n[0] + 1) / (n[0] + n[1] + 2));

    // Unseen parent rows with no smoothing fall back to uniform.
    auto zero = oracle::sample(single_edge(0.0, 0.5, 0.5), 50, 4);
    auto z = fit_cpts(dag, zero, 0.0);
    EXPECT_DOUBLE_EQ(z.cpt(1).table[2], 0.5);
    EXPECT_DOUBLE_EQ(z.cpt(0).table[0], 1.0);
    EXPECT_THROW(fit_cpts(dag, data, -1.0), InvalidArgument);
}

TEST(Fit, ConvergesToGeneratingTables) {
    auto net = oracle::benchmark_network();
    auto cbn = fit_cpts(net.dag, oracle::sample(net, 100000, 8));
    for (std::size_t v = 0; v < net.tables.size(); ++v) {
        for (std::size_t k = 0; k < net.tables[v].size(); ++k) EXPECT_NEAR(cbn.cpt(static_cast<int>(v)).table[k], net.tables[v][k], 0.03);
    }
}

TEST(Ace, NonDescendantTreatmentHasZeroEffect) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        auto dag = oracle::random_dag(6, 0.4, rng());
        auto cbn = oracle::to_cbn(oracle::random_network(dag, std::vector<int>(6, 2), rng()));
        for (int x = 0; x < 6; ++x) {
            for (int y = 0; y < 6; ++y) {
                if (x == y || has_directed_path(dag, x, y)) continue;
                EXPECT_NEAR(ace(cbn, y, 1, x, 1, 0), 0.0, 1e-12);
            }
        }
    }
}

TEST(Ace, ConfounderAdjustmentDiffersFromObservation) {
    Graph g({"Z", "X", "Y"});
    g.add_directed("Z", "X");
    g.add_directed("Z", "Y");
    g.add_directed("X", "Y");
    std::mt19937_64 rng(5);
    for (int draw = 0; draw < 20; ++draw) {
        auto net = oracle::random_network(g, {2, 2, 2}, rng());
        auto cbn = oracle::to_cbn(net);
        auto py = [&](int x, int z) { return net.tables[2][static_cast<std::size_t>((z + 2 * x) * 2 + 1)]; };
        auto pz = [&](int z) { return net.tables[0][static_cast<std::size_t>(z)]; };
        const double adjusted = (py(1, 0) - py(0, 0)) * pz(0) + (py(1, 1) - py(0, 1)) * pz(1);
        EXPECT_NEAR(ace(cbn, 2, 1, 1, 1, 0), adjusted, 1e-12);
        const double observed = posterior(cbn, 2, {{1, 1}})[1] - posterior(cbn, 2, {{1, 0}})[1];
        const double gap = std::abs(observed - adjusted);
        if (gap > 1e-6) EXPECT_GT(std::abs(ace(cbn, 2, 1, 1, 1, 0) - observed), 1e-6);
    }
    auto cbn = oracle::to_cbn(oracle::random_network(g, {2, 2, 2}, 1));
    EXPECT_THROW(ace(cbn, 2, 1, 1, 1, 1), InvalidArgument);
}

TEST(DoCalculus, ChainExamples) {
    Graph g({"X", "Z", "Y"});
    g.add_directed("X", "Z");
    g.add_directed("Z", "Y");
    const std::vector<int> none, x{0}, z{1}, y{2};
    EXPECT_TRUE(docalc_rule_applies(g, 2, none, y, z, none));
    EXPECT_FALSE(docalc_rule_applies(g, 1, none, y, z, none));
    EXPECT_TRUE(docalc_rule_applies(g, 1, z, y, x, none));
    EXPECT_TRUE(docalc_rule_applies(g, 3, none, z, y, none));
    EXPECT_THROW(docalc_rule_applies(g, 4, x, y, z, none), InvalidArgument);
}

TEST(DoCalculus, RuleOneImpliesNumericalEquality) {
    std::mt19937_64 rng(31);
    int applied = 0;
    for (int trial = 0; trial < 50; ++trial) {
        auto dag = oracle::random_dag(6, 0.4, rng());
        auto net = oracle::random_network(dag, std::vector<int>(6, 2), rng());
        auto cbn = oracle::to_cbn(net);
        std::vector<int> perm{0, 1, 2, 3, 4, 5};
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::vector<int> x{perm[0]}, y{perm[1]}, z{perm[2]}, w{perm[3]};
        if (!docalc_rule_applies(dag, 1, x, y, z, w)) continue;
        ++applied;
        for (int xs = 0; xs < 2; ++xs) {
            for (int zs = 0; zs < 2; ++zs) {
                for (int ws = 0; ws < 2; ++ws) {
                    const auto with_z = intervene(cbn, {y[0], {{x[0], xs}}, {{z[0], zs}, {w[0], ws}}});
                    const auto without = intervene(cbn, {y[0], {{x[0], xs}}, {{w[0], ws}}});
                    EXPECT_NEAR(with_z[1], without[1], 1e-10);
                }
            }
        }
    }
    EXPECT_GT(applied, 10);
}

TEST(Sensitivity, SingleEdgeAnalyticDerivative) {
    auto cbn = oracle::to_cbn(single_edge(0.35, 0.2, 0.6));
    auto rep = sensitivity(cbn, 1, 1);
    // P(Y=1) = P(X=0) a + P(X=1) b: d/db = P(X=1), d/da = P(X=0).
    for (const auto& e : rep.entries) {
        if (e.node == "Y" && e.row == 1 && e.state == "1") EXPECT_NEAR(e.derivative, 0.35, 1e-6);
        if (e.node == "Y" && e.row == 0 && e.state == "1") EXPECT_NEAR(e.derivative, 0.65, 1e-6);
        if (e.node == "Y" && e.row == 1 && e.state == "0") EXPECT_NEAR(e.derivative, -0.35, 1e-6);
        if (e.node == "X" && e.state == "1") EXPECT_NEAR(e.derivative, 0.6 - 0.2, 1e-6);
    }
    EXPECT_EQ(rep.entries.size(), 6u);
    EXPECT_EQ(rep.ranking.front().node, "Y");

    auto up = sensitivity(cbn, 0, 1);
    for (const auto& e : up.entries) {
        if (e.node == "Y") EXPECT_EQ(e.derivative, 0.0);
    }
    EXPECT_FALSE(up.ranking.back().ancestor);
    EXPECT_EQ(up.ranking.back().max_abs_derivative, 0.0);
}

TEST(Sensitivity, NonAncestorsExactlyZeroAndFiniteDifferenceMatchesPerturbation) {
    auto net = oracle::benchmark_network();
    auto cbn = oracle::to_cbn(net);
    const int target = 4;  // n4: ancestors n0..n3
    auto rep = sensitivity(cbn, target, 1);
    const auto anc = ancestors(net.dag, std::vector<int>{target});
    for (const auto& e : rep.entries) {
        const int v = cbn.index_of(e.node);
        const bool relevant = v == target || std::find(anc.begin(), anc.end(), v) != anc.end();
        if (!relevant) EXPECT_EQ(e.derivative, 0.0) << e.node;
    }
    // Independent check of one entry by rebuilding the perturbed network.
    const auto& e = rep.entries.front();
    const int v = cbn.index_of(e.node);
    const auto r = static_cast<std::size_t>(cbn.cardinality(v));
    const auto idx = static_cast<std::size_t>(e.row) * r + static_cast<std::size_t>(cbn.state_of(v, e.state));
    auto shifted = [&](double d) {
        auto copy = net;
        auto& t = copy.tables[static_cast<std::size_t>(v)];
        const double theta = t[idx];
        for (std::size_t k = 0; k < r; ++k) {
            const auto cell = static_cast<std::size_t>(e.row) * r + k;
            t[cell] = cell == idx ? theta + d : t[cell] * (1 - theta - d) / (1 - theta);
        }
        return oracle::enumerate_posterior(copy, target, {})[1];
    };
    EXPECT_NEAR(e.derivative, (shifted(1e-5) - shifted(-1e-5)) / 2e-5, 1e-6);
}

TEST(CrossValidation, EmptyGraphPredictsTrainingMajority) {
    auto net = oracle::benchmark_network();
    auto data = oracle::sample(net, 3000, 9);
    const Graph empty(net.dag.nodes());
    auto rep = cross_validate(empty, data, "n2", 5, 42);
    ASSERT_EQ(rep.fold_accuracy.size(), 5u);
    std::size_t total = 0;
    for (auto s : rep.fold_size) total += s;
    EXPECT_EQ(total, 3000u);
    EXPECT_NEAR(rep.mean_accuracy, rep.majority_rate, 2e-3);

    auto full = cross_validate(net.dag, data, "n2", 5, 42);
    EXPECT_GT(full.mean_accuracy, rep.mean_accuracy);
    auto again = cross_validate(net.dag, data, "n2", 5, 42);
    EXPECT_EQ(again.fold_accuracy, full.fold_accuracy);
    EXPECT_THROW(cross_validate(net.dag, data, "nope", 5, 1), InvalidArgument);
    EXPECT_THROW(cross_validate(net.dag, data, "n2", 1, 1), InvalidArgument);
}

TEST(CrossValidation, FoldsAreStratified) {
    auto data = oracle::sample(oracle::benchmark_network(), 1000, 10);
    Graph empty(oracle::benchmark_network().dag.nodes());
    auto rep = cross_validate(empty, data, "n0", 4, 1);
    for (auto s : rep.fold_size) EXPECT_EQ(s, 250u);
}

TEST(Reports, DeltaInPercentagePoints) {
    auto cbn = oracle::to_cbn(single_edge(0.35, 0.2, 0.6));
    auto r = intervention_delta_report(cbn, 1, 1, {0});
    const double base = 0.65 * 0.2 + 0.35 * 0.6;
    EXPECT_NEAR(r.baseline, base, 1e-12);
    ASSERT_EQ(r.entries.size(), 2u);
    EXPECT_NEAR(r.entries[1].delta_pp, 100 * (0.6 - base), 1e-9);
    EXPECT_NEAR(r.entries[0].delta_pp, 100 * (0.2 - base), 1e-9);
    ASSERT_EQ(r.matrix.size(), 4u);
    EXPECT_NEAR(r.matrix[3].delta_pp, r.entries[1].delta_pp, 1e-9);
    EXPECT_THROW(intervention_delta_report(cbn, 1, 1, {1}), InvalidArgument);
    const auto j = to_json(r);
    EXPECT_EQ(j["entries"].size(), 2u);
}

TEST(Serialization, JsonRoundTripIsExact) {
    auto net = oracle::random_network(oracle::random_dag(7, 0.4, 3), {2, 3, 2, 3, 2, 2, 3}, 4);
    auto cbn = oracle::to_cbn(net);
    const auto dir = fs::temp_directory_path() / "cbnkit_cbn_test";
    fs::create_directories(dir);
    save_cbn(cbn, dir / "net.json");
    auto back = load_cbn(dir / "net.json");
    EXPECT_EQ(back.dag(), cbn.dag());
    for (int v = 0; v < 7; ++v) EXPECT_EQ(back.cpt(v).table, cbn.cpt(v).table);
    EXPECT_EQ(posterior(back, 3, {{0, 1}}), posterior(cbn, 3, {{0, 1}}));
    EXPECT_THROW(cbn_from_json(nlohmann::json{{"graph", 1}}), std::exception);
}
