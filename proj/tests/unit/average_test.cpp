#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "cbnkit/average.hpp"
#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace cbnkit;

namespace {

Graph abc() { return Graph({"A", "B", "C"}); }

/// Random mixed graph: random DAG with some edges turned undirected.
Graph random_input(int nodes, std::mt19937_64& rng) {
    auto dag = oracle::random_dag(nodes, 0.35, rng());
    Graph g(dag.nodes());
    std::bernoulli_distribution undirected(0.2), flip(0.3);
    for (auto [a, b] : dag.directed_edges()) {
        if (undirected(rng)) {
            g.add_undirected(a, b);
        } else if (flip(rng)) {
            g.add_directed(b, a);  // may create cycles across edges: inputs need not be DAGs
        } else {
            g.add_directed(a, b);
        }
    }
    return g;
}

}  // namespace

TEST(Tally, CountsDirectedAndUndirectedSeparately) {
    auto g1 = abc(), g2 = abc(), g3 = abc();
    g1.add_directed("A", "B");
    g2.add_directed("A", "B");
    g3.add_directed("A", "B");
    g1.add_undirected("B", "C");
    g2.add_directed("C", "B");
    auto t = tally({g1, g2, g3});
    EXPECT_EQ(t.n_inputs, 3);
    EXPECT_EQ(t.directed_freq("A", "B"), 3);
    EXPECT_EQ(t.directed_freq("B", "A"), 0);
    EXPECT_EQ(t.undirected_freq("C", "B"), 1);
    EXPECT_EQ(t.directed_freq("C", "B"), 1);
}

TEST(Tally, SingleInputFrequenciesAreOne) {
    auto g = oracle::random_dag(6, 0.5, 4);
    auto t = tally({g});
    for (const auto& [pair, f] : t.directed) EXPECT_EQ(f, 1);
    EXPECT_EQ(t.directed.size(), g.num_directed());
}

TEST(Tally, NodeSetMismatchThrows) {
    EXPECT_THROW(tally({abc(), Graph({"A", "B", "D"})}), GraphError);
}

TEST(Average, HandTracedThresholdExample) {
    auto g1 = abc(), g2 = abc(), g3 = abc();
    g1.add_directed("A", "B");
    g1.add_directed("B", "C");
    g2.add_directed("A", "B");
    g2.add_directed("C", "B");
    g3.add_directed("A", "B");
    auto r = model_average(tally({g1, g2, g3}), 2);
    Graph expected = abc();
    expected.add_directed("A", "B");
    EXPECT_EQ(r.graph, expected);
    ASSERT_EQ(r.edges.size(), 1u);
    EXPECT_EQ(r.edges[0].frequency, 3);
    EXPECT_EQ(r.excluded_below_threshold.size(), 2u);
    EXPECT_TRUE(r.reversed_set_c.empty());
}

TEST(Average, HandTracedCycleExample) {
    auto g = abc();
    g.add_directed("A", "B");
    g.add_directed("B", "C");
    g.add_directed("C", "A");
    auto r = model_average(tally({g, g, g}), 1);
    Graph expected = abc();
    expected.add_directed("A", "B");
    expected.add_directed("B", "C");
    expected.add_directed("A", "C");
    EXPECT_EQ(r.graph, expected);
    ASSERT_EQ(r.reversed_set_c.size(), 1u);
    EXPECT_EQ(r.reversed_set_c[0].from, "A");
    EXPECT_EQ(r.reversed_set_c[0].to, "C");
    EXPECT_EQ(r.reversed_set_c[0].frequency, 3);
    EXPECT_EQ(r.edges.back().source, EdgeSource::Reversed);
}

TEST(Average, UndirectedEdgesOrientedLowToHigh) {
    auto g = abc();
    g.add_undirected("B", "A");
    auto r = model_average(tally({g}), 1);
    EXPECT_TRUE(r.graph.has_directed(0, 1));

    // C -> A and B -> C force A - B into B -> A.
    auto h = abc();
    h.add_directed("C", "A");
    h.add_directed("B", "C");
    h.add_undirected("A", "B");
    auto rh = model_average(tally({h}), 1);
    EXPECT_TRUE(rh.graph.has_directed(1, 0));
    EXPECT_TRUE(is_dag(rh.graph));
}

TEST(Average, Unanimity) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto g = oracle::random_dag(8, 0.4, seed);
        for (int k = 1; k <= 5; ++k) {
            std::vector<Graph> inputs(static_cast<std::size_t>(k), g);
            for (int m = 1; m <= k; ++m) EXPECT_EQ(model_average(tally(inputs), m).graph, g);
        }
    }
}

TEST(Average, AcyclicOrderInvariantAndSkeletonMonotone) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Graph> inputs;
        const int k = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < k; ++i) inputs.push_back(random_input(7, rng));
        const auto t = tally(inputs);
        auto shuffled = inputs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto ts = tally(shuffled);
        Graph previous;
        for (int m = 1; m <= k + 1; ++m) {
            auto r = model_average(t, m);
            ASSERT_TRUE(is_dag(r.graph));
            EXPECT_EQ(model_average(ts, m).graph, r.graph);
            for (const auto& c : r.reversed_set_c) EXPECT_TRUE(r.graph.has_directed(r.graph.index_of(c.from), r.graph.index_of(c.to)));
            if (m > 1) {
                // Every pair joined at the higher threshold was joined at the lower one.
                for (auto [a, b] : r.graph.directed_edges()) EXPECT_TRUE(previous.adjacent(a, b));
            }
            previous = r.graph;
        }
    }
}

TEST(Average, DefaultThreshold) {
    EXPECT_EQ(default_threshold(11), 4);
    EXPECT_EQ(default_threshold(3), 1);
    EXPECT_EQ(default_threshold(12), 4);
    EXPECT_EQ(default_threshold(1), 1);
    EXPECT_THROW(default_threshold(0), InvalidArgument);
    EXPECT_THROW(model_average(tally({abc()}), 0), InvalidArgument);
}

TEST(Average, DirectoryLoadingAndOutputs) {
    const auto dir = fs::temp_directory_path() / "cbnkit_average_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "in");
    auto g = abc();
    g.add_directed("A", "B");
    write_edge_list_csv(g, dir / "in" / "b.csv");
    std::ofstream(dir / "in" / "a.json") << graph_to_json(g).dump();
    std::ofstream(dir / "in" / "notes.txt") << "ignored";
    auto loaded = load_graph_directory(dir / "in");
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].first, "a");
    std::vector<Graph> graphs;
    for (auto& [name, graph] : loaded) graphs.push_back(graph);
    auto r = model_average(tally(graphs), 2);
    write_average_csv(r, dir / "avg.csv");
    EXPECT_EQ(read_edge_list_csv(dir / "avg.csv"), r.graph);
    auto j = to_json(r, 2, 2);
    EXPECT_EQ(j["graph"]["edges"][0]["frequency"], 2);
    EXPECT_EQ(graph_from_json(j["graph"]), r.graph);
}
