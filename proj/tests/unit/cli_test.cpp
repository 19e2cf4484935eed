#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbnkit/cbn.hpp"
#include "cbnkit/graph_io.hpp"
#include "cbnkit/pipeline.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace cbnkit;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "cbnkit_cli_test";

struct Run {
    int code = -1;
    std::string out;
};

Run cli(const std::string& args) {
    const auto capture = kRoot / "stdout.txt";
    const std::string cmd = std::string(CBNKIT_CLI) + " " + args + " > " + capture.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(capture);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        const auto net = oracle::benchmark_network();
        const auto data = oracle::sample(net, 4000, 13);
        write_csv(data, kRoot / "data.csv");
        std::ofstream(kRoot / "variables.json") << to_json(data.variables()).dump(2);
        write_edge_list_csv(net.dag, kRoot / "truth.csv");
        json cfg{{"dataset", "data.csv"},
                 {"variables", "variables.json"},
                 {"algorithms", {"hc", {{"algorithm", "tabu"}, {"tabu_length", 5}}, "pc-stable", "mmhc"}},
                 {"average_min_freq", "auto"},
                 {"cv_folds", 3},
                 {"target", "n6"},
                 {"intervene", {"n2", "n7"}},
                 {"output_dir", "run1"},
                 {"seed", 7}};
        std::ofstream(kRoot / "run.json") << cfg.dump(2);
    }
};

}  // namespace

TEST_F(Cli, PipelineRunWritesHashedManifest) {
    const auto r = cli("run --config " + (kRoot / "run.json").string());
    ASSERT_EQ(r.code, 0);
    const auto out = kRoot / "run1";
    const auto manifest = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_EQ(manifest["seed"], 7);
    int graphs = 0;
    for (const auto& o : manifest["outputs"]) {
        const fs::path p = out / o["path"].get<std::string>();
        ASSERT_TRUE(fs::exists(p)) << p;
        EXPECT_EQ(o["sha256"], sha256_file(p));
        const auto s = o["path"].get<std::string>();
        if (s.rfind("graphs/", 0) == 0 && fs::path(s).extension() == ".csv") ++graphs;
    }
    EXPECT_EQ(graphs, 5);  // 4 algorithms + average
    for (const char* f : {"models/average.json", "reports/interventions.csv", "reports/sensitivity.json",
                          "metrics/cv.csv", "metrics/scores.csv", "data/marginals.csv"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
}

TEST_F(Cli, RerunIsByteIdenticalForGraphs) {
    ASSERT_EQ(cli("run --config " + (kRoot / "run.json").string() + " --out " + (kRoot / "runA").string()).code, 0);
    ASSERT_EQ(cli("run --config " + (kRoot / "run.json").string() + " --out " + (kRoot / "runB").string()).code, 0);
    for (const char* f : {"graphs/hc.csv", "graphs/tabu.csv", "graphs/pc-stable.csv", "graphs/mmhc.csv",
                          "graphs/average.csv", "models/average.json", "reports/interventions.csv"}) {
        EXPECT_EQ(slurp(kRoot / "runA" / f), slurp(kRoot / "runB" / f)) << f;
    }
}

TEST_F(Cli, StageSubcommandsChain) {
    const auto d = kRoot / "stages";
    const std::string data = " --data " + (kRoot / "data.csv").string() + " --variables " + (kRoot / "variables.json").string();
    ASSERT_EQ(cli("learn --algorithm tabu" + data + " --out " + (d / "graphs").string()).code, 0);
    ASSERT_EQ(cli("learn --algorithm hc --stem hc2" + data + " --out " + (d / "graphs").string()).code, 0);
    fs::create_directories(d / "pick");
    fs::copy_file(d / "graphs" / "tabu.csv", d / "pick" / "tabu.csv");
    fs::copy_file(d / "graphs" / "hc2.csv", d / "pick" / "hc2.csv");
    ASSERT_EQ(cli("average --graphs " + (d / "pick").string() + " --variables " + (kRoot / "variables.json").string() +
                  " --min-freq 1 --out " + (d / "avg").string())
                  .code,
              0);
    auto ev = cli("evaluate --graph " + (d / "avg" / "average.csv").string() + " --ref " + (kRoot / "truth.csv").string());
    ASSERT_EQ(ev.code, 0);
    EXPECT_LE(json::parse(ev.out)["shd"].get<int>(), 9);
    ASSERT_EQ(cli("fit --graph " + (d / "avg" / "average.csv").string() + data + " --out " + (d / "m" / "avg.json").string()).code, 0);

    auto iv = cli("intervene --model " + (d / "m" / "avg.json").string() + " --target n6 --do n2=1 --evidence n7=0");
    ASSERT_EQ(iv.code, 0);
    const auto net = load_cbn(d / "m" / "avg.json");
    const auto lib = intervene(net, {net.index_of("n6"), {{net.index_of("n2"), 1}}, {{net.index_of("n7"), 0}}});
    EXPECT_EQ(json::parse(iv.out)["posterior"].get<std::vector<double>>(), lib);

    ASSERT_EQ(cli("sensitivity --model " + (d / "m" / "avg.json").string() + " --target n6 --out " + (d / "rep").string()).code, 0);
    EXPECT_TRUE(fs::exists(d / "rep" / "sensitivity.csv"));
    auto cv = cli("cv --graph " + (kRoot / "truth.csv").string() + data + " --target n6 --folds 4");
    ASSERT_EQ(cv.code, 0);
    EXPECT_EQ(json::parse(cv.out)["fold_accuracy"].size(), 4u);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(cli("--help").code, 0);
    EXPECT_EQ(cli("bogus").code, 2);
    EXPECT_EQ(cli("learn --algorithm hc --data /nonexistent.csv").code, 2);
    EXPECT_EQ(cli("learn --algorithm nope --data " + (kRoot / "data.csv").string()).code, 2);
    EXPECT_EQ(cli("intervene --model /nonexistent.json --target n6").code, 3);
    json bad{{"dataset", "missing.csv"}, {"algorithms", {"hc"}}};
    std::ofstream(kRoot / "bad.json") << bad.dump();
    EXPECT_EQ(cli("run --config " + (kRoot / "bad.json").string()).code, 2);

    const auto big = oracle::sample(oracle::benchmark_network(), 100000, 3);
    write_csv(big, kRoot / "big.csv");
    EXPECT_EQ(cli("learn --algorithm hc --time-limit 0.001 --data " + (kRoot / "big.csv").string() + " --variables " +
                  (kRoot / "variables.json").string() + " --out " + (kRoot / "timeout").string())
                  .code,
              4);
}

TEST(Configs, ShippedPipelineConfigParses) {
    const fs::path cfg = fs::path(CBNKIT_DATA_DIR).parent_path() / "configs" / "brfss_pipeline.json";
    const auto c = load_run_config(cfg);
    EXPECT_EQ(c.algorithms.size(), 7u);
    EXPECT_TRUE(c.raw_dataset);
    EXPECT_EQ(c.target, "Diabetes_binary");
    EXPECT_EQ(c.seed, 2024u);
    EXPECT_TRUE(c.knowledge && fs::exists(*c.knowledge));
    const auto tabu = std::find_if(c.algorithms.begin(), c.algorithms.end(),
                                   [](const LearnConfig& l) { return l.algorithm == Algorithm::TABU; });
    ASSERT_NE(tabu, c.algorithms.end());
    EXPECT_EQ(tabu->tabu_length, 10);
    EXPECT_EQ(learn_config_from_json(json::parse(slurp(cfg.parent_path() / "learn_tabu.json"))).algorithm,
              Algorithm::TABU);
}
