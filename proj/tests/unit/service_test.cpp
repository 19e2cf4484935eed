#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"
#include "cbnkit/service.hpp"
#include "httplib.h"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace cbnkit;
using nlohmann::json;

namespace {

/// Benchmark network with readable state labels "0".."r-1".
Cbn bench() { return oracle::to_cbn(oracle::benchmark_network()); }

ModelRegistry two_models() {
    ModelRegistry reg;
    reg.add("bench", bench(), "truth", "2024-01-01T00:00:00Z");
    Graph g({"Z", "X", "Y"});
    g.add_directed("Z", "X");
    g.add_directed("Z", "Y");
    g.add_directed("X", "Y");
    reg.add("confounder", oracle::to_cbn(oracle::random_network(g, {2, 2, 2}, 3)));
    return reg;
}

class LiveService : public ::testing::Test {
protected:
    void start(ModelRegistry reg, ServiceOptions opts = {}) {
        opts.port = 0;
        service = std::make_unique<Service>(std::move(reg), opts);
        port = service->bind();
        thread = std::thread([this] { service->run(); });
        service->wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
    }
    void TearDown() override {
        if (service) service->stop();
        if (thread.joinable()) thread.join();
    }
    std::unique_ptr<Service> service;
    std::thread thread;
    std::unique_ptr<httplib::Client> client;
    int port = 0;
};

}  // namespace

TEST(Handlers, ModelsListing) {
    auto empty = handle_models(ModelRegistry{});
    EXPECT_EQ(empty.status, 200);
    EXPECT_TRUE(empty.body["models"].empty());
    auto two = handle_models(two_models());
    ASSERT_EQ(two.body["models"].size(), 2u);
    EXPECT_EQ(two.body["models"][0]["id"], "bench");
    EXPECT_EQ(two.body["models"][0]["nodes"], 8);
    EXPECT_EQ(two.body["models"][0]["edges"], 9);
    EXPECT_EQ(two.body["schema_version"], kWireSchemaVersion);
}

TEST(Handlers, RegistryRejectsDuplicates) {
    ModelRegistry reg;
    reg.add("a", bench());
    EXPECT_THROW(reg.add("a", bench()), InvalidArgument);
    EXPECT_THROW(reg.add("", bench()), InvalidArgument);
}

TEST(Handlers, QueryEqualsLibraryBitForBit) {
    const auto reg = two_models();
    const auto net = bench();
    auto r = handle_query(reg, "bench", R"({"target":"n6","evidence":{"n7":"1"},"do_assignments":{"n2":"0"}})");
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const auto wire = json::parse(r.body.dump());
    const auto lib = intervene(net, {6, {{2, 0}}, {{7, 1}}});
    EXPECT_EQ(wire["posterior"].get<std::vector<double>>(), lib);
    EXPECT_EQ(wire["baseline"].get<std::vector<double>>(), posterior(net, 6));
    double sum = 0;
    for (double p : lib) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    const auto delta = wire["delta_pp"].get<std::vector<double>>();
    for (std::size_t k = 0; k < lib.size(); ++k) EXPECT_DOUBLE_EQ(delta[k], 100.0 * (lib[k] - posterior(net, 6)[k]));
    EXPECT_EQ(handle_query(reg, "bench", R"({"target":"n6","evidence":{"n7":"1"}})").body,
              handle_query(reg, "bench", R"({"target":"n6","evidence":{"n7":"1"}})").body);
}

TEST(Handlers, QueryErrors) {
    const auto reg = two_models();
    EXPECT_EQ(handle_query(reg, "nope", R"({"target":"n6"})").status, 404);
    EXPECT_EQ(handle_query(reg, "bench", R"({"target":"n6","evidence":{"n2":"1"},"do_assignments":{"n2":"0"}})").status, 400);
    EXPECT_EQ(handle_query(reg, "bench", R"({"target":"n6","evidence":{"n6":"1"}})").status, 400);
    EXPECT_EQ(handle_query(reg, "bench", R"({"target":"zz"})").status, 400);
    EXPECT_EQ(handle_query(reg, "bench", R"({"target":"n6","evidence":{"n2":"9"}})").status, 400);
    EXPECT_EQ(handle_query(reg, "bench", "{not json").status, 400);
    EXPECT_EQ(handle_query(reg, "bench", "{}").status, 400);
    auto bad = handle_query(reg, "bench", "[1]");
    EXPECT_EQ(bad.status, 400);
    EXPECT_TRUE(bad.body["error"]["message"].is_string());

    Graph g({"X", "Y", "Z"});
    g.add_directed("X", "Y");
    ModelRegistry det;
    det.add("det", oracle::to_cbn({g, {2, 2, 2}, {{1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {0.5, 0.5}}}));
    EXPECT_EQ(handle_query(det, "det", R"({"target":"Z","evidence":{"Y":"1"}})").status, 422);
}

TEST(Handlers, DoOnNonAncestorGivesZeroDelta) {
    auto r = handle_query(two_models(), "bench", R"({"target":"n3","do_assignments":{"n7":"1"}})");
    ASSERT_EQ(r.status, 200);
    for (double d : r.body["delta_pp"].get<std::vector<double>>()) EXPECT_EQ(d, 0.0);
}

TEST(Handlers, AceAntisymmetry) {
    const auto reg = two_models();
    auto a = handle_ace(reg, "confounder", R"({"target":"Y","treatment":"X","treated":"1","control":"0"})");
    auto b = handle_ace(reg, "confounder", R"({"target":"Y","treatment":"X","treated":"0","control":"1"})");
    ASSERT_EQ(a.status, 200) << a.body.dump();
    EXPECT_EQ(a.body["ace"].get<double>(), -b.body["ace"].get<double>());
    EXPECT_EQ(a.body["target_state"], "1");
    EXPECT_EQ(handle_ace(reg, "confounder", R"({"target":"Y","treatment":"Y","treated":"1","control":"0"})").status, 400);
    EXPECT_EQ(handle_ace(reg, "confounder", R"({"target":"Y","treatment":"X","treated":"1","control":"1"})").status, 400);
}

TEST(Handlers, SensitivityMatchesLibrary) {
    const auto reg = two_models();
    auto r = handle_sensitivity(reg, "bench", "n4", std::nullopt);
    ASSERT_EQ(r.status, 200);
    const auto lib = sensitivity(bench(), 4, 1);
    ASSERT_EQ(r.body["ranking"].size(), lib.ranking.size());
    for (std::size_t i = 0; i < lib.ranking.size(); ++i) {
        EXPECT_EQ(r.body["ranking"][i]["node"], lib.ranking[i].node);
        EXPECT_EQ(r.body["ranking"][i]["max_abs_derivative"].get<double>(), lib.ranking[i].max_abs_derivative);
        if (!lib.ranking[i].ancestor) EXPECT_EQ(lib.ranking[i].max_abs_derivative, 0.0);
    }
    EXPECT_EQ(handle_sensitivity(reg, "bench", "", std::nullopt).status, 400);
    EXPECT_EQ(handle_sensitivity(reg, "bench", "n4", std::string("7")).status, 400);
    EXPECT_EQ(handle_sensitivity(reg, "x", "n4", std::nullopt).status, 404);
}

TEST(Handlers, ModelsDirectoryRoundTrip) {
    const auto dir = fs::temp_directory_path() / "cbnkit_service_models";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_model(bench(), dir / "b.json", "hc", "2024-05-01T00:00:00Z");
    save_cbn(bench(), dir / "a.json");
    auto reg = load_models_dir(dir);
    ASSERT_EQ(reg.size(), 2u);
    EXPECT_EQ(reg.find("b")->algorithm, "hc");
    EXPECT_EQ(reg.find("a")->algorithm, "");
    EXPECT_THROW(load_models_dir(dir / "missing"), DataError);
}

TEST_F(LiveService, EndpointsOverHttp) {
    start(two_models());
    auto models = client->Get("/models");
    ASSERT_TRUE(models);
    EXPECT_EQ(models->status, 200);
    EXPECT_EQ(models->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_EQ(json::parse(models->body)["models"].size(), 2u);

    auto graph = client->Get("/models/bench/graph");
    ASSERT_TRUE(graph);
    EXPECT_EQ(graph_from_json(json::parse(graph->body)), bench().dag());
    EXPECT_EQ(client->Get("/models/zz/graph")->status, 404);

    const std::string body = R"({"target":"n6","evidence":{"n7":"1"},"do_assignments":{"n2":"0"}})";
    auto q = client->Post("/models/bench/query", body, "application/json");
    ASSERT_TRUE(q);
    EXPECT_EQ(q->status, 200);
    EXPECT_EQ(json::parse(q->body)["posterior"].get<std::vector<double>>(), intervene(bench(), {6, {{2, 0}}, {{7, 1}}}));
    EXPECT_FALSE(q->get_header_value("X-Elapsed-Ms").empty());
    EXPECT_EQ(client->Post("/models/bench/query", body, "application/json")->body, q->body);
    EXPECT_EQ(client->Post("/models/bench/query", R"({"target":"n6","evidence":{"n2":"1"},"do_assignments":{"n2":"0"}})",
                           "application/json")->status, 400);

    auto a = client->Post("/models/confounder/ace", R"({"target":"Y","treatment":"X","treated":"1","control":"0"})",
                          "application/json");
    ASSERT_TRUE(a);
    EXPECT_EQ(a->status, 200);

    auto s = client->Get("/models/bench/sensitivity?target=n4&state=1");
    ASSERT_TRUE(s);
    EXPECT_EQ(s->status, 200);
    EXPECT_EQ(json::parse(s->body)["ranking"][0]["node"], sensitivity(bench(), 4, 1).ranking[0].node);

    auto spec = client->Get("/spec");
    ASSERT_TRUE(spec);
    EXPECT_TRUE(json::parse(spec->body)["paths"].contains("/models/{id}/query"));

    auto pre = client->Options("/models/bench/query");
    ASSERT_TRUE(pre);
    EXPECT_EQ(pre->status, 204);
    EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Methods"), "GET, POST, OPTIONS");

    auto missing = client->Get("/nothing");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_TRUE(json::parse(missing->body).contains("error"));
}

TEST_F(LiveService, TimeoutReturns503) {
    ServiceOptions opts;
    opts.timeout = std::chrono::milliseconds(0);
    start(two_models(), opts);
    auto s = client->Get("/models/bench/sensitivity?target=n7");
    ASSERT_TRUE(s);
    EXPECT_EQ(s->status, 503);
    EXPECT_EQ(json::parse(s->body)["error"]["status"], 503);
}
