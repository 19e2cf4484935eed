#include "cbnkit/service.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <thread>

#include "cbnkit/errors.hpp"
#include "cbnkit/graph_io.hpp"
#include "httplib.h"

namespace cbnkit {

namespace {

using nlohmann::json;

HttpResult error(int status, const std::string& message) {
    return {status, {{"schema_version", kWireSchemaVersion}, {"error", {{"status", status}, {"message", message}}}}};
}

json parse_body(const std::string& body) {
    try {
        auto j = json::parse(body);
        if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
    }
}

std::string label(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw InvalidArgument("state labels must be strings or integers");
}

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key)) throw InvalidArgument(std::string("missing field: ") + key);
    return label(j.at(key));
}

NamedAssignment assignments(const json& j, const char* key) {
    NamedAssignment out;
    if (!j.contains(key) || j.at(key).is_null()) return out;
    if (!j.at(key).is_object()) throw InvalidArgument(std::string(key) + " must be an object");
    for (auto it = j.at(key).begin(); it != j.at(key).end(); ++it) out[it.key()] = label(it.value());
    return out;
}

const std::string& state_label(const Cbn& net, int v, int s) {
    return net.variables()[static_cast<std::size_t>(v)].states[static_cast<std::size_t>(s)];
}

int target_state(const Cbn& net, int target, const std::optional<std::string>& state) {
    return state ? net.state_of(target, *state) : net.cardinality(target) - 1;
}

/// Maps library exceptions onto status codes.
template <typename F>
HttpResult guarded(const ModelRegistry& reg, const std::string& id, F&& f) {
    const auto* entry = reg.find(id);
    if (!entry) return error(404, "unknown model: " + id);
    try {
        auto body = f(*entry->model);
        body["schema_version"] = kWireSchemaVersion;
        body["model"] = id;
        return {200, std::move(body)};
    } catch (const ZeroProbabilityEvidence& e) {
        return error(422, e.what());
    } catch (const InvalidArgument& e) {
        return error(400, e.what());
    } catch (const json::exception& e) {
        return error(400, e.what());
    } catch (const Error& e) {
        return error(400, e.what());
    }
}

}  // namespace

void ModelRegistry::add(std::string id, Cbn model, std::string algorithm, std::string fitted_at, std::string source) {
    if (id.empty()) throw InvalidArgument("model id must not be empty");
    if (entries_.count(id)) throw InvalidArgument("duplicate model id: " + id);
    ModelEntry e{id, std::make_shared<const Cbn>(std::move(model)), std::move(algorithm), std::move(fitted_at),
                 std::move(source)};
    entries_.emplace(std::move(id), std::move(e));
}

const ModelEntry* ModelRegistry::find(const std::string& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

ModelRegistry load_models_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    ModelRegistry reg;
    for (const auto& f : files) {
        std::ifstream in(f);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw DataError(f.string() + ": " + e.what());
        }
        const auto meta = j.value("metadata", json::object());
        reg.add(f.stem().string(), cbn_from_json(j), meta.value("algorithm", ""), meta.value("fitted_at", ""),
                f.filename().string());
    }
    return reg;
}

void save_model(const Cbn& net, const std::filesystem::path& path, const std::string& algorithm,
                const std::string& fitted_at) {
    auto j = to_json(net);
    j["metadata"] = {{"algorithm", algorithm}, {"fitted_at", fitted_at}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

HttpResult handle_models(const ModelRegistry& reg) {
    json models = json::array();
    for (const auto& [id, e] : reg.entries()) {
        models.push_back({{"id", id},
                          {"algorithm", e.algorithm},
                          {"fitted_at", e.fitted_at},
                          {"source", e.source},
                          {"nodes", e.model->size()},
                          {"edges", e.model->dag().num_edges()}});
    }
    return {200, {{"schema_version", kWireSchemaVersion}, {"models", models}}};
}

HttpResult handle_graph(const ModelRegistry& reg, const std::string& id) {
    return guarded(reg, id, [](const Cbn& net) {
        json j = graph_to_json(net.dag());
        json states = json::object();
        for (const auto& v : net.variables()) states[v.name] = v.states;
        j["states"] = states;
        return j;
    });
}

HttpResult handle_query(const ModelRegistry& reg, const std::string& id, const std::string& body) {
    return guarded(reg, id, [&](const Cbn& net) {
        const auto req = parse_body(body);
        const int target = net.index_of(required_string(req, "target"));
        const InterventionQuery q{target, resolve(net, assignments(req, "do_assignments")),
                                  resolve(net, assignments(req, "evidence"))};
        validate(net, q);
        const auto post = intervene(net, q);
        const auto base = posterior(net, target);
        std::vector<double> delta(post.size());
        for (std::size_t k = 0; k < post.size(); ++k) delta[k] = 100.0 * (post[k] - base[k]);
        return json{{"target", net.name(target)},
                    {"states", net.variables()[static_cast<std::size_t>(target)].states},
                    {"posterior", post},
                    {"baseline", base},
                    {"delta_pp", delta}};
    });
}

HttpResult handle_ace(const ModelRegistry& reg, const std::string& id, const std::string& body) {
    return guarded(reg, id, [&](const Cbn& net) {
        const auto req = parse_body(body);
        const int target = net.index_of(required_string(req, "target"));
        const int ts = target_state(net, target,
                                    req.contains("target_state") ? std::optional(label(req["target_state"])) : std::nullopt);
        const int x = net.index_of(required_string(req, "treatment"));
        const int x1 = net.state_of(x, required_string(req, "treated"));
        const int x0 = net.state_of(x, required_string(req, "control"));
        if (x == target) throw InvalidArgument("treatment and target must differ");
        return json{{"target", net.name(target)},
                    {"target_state", state_label(net, target, ts)},
                    {"treatment", net.name(x)},
                    {"treated", state_label(net, x, x1)},
                    {"control", state_label(net, x, x0)},
                    {"ace", ace(net, target, ts, x, x1, x0)}};
    });
}

HttpResult handle_sensitivity(const ModelRegistry& reg, const std::string& id, const std::string& target,
                              const std::optional<std::string>& state) {
    return guarded(reg, id, [&](const Cbn& net) {
        if (target.empty()) throw InvalidArgument("missing query parameter: target");
        const int t = net.index_of(target);
        return to_json(sensitivity(net, t, target_state(net, t, state)));
    });
}

json openapi_spec() {
    const json error_ref = {{"$ref", "#/components/schemas/Error"}};
    auto op = [&](const std::string& summary, std::vector<int> errors) {
        json responses = {{"200", {{"description", "ok"}}}};
        for (int e : errors) {
            responses[std::to_string(e)] = {{"description", "error"},
                                            {"content", {{"application/json", {{"schema", error_ref}}}}}};
        }
        return json{{"summary", summary}, {"responses", responses}};
    };
    const json id_param = {{"name", "id"}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}};
    const json assignment = {{"type", "object"}, {"additionalProperties", {{"type", "string"}}}};

    auto query = op("Posterior under evidence and interventions, with baseline and delta in percentage points",
                    {400, 404, 422, 503});
    query["parameters"] = {id_param};
    query["requestBody"] = {{"content",
                             {{"application/json",
                               {{"schema",
                                 {{"type", "object"},
                                  {"required", {"target"}},
                                  {"properties",
                                   {{"target", {{"type", "string"}}},
                                    {"evidence", assignment},
                                    {"do_assignments", assignment}}}}}}}}}};
    auto ace_op = op("Average causal effect of treated vs control on P(target = target_state)", {400, 404, 422, 503});
    ace_op["parameters"] = {id_param};
    ace_op["requestBody"] = {
        {"content",
         {{"application/json",
           {{"schema",
             {{"type", "object"},
              {"required", {"target", "treatment", "treated", "control"}},
              {"properties",
               {{"target", {{"type", "string"}}},
                {"target_state", {{"type", "string"}}},
                {"treatment", {{"type", "string"}}},
                {"treated", {{"type", "string"}}},
                {"control", {{"type", "string"}}}}}}}}}}}};
    auto sens = op("CPT-entry derivatives of P(target = state) and per-node ranking", {400, 404, 503});
    sens["parameters"] = {id_param,
                          {{"name", "target"}, {"in", "query"}, {"required", true}, {"schema", {{"type", "string"}}}},
                          {{"name", "state"}, {"in", "query"}, {"required", false}, {"schema", {{"type", "string"}}}}};
    auto graph = op("Model DAG in the shared graph schema", {404});
    graph["parameters"] = {id_param};

    return {{"openapi", "3.0.3"},
            {"info", {{"title", "cbnkit query service"}, {"version", kWireSchemaVersion}}},
            {"paths",
             {{"/models", {{"get", op("Registered models with node and edge counts", {})}}},
              {"/models/{id}/graph", {{"get", graph}}},
              {"/models/{id}/query", {{"post", query}}},
              {"/models/{id}/ace", {{"post", ace_op}}},
              {"/models/{id}/sensitivity", {{"get", sens}}},
              {"/spec", {{"get", op("This document", {})}}}}},
            {"components",
             {{"schemas",
               {{"Error",
                 {{"type", "object"},
                  {"properties",
                   {{"schema_version", {{"type", "string"}}},
                    {"error",
                     {{"type", "object"},
                      {"properties", {{"status", {{"type", "integer"}}}, {"message", {{"type", "string"}}}}}}}}}}}}}}}};
}

struct Service::Impl {
    std::shared_ptr<const ModelRegistry> registry;
    ServiceOptions options;
    httplib::Server server;

    void reply(httplib::Response& res, const std::function<HttpResult()>& work) const {
        const auto start = std::chrono::steady_clock::now();
        // Detached so a timed-out request returns immediately; `work` holds the registry alive.
        auto promise = std::make_shared<std::promise<HttpResult>>();
        auto future = promise->get_future();
        std::thread([promise, work]() {
            try {
                promise->set_value(work());
            } catch (const std::exception& e) {
                promise->set_value(error(500, e.what()));
            }
        }).detach();
        HttpResult r = future.wait_for(options.timeout) == std::future_status::ready
                           ? future.get()
                           : error(503, "computation exceeded the " + std::to_string(options.timeout.count()) +
                                            " ms timeout");
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        res.status = r.status;
        res.set_header("X-Elapsed-Ms", std::to_string(ms));
        res.set_content(r.body.dump(), "application/json");
    }
};

Service::Service(ModelRegistry registry, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    impl_->registry = std::make_shared<const ModelRegistry>(std::move(registry));
    impl_->options = std::move(options);
    auto* impl = impl_.get();
    auto& svr = impl->server;
    const auto reg = impl->registry;

    svr.set_post_routing_handler([impl](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", impl->options.cors_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    svr.Get("/models", [impl, reg](const httplib::Request&, httplib::Response& res) {
        impl->reply(res, [reg] { return handle_models(*reg); });
    });
    svr.Get(R"(/models/([^/]+)/graph)", [impl, reg](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        impl->reply(res, [reg, id] { return handle_graph(*reg, id); });
    });
    svr.Post(R"(/models/([^/]+)/query)", [impl, reg](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1], body = req.body;
        impl->reply(res, [reg, id, body] { return handle_query(*reg, id, body); });
    });
    svr.Post(R"(/models/([^/]+)/ace)", [impl, reg](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1], body = req.body;
        impl->reply(res, [reg, id, body] { return handle_ace(*reg, id, body); });
    });
    svr.Get(R"(/models/([^/]+)/sensitivity)", [impl, reg](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const std::string target = req.get_param_value("target");
        std::optional<std::string> state;
        if (req.has_param("state")) state = req.get_param_value("state");
        impl->reply(res, [reg, id, target, state] { return handle_sensitivity(*reg, id, target, state); });
    });
    svr.Get("/spec", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(openapi_spec().dump(), "application/json");
    });
    svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        auto r = error(res.status, "no route for " + req.method + " " + req.path);
        res.set_content(r.body.dump(), "application/json");
    });
}

Service::~Service() { stop(); }

int Service::bind() {
    const auto& o = impl_->options;
    int port = o.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(o.bind);
    } else if (!impl_->server.bind_to_port(o.bind, port)) {
        port = -1;
    }
    if (port < 0) throw Error("cannot bind " + o.bind + ":" + std::to_string(o.port));
    return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace cbnkit
