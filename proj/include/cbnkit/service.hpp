#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbnkit/cbn.hpp"
#include "json.hpp"

namespace cbnkit {

inline constexpr const char* kWireSchemaVersion = "1.0";

struct ModelEntry {
    std::string id;
    std::shared_ptr<const Cbn> model;
    std::string algorithm;
    std::string fitted_at;
    std::string source;
};

/// Immutable once the service starts; ids are unique.
class ModelRegistry {
public:
    /// Throws InvalidArgument on a duplicate or empty id.
    void add(std::string id, Cbn model, std::string algorithm = {}, std::string fitted_at = {}, std::string source = {});
    const ModelEntry* find(const std::string& id) const;
    const std::map<std::string, ModelEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, ModelEntry> entries_;
};

/// Registers every *.json in `dir` (sorted) under its file stem. Optional
/// top-level "metadata": {"algorithm", "fitted_at"} is carried along.
ModelRegistry load_models_dir(const std::filesystem::path& dir);

/// Writes a network plus metadata in the format load_models_dir reads.
void save_model(const Cbn& net, const std::filesystem::path& path, const std::string& algorithm,
                const std::string& fitted_at = {});

struct HttpResult {
    int status = 200;
    nlohmann::json body;
};

/// Request handlers, independent of the HTTP layer. Bodies always carry
/// "schema_version"; errors are {"error": {"status", "message"}}.
HttpResult handle_models(const ModelRegistry& reg);
HttpResult handle_graph(const ModelRegistry& reg, const std::string& id);
HttpResult handle_query(const ModelRegistry& reg, const std::string& id, const std::string& body);
HttpResult handle_ace(const ModelRegistry& reg, const std::string& id, const std::string& body);
HttpResult handle_sensitivity(const ModelRegistry& reg, const std::string& id, const std::string& target,
                              const std::optional<std::string>& state);
nlohmann::json openapi_spec();

struct ServiceOptions {
    std::string bind = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::chrono::milliseconds timeout{30000};
    std::string cors_origin = "*";
};

class Service {
public:
    Service(ModelRegistry registry, ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the socket and returns the port. Throws Error on failure.
    int bind();
    /// Blocks serving requests until stop().
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cbnkit
