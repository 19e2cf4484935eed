#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbnkit/data.hpp"
#include "cbnkit/errors.hpp"
#include "cbnkit/learn.hpp"
#include "json.hpp"

namespace cbnkit {

/// Invalid or inconsistent run configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed (CLI exit code 3); what() names the stage.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& message)
        : Error("stage '" + stage + "' failed: " + message), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Paths are resolved against the directory of the config file.
struct RunConfig {
    std::filesystem::path dataset;
    /// Numeric source codes that still need recoding.
    bool raw_dataset = false;
    std::optional<std::filesystem::path> variables;  // default: built-in BRFSS specs
    std::optional<std::filesystem::path> knowledge;
    std::vector<LearnConfig> algorithms;
    std::optional<std::filesystem::path> graph_dir;  // extra graphs to average
    std::optional<int> min_freq;                     // nullopt: default_threshold
    int cv_folds = 10;
    std::optional<std::string> target;
    std::optional<std::string> target_state;  // default: last state of the target
    std::vector<std::string> intervene;       // default: every other variable
    bool effect_matrix = true;
    double pseudo_count = 1.0;
    double sensitivity_epsilon = 1e-4;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 1;

    /// Throws ConfigError for missing paths or out-of-range values.
    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

std::vector<VariableSpec> load_specs(const std::optional<std::filesystem::path>& path);
Dataset load_dataset(const std::filesystem::path& path, const std::vector<VariableSpec>& specs, bool raw);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::filesystem::path path;  // relative to the output directory
    std::string stage;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::vector<ManifestEntry> outputs;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::vector<std::string> warnings;
    bool timed_out = false;
};

nlohmann::json to_json(const RunManifest& m, const RunConfig& c);

/// Runs every stage, writes outputs and manifest.json under output_dir.
/// Throws ConfigError or StageError.
RunManifest run_pipeline(const RunConfig& config);

}  // namespace cbnkit
