#include "cbnkit/pipeline.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cbnkit/average.hpp"
#include "cbnkit/cbn.hpp"
#include "cbnkit/graph_io.hpp"
#include "cbnkit/knowledge.hpp"
#include "cbnkit/metrics.hpp"
#include "cbnkit/service.hpp"
#include "cbnkit/stats.hpp"

namespace cbnkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve_path(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return resolve_path(base, j.at(key).get<std::string>());
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// Collects outputs and times the current stage.
class Recorder {
public:
    Recorder(const fs::path& root, RunManifest& m) : root_(root), manifest_(m) {}

    template <typename F>
    auto stage(const std::string& name, F&& f) {
        spdlog::info("stage {}", name);
        current_ = name;
        const auto start = std::chrono::steady_clock::now();
        auto finish = [&] {
            manifest_.stage_seconds.emplace_back(
                name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        };
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                finish();
            } else {
                auto r = f();
                finish();
                return r;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    }

    void add(const fs::path& p) {
        manifest_.outputs.push_back({fs::relative(p, root_), current_, {}, 0});
    }
    void add(const std::vector<fs::path>& ps) {
        for (const auto& p : ps) add(p);
    }
    void warn(const std::string& w) {
        spdlog::warn("{}", w);
        manifest_.warnings.push_back(w);
    }

private:
    fs::path root_;
    RunManifest& manifest_;
    std::string current_;
};

}  // namespace

void RunConfig::validate() const {
    auto must_exist = [](const fs::path& p, const char* what) {
        if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    must_exist(dataset, "dataset");
    if (variables) must_exist(*variables, "variable spec");
    if (knowledge) must_exist(*knowledge, "knowledge graph");
    if (graph_dir) must_exist(*graph_dir, "graph directory");
    if (algorithms.empty() && !graph_dir) throw ConfigError("no algorithms and no graph directory: nothing to average");
    if (min_freq && *min_freq < 1) throw ConfigError("average_min_freq must be at least 1");
    if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
    if (!(pseudo_count >= 0.0)) throw ConfigError("pseudo_count must be non-negative");
    if (!(sensitivity_epsilon > 0.0 && sensitivity_epsilon < 0.5)) throw ConfigError("sensitivity_epsilon must lie in (0, 0.5)");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig run_config_from_json(const json& j, const fs::path& base) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig c;
    try {
        c.dataset = resolve_path(base, j.at("dataset").get<std::string>());
        c.raw_dataset = j.value("raw_dataset", false);
        c.variables = optional_path(j, "variables", base);
        c.knowledge = optional_path(j, "knowledge", base);
        c.graph_dir = optional_path(j, "graph_dir", base);
        c.seed = j.value("seed", std::uint64_t{1});
        LearnConfig defaults;
        defaults.seed = c.seed;
        if (j.contains("learn_defaults")) defaults = learn_config_from_json(j.at("learn_defaults"), defaults);
        for (const auto& a : j.value("algorithms", json::array())) {
            c.algorithms.push_back(a.is_string() ? learn_config_from_json({{"algorithm", a}}, defaults)
                                                 : learn_config_from_json(a, defaults));
        }
        if (j.contains("average_min_freq")) {
            const auto& m = j.at("average_min_freq");
            if (m.is_string()) {
                if (m.get<std::string>() != "auto") throw ConfigError("average_min_freq must be an integer or \"auto\"");
            } else {
                c.min_freq = m.get<int>();
            }
        }
        c.cv_folds = j.value("cv_folds", 10);
        if (j.contains("target")) c.target = j.at("target").get<std::string>();
        if (j.contains("target_state")) c.target_state = j.at("target_state").get<std::string>();
        c.intervene = j.value("intervene", std::vector<std::string>{});
        c.effect_matrix = j.value("effect_matrix", true);
        c.pseudo_count = j.value("pseudo_count", 1.0);
        c.sensitivity_epsilon = j.value("sensitivity_epsilon", 1e-4);
        c.output_dir = resolve_path(base, j.value("output_dir", std::string("out")));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return run_config_from_json(json::parse(in), path.parent_path());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json to_json(const RunConfig& c) {
    auto opt = [](const auto& o) { return o ? json(o->string()) : json(nullptr); };
    json algos = json::array();
    for (const auto& a : c.algorithms) algos.push_back(to_json(a));
    return {{"dataset", c.dataset.string()},
            {"raw_dataset", c.raw_dataset},
            {"variables", opt(c.variables)},
            {"knowledge", opt(c.knowledge)},
            {"graph_dir", opt(c.graph_dir)},
            {"algorithms", algos},
            {"average_min_freq", c.min_freq ? json(*c.min_freq) : json("auto")},
            {"cv_folds", c.cv_folds},
            {"target", c.target ? json(*c.target) : json(nullptr)},
            {"target_state", c.target_state ? json(*c.target_state) : json(nullptr)},
            {"intervene", c.intervene},
            {"effect_matrix", c.effect_matrix},
            {"pseudo_count", c.pseudo_count},
            {"sensitivity_epsilon", c.sensitivity_epsilon},
            {"output_dir", c.output_dir.string()},
            {"seed", c.seed}};
}

std::vector<VariableSpec> load_specs(const std::optional<fs::path>& path) {
    return path ? load_variable_specs(*path) : brfss_variables();
}

Dataset load_dataset(const fs::path& path, const std::vector<VariableSpec>& specs, bool raw) {
    if (!raw) return load_csv(path, specs);
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    return preprocess(read_raw_csv(path, names), specs);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

json to_json(const RunManifest& m, const RunConfig& c) {
    json outputs = json::array();
    for (const auto& o : m.outputs) {
        outputs.push_back({{"path", o.path.generic_string()}, {"stage", o.stage}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    }
    json stages = json::array();
    for (const auto& [name, secs] : m.stage_seconds) stages.push_back({{"stage", name}, {"seconds", secs}});
    return {{"schema_version", kWireSchemaVersion},
            {"tool", "cbnkit"},
            {"created_at", utc_now()},
            {"seed", c.seed},
            {"config", to_json(c)},
            {"status", m.timed_out ? "timeout-partial" : "ok"},
            {"warnings", m.warnings},
            {"stages", stages},
            {"outputs", outputs}};
}

RunManifest run_pipeline(const RunConfig& config) {
    config.validate();
    const fs::path out = config.output_dir;
    for (const char* sub : {"data", "graphs", "metrics", "models", "reports"}) fs::create_directories(out / sub);
    RunManifest manifest;
    Recorder rec(out, manifest);

    const Dataset data = rec.stage("load", [&] {
        auto d = load_dataset(config.dataset, load_specs(config.variables), config.raw_dataset);
        if (config.raw_dataset) {
            write_csv(d, out / "data" / "dataset.csv");
            rec.add(out / "data" / "dataset.csv");
        }
        const auto m = marginals(d);
        write_marginals_csv(m, out / "data" / "marginals.csv");
        write_json(marginals_json(m), out / "data" / "marginals.json");
        rec.add({out / "data" / "marginals.csv", out / "data" / "marginals.json"});
        spdlog::info("{} rows, {} variables, {} dropped", d.n_rows(), d.n_vars(), d.dropped_rows());
        return d;
    });
    if (config.target) {
        if (!data.find(*config.target)) throw ConfigError("target is not a dataset variable: " + *config.target);
    }
    std::optional<KnowledgeGraph> knowledge;
    if (config.knowledge) {
        knowledge = rec.stage("knowledge", [&] { return load_knowledge_csv(*config.knowledge, data.names()); });
    }

    // Learned graphs as produced (possibly CPDAGs) and their DAG versions.
    std::vector<std::pair<std::string, Graph>> raw_graphs, dags;
    std::vector<json> score_rows;
    std::map<std::string, int> stems;
    for (const auto& lc : config.algorithms) {
        std::string stem = to_string(lc.algorithm);
        if (++stems[stem] > 1) stem += "_" + std::to_string(stems[stem]);
        rec.stage("learn:" + stem, [&] {
            auto r = learn(data, lc);
            if (r.timed_out) {
                manifest.timed_out = true;
                rec.warn(stem + " hit its time limit; the best graph so far is reported");
            }
            for (const auto& c : r.conflicts) rec.warn(stem + ": " + c);
            rec.add(write_learn_result(r, out / "graphs", stem));
            raw_graphs.emplace_back(stem, r.graph);
            try {
                dags.emplace_back(stem, to_dag(r, config.seed));
            } catch (const NoConsistentExtension& e) {
                rec.warn(stem + " has no consistent DAG extension: " + e.what());
            }
        });
    }
    if (config.graph_dir) {
        rec.stage("external-graphs", [&] {
            for (auto& [name, g] : load_graph_directory(*config.graph_dir, data.names())) {
                raw_graphs.emplace_back(name, g);
                if (is_dag(g)) {
                    dags.emplace_back(name, g);
                } else {
                    try {
                        dags.emplace_back(name, cpdag_to_dag(g, config.seed));
                    } catch (const NoConsistentExtension&) {
                        rec.warn(name + " has no consistent DAG extension");
                    }
                }
            }
        });
    }
    if (raw_graphs.empty()) throw StageError("average", "no graphs to average");

    const auto avg = rec.stage("average", [&] {
        std::vector<Graph> graphs;
        for (const auto& [name, g] : raw_graphs) graphs.push_back(g);
        const int n = static_cast<int>(graphs.size());
        const int m = config.min_freq.value_or(default_threshold(n));
        auto r = model_average(tally(graphs), m);
        write_average_csv(r, out / "graphs" / "average.csv");
        write_json(to_json(r, m, n), out / "graphs" / "average.json");
        std::ofstream(out / "graphs" / "average.dot") << to_dot(r.graph);
        rec.add({out / "graphs" / "average.csv", out / "graphs" / "average.json", out / "graphs" / "average.dot"});
        return r;
    });
    dags.emplace_back("average", avg.graph);

    rec.stage("evaluate", [&] {
        std::ofstream scores(out / "metrics" / "scores.csv");
        scores.precision(17);
        scores << "graph,edges,log_likelihood,penalty,bic\n";
        for (const auto& [name, g] : dags) {
            const auto s = bic_score(data, g);
            scores << name << ',' << g.num_edges() << ',' << s.log_likelihood << ',' << s.penalty << ',' << s.bic << '\n';
        }
        scores.close();
        rec.add(out / "metrics" / "scores.csv");
        if (knowledge) {
            std::vector<MetricReport> reports;
            json arr = json::array();
            for (const auto& [name, g] : dags) {
                for (Tier t : {Tier::High, Tier::Moderate, Tier::Low}) {
                    reports.push_back(evaluate(g, knowledge->slice(t), MetricMode::Strict, name, to_string(t)));
                    arr.push_back(to_json(reports.back()));
                }
            }
            write_metrics_csv(reports, out / "metrics" / "metrics.csv");
            write_json(arr, out / "metrics" / "metrics.json");
            auto table = agreement_table(dags, *knowledge, Tier::High);
            write_agreement_csv(table, out / "metrics" / "agreement.csv");
            write_json(to_json(table), out / "metrics" / "agreement.json");
            rec.add({out / "metrics" / "metrics.csv", out / "metrics" / "metrics.json", out / "metrics" / "agreement.csv",
                     out / "metrics" / "agreement.json"});
        }
        if (config.target) {
            std::ofstream cv(out / "metrics" / "cv.csv");
            cv.precision(17);
            cv << "graph,folds,mean_accuracy,majority_rate\n";
            json arr = json::array();
            for (const auto& [name, g] : dags) {
                auto r = cross_validate(g, data, *config.target, config.cv_folds, config.seed, config.pseudo_count);
                cv << name << ',' << r.folds << ',' << r.mean_accuracy << ',' << r.majority_rate << '\n';
                auto j = to_json(r);
                j["graph"] = name;
                arr.push_back(std::move(j));
            }
            cv.close();
            write_json(arr, out / "metrics" / "cv.json");
            rec.add({out / "metrics" / "cv.csv", out / "metrics" / "cv.json"});
        }
    });

    rec.stage("cbn", [&] {
        const auto fitted = utc_now();
        auto fit_and_save = [&](const std::string& name, const Graph& g) {
            auto net = fit_cpts(g, data, config.pseudo_count);
            save_model(net, out / "models" / (name + ".json"), name, fitted);
            rec.add(out / "models" / (name + ".json"));
            return net;
        };
        for (const auto& [name, g] : dags) {
            if (name != "average") fit_and_save(name, g);
        }
        if (knowledge) fit_and_save("knowledge_high", reorder_nodes(knowledge->slice(Tier::High), data.names()));
        const auto net = fit_and_save("average", avg.graph);
        if (!config.target) {
            rec.warn("no target configured: intervention and sensitivity reports skipped");
            return;
        }
        const int t = net.index_of(*config.target);
        const int ts = config.target_state ? net.state_of(t, *config.target_state) : net.cardinality(t) - 1;
        std::vector<int> vars;
        if (config.intervene.empty()) {
            for (int v = 0; v < static_cast<int>(net.size()); ++v) {
                if (v != t) vars.push_back(v);
            }
        } else {
            for (const auto& name : config.intervene) vars.push_back(net.index_of(name));
        }
        auto delta = intervention_delta_report(net, t, ts, vars, config.effect_matrix);
        write_delta_csv(delta, out / "reports" / "interventions.csv");
        write_json(to_json(delta), out / "reports" / "interventions.json");
        rec.add({out / "reports" / "interventions.csv", out / "reports" / "interventions.json"});
        if (config.effect_matrix) {
            write_effect_matrix_csv(delta, out / "reports" / "effect_matrix.csv");
            rec.add(out / "reports" / "effect_matrix.csv");
        }
        auto sens = sensitivity(net, t, ts, config.sensitivity_epsilon);
        write_sensitivity_csv(sens, out / "reports" / "sensitivity.csv");
        write_json(to_json(sens), out / "reports" / "sensitivity.json");
        rec.add({out / "reports" / "sensitivity.csv", out / "reports" / "sensitivity.json"});
    });

    for (auto& o : manifest.outputs) {
        o.sha256 = sha256_file(out / o.path);
        o.bytes = fs::file_size(out / o.path);
    }
    write_json(to_json(manifest, config), out / "manifest.json");
    return manifest;
}

}  // namespace cbnkit
