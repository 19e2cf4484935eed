// cbnkit command-line entry point: one subcommand per pipeline stage plus
// `run` (whole pipeline) and `serve` (query service).

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cbnkit/average.hpp"
#include "cbnkit/cbn.hpp"
#include "cbnkit/graph_io.hpp"
#include "cbnkit/knowledge.hpp"
#include "cbnkit/learn.hpp"
#include "cbnkit/metrics.hpp"
#include "cbnkit/pipeline.hpp"
#include "cbnkit/service.hpp"

namespace fs = std::filesystem;
using namespace cbnkit;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;
constexpr int kTimeoutPartial = 4;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("cbnkit");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    const char* level = std::getenv("CBNKIT_LOG_LEVEL");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

/// Options shared by the stage subcommands; unset ones fall back to --config.
struct Common {
    std::string config;
    std::string data;
    std::string variables;
    bool raw = false;
    std::string out;
    std::uint64_t seed = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* raw_opt = nullptr;
    std::optional<RunConfig> run;

    void add_to(CLI::App* app, bool with_data = true) {
        app->add_option("--config", config, "Run config (JSON); supplies defaults for unset flags")->check(CLI::ExistingFile);
        if (with_data) {
            app->add_option("--data", data, "Categorical dataset CSV");
            app->add_option("--variables", variables, "Variable spec JSON (default: built-in BRFSS specs)");
            raw_opt = app->add_flag("--raw", raw, "Dataset holds numeric source codes that need recoding");
        }
        app->add_option("--out", out, "Output directory or file");
        seed_opt = app->add_option("--seed", seed, "Global seed");
    }

    void resolve() {
        if (config.empty()) return;
        run = load_run_config(config);
        if (data.empty()) data = run->dataset.string();
        if (variables.empty() && run->variables) variables = run->variables->string();
        if (raw_opt && raw_opt->count() == 0) raw = run->raw_dataset;
        if (out.empty()) out = run->output_dir.string();
        if (seed_opt->count() == 0) seed = run->seed;
    }

    std::optional<fs::path> spec_path() const {
        return variables.empty() ? std::nullopt : std::optional<fs::path>(variables);
    }

    Dataset dataset() const {
        if (data.empty()) throw ConfigError("--data (or a config with a dataset) is required");
        if (!fs::exists(data)) throw ConfigError("dataset not found: " + data);
        return load_dataset(data, load_specs(spec_path()), raw);
    }

    fs::path out_dir(const char* fallback) const {
        fs::path p = out.empty() ? fs::path(fallback) : fs::path(out);
        fs::create_directories(p);
        return p;
    }
};

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// "A=1" -> ("A", "1").
NamedAssignment parse_pairs(const std::vector<std::string>& items, const char* flag) {
    NamedAssignment out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw ConfigError(std::string(flag) + " expects VAR=STATE, got '" + item + "'");
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

/// Network from --model, or fitted from --graph and the dataset.
struct ModelSource {
    std::string model;
    std::string graph;
    double pseudo_count = 1.0;

    void add_to(CLI::App* app) {
        app->add_option("--model", model, "Fitted network JSON");
        app->add_option("--graph", graph, "DAG (CSV or JSON) to fit on --data");
        app->add_option("--pseudo-count", pseudo_count, "Dirichlet pseudo count for CPT fitting")->check(CLI::NonNegativeNumber);
    }

    Cbn load(const Common& c) const {
        if (!model.empty()) return load_cbn(model);
        if (graph.empty()) throw ConfigError("either --model or --graph with --data is required");
        const auto data = c.dataset();
        return fit_cpts(load_graph(graph, data.names()), data, pseudo_count);
    }
};

int target_state_of(const Cbn& net, int t, const std::string& label) {
    return label.empty() ? net.cardinality(t) - 1 : net.state_of(t, label);
}

int cmd_preprocess(Common& c, const std::string& input) {
    c.resolve();
    const std::string src = input.empty() ? c.data : input;
    if (src.empty() || !fs::exists(src)) throw ConfigError("raw input CSV not found: " + src);
    const auto data = load_dataset(src, load_specs(c.spec_path()), true);
    const auto dir = c.out_dir("out/data");
    write_csv(data, dir / "dataset.csv");
    const auto m = marginals(data);
    write_marginals_csv(m, dir / "marginals.csv");
    write_json_file(marginals_json(m), dir / "marginals.json");
    spdlog::info("{} rows kept, {} dropped; wrote {}", data.n_rows(), data.dropped_rows(), (dir / "dataset.csv").string());
    return kOk;
}

int cmd_learn(Common& c, const std::string& algorithm, const std::string& learn_config, double alpha,
              CLI::Option* alpha_opt, std::optional<int> max_indegree, double time_limit, CLI::Option* time_opt,
              const std::string& stem) {
    c.resolve();
    LearnConfig lc;
    lc.seed = c.seed;
    if (!learn_config.empty()) {
        std::ifstream in(learn_config);
        if (!in) throw ConfigError("cannot open " + learn_config);
        lc = learn_config_from_json(json::parse(in), lc);
    }
    if (!algorithm.empty()) lc.algorithm = parse_algorithm(algorithm);
    if (alpha_opt->count()) lc.alpha = alpha;
    if (max_indegree) lc.max_indegree = max_indegree;
    if (time_opt->count()) lc.time_limit = std::chrono::milliseconds(static_cast<long long>(time_limit * 1000.0));
    lc.validate();
    const auto data = c.dataset();
    const auto r = learn(data, lc);
    const auto dir = c.out_dir("out/graphs");
    for (const auto& p : write_learn_result(r, dir, stem.empty() ? to_string(lc.algorithm) : stem)) {
        spdlog::info("wrote {}", p.string());
    }
    spdlog::info("{}: {} edges in {:.2f}s", to_string(lc.algorithm), r.graph.num_edges(), r.elapsed.count());
    if (r.timed_out) {
        spdlog::warn("time limit reached; result is partial");
        return kTimeoutPartial;
    }
    return kOk;
}

int cmd_average(Common& c, const std::string& graphs, const std::string& min_freq) {
    c.resolve();
    std::optional<std::vector<std::string>> nodes;
    if (!c.variables.empty()) {
        nodes.emplace();
        for (const auto& s : load_variable_specs(c.variables)) nodes->push_back(s.name);
    }
    if (graphs.empty() || !fs::is_directory(graphs)) throw ConfigError("--graphs must be a directory");
    std::vector<Graph> gs;
    for (auto& [name, g] : load_graph_directory(graphs, nodes)) gs.push_back(std::move(g));
    if (gs.empty()) throw ConfigError("no graphs in " + graphs);
    const int n = static_cast<int>(gs.size());
    int m = default_threshold(n);
    if (min_freq != "auto") {
        try {
            m = std::stoi(min_freq);
        } catch (const std::exception&) {
            throw ConfigError("--min-freq must be an integer or 'auto'");
        }
    }
    const auto r = model_average(tally(gs), m);
    const auto dir = c.out_dir("out/graphs");
    write_average_csv(r, dir / "average.csv");
    write_json_file(to_json(r, m, n), dir / "average.json");
    std::ofstream(dir / "average.dot") << to_dot(r.graph);
    spdlog::info("averaged {} graphs at min_freq {}: {} edges", n, m, r.graph.num_edges());
    return kOk;
}

int cmd_evaluate(Common& c, const std::string& graph, const std::string& ref, const std::string& tier,
                 const std::string& mode) {
    c.resolve();
    if (graph.empty() || ref.empty()) throw ConfigError("--graph and --ref are required");
    Graph reference;
    std::string ref_name = fs::path(ref).stem().string();
    const bool tiered = fs::path(ref).extension() == ".csv" && [&] {
        const auto rows = read_edge_rows(ref);
        return !rows.empty() && rows.front().extra.count("tier") > 0;
    }();
    if (tiered) {
        reference = load_knowledge_csv(ref).slice(parse_tier(tier));
        ref_name += ":" + tier;
    } else {
        reference = load_graph(ref);
    }
    const auto g = load_graph(graph, reference.nodes());
    const auto rep = evaluate(g, reference, parse_metric_mode(mode), fs::path(graph).stem().string(), ref_name);
    const auto j = to_json(rep);
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) {
        const auto dir = c.out_dir("out/metrics");
        write_metrics_csv({rep}, dir / "metrics.csv");
        write_json_file(j, dir / "metrics.json");
    }
    return kOk;
}

int cmd_fit(Common& c, const std::string& graph, double pseudo_count, const std::string& label) {
    c.resolve();
    if (graph.empty()) throw ConfigError("--graph is required");
    const auto data = c.dataset();
    const auto net = fit_cpts(load_graph(graph, data.names()), data, pseudo_count);
    fs::path path = c.out.empty() ? fs::path("out/models") / (fs::path(graph).stem().string() + ".json") : fs::path(c.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_model(net, path, label.empty() ? fs::path(graph).stem().string() : label);
    spdlog::info("wrote {}", path.string());
    return kOk;
}

int cmd_intervene(Common& c, const ModelSource& src, const std::string& target, const std::string& target_state,
                  const std::vector<std::string>& dos, const std::vector<std::string>& evidence, bool report,
                  const std::vector<std::string>& report_vars) {
    c.resolve();
    const auto net = src.load(c);
    const int t = net.index_of(target);
    if (report) {
        std::vector<int> vars;
        for (const auto& v : report_vars) vars.push_back(net.index_of(v));
        if (vars.empty()) {
            for (int v = 0; v < static_cast<int>(net.size()); ++v) {
                if (v != t) vars.push_back(v);
            }
        }
        const auto r = intervention_delta_report(net, t, target_state_of(net, t, target_state), vars);
        const auto dir = c.out_dir("out/reports");
        write_delta_csv(r, dir / "interventions.csv");
        write_effect_matrix_csv(r, dir / "effect_matrix.csv");
        write_json_file(to_json(r), dir / "interventions.json");
        spdlog::info("wrote {}", (dir / "interventions.json").string());
        return kOk;
    }
    const InterventionQuery q{t, resolve(net, parse_pairs(dos, "--do")), resolve(net, parse_pairs(evidence, "--evidence"))};
    const auto post = intervene(net, q);
    const auto base = posterior(net, t);
    std::vector<double> delta(post.size());
    for (std::size_t k = 0; k < post.size(); ++k) delta[k] = 100.0 * (post[k] - base[k]);
    const json j{{"schema_version", kWireSchemaVersion},
                 {"target", target},
                 {"states", net.variables()[static_cast<std::size_t>(t)].states},
                 {"posterior", post},
                 {"baseline", base},
                 {"delta_pp", delta}};
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) write_json_file(j, c.out_dir("out/reports") / "intervention.json");
    return kOk;
}

int cmd_sensitivity(Common& c, const ModelSource& src, const std::string& target, const std::string& target_state,
                    double epsilon) {
    c.resolve();
    const auto net = src.load(c);
    const int t = net.index_of(target);
    const auto r = sensitivity(net, t, target_state_of(net, t, target_state), epsilon);
    const auto dir = c.out_dir("out/reports");
    write_sensitivity_csv(r, dir / "sensitivity.csv");
    write_json_file(to_json(r), dir / "sensitivity.json");
    for (std::size_t i = 0; i < std::min<std::size_t>(r.ranking.size(), 10); ++i) {
        std::cout << r.ranking[i].node << '\t' << r.ranking[i].max_abs_derivative << '\n';
    }
    return kOk;
}

int cmd_cv(Common& c, const std::string& graph, const std::string& target, int folds, double pseudo_count) {
    c.resolve();
    if (graph.empty()) throw ConfigError("--graph is required");
    std::string tgt = target;
    if (tgt.empty() && c.run && c.run->target) tgt = *c.run->target;
    if (tgt.empty()) throw ConfigError("--target is required");
    const auto data = c.dataset();
    const auto r = cross_validate(load_graph(graph, data.names()), data, tgt, folds, c.seed, pseudo_count);
    const auto j = to_json(r);
    std::cout << j.dump(2) << '\n';
    if (!c.out.empty()) write_json_file(j, c.out_dir("out/metrics") / "cv.json");
    return kOk;
}

Service* g_service = nullptr;

int cmd_serve(const std::string& models_dir, const std::string& bind, int port, double timeout) {
    if (models_dir.empty()) throw ConfigError("--models-dir is required");
    auto reg = load_models_dir(models_dir);
    const auto n_models = reg.size();
    ServiceOptions opts;
    opts.bind = bind;
    opts.port = port;
    opts.timeout = std::chrono::milliseconds(static_cast<long long>(timeout * 1000.0));
    Service service(std::move(reg), opts);
    const int bound = service.bind();
    g_service = &service;
    std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
    std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
    spdlog::info("serving {} models on http://{}:{}", n_models, bind, bound);
    std::cout << "listening on " << bind << ':' << bound << std::endl;
    service.run();
    g_service = nullptr;
    return kOk;
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
    auto rc = load_run_config(config);
    if (seed) {
        rc.seed = *seed;
        for (auto& a : rc.algorithms) a.seed = *seed;
    }
    if (!out.empty()) rc.output_dir = out;
    const auto m = run_pipeline(rc);
    spdlog::info("{} outputs written to {}", m.outputs.size(), rc.output_dir.string());
    return m.timed_out ? kTimeoutPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Discrete causal discovery and intervention toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::function<int()> action;

    Common pre;
    std::string pre_input;
    auto* s_pre = app.add_subcommand("preprocess", "Recode a raw numeric CSV and write marginals");
    pre.add_to(s_pre);
    s_pre->add_option("--input", pre_input, "Raw CSV (default: --data)");
    s_pre->callback([&] { action = [&] { return cmd_preprocess(pre, pre_input); }; });

    Common lrn;
    std::string algorithm, learn_config, stem;
    double alpha = 0.05, time_limit = 14400;
    std::optional<int> max_indegree;
    auto* s_learn = app.add_subcommand("learn", "Learn one structure");
    lrn.add_to(s_learn);
    s_learn->add_option("--algorithm", algorithm, "pc-stable | gs | iamb | fast-iamb | hc | tabu | mmhc");
    s_learn->add_option("--learn-config", learn_config, "LearnConfig JSON")->check(CLI::ExistingFile);
    auto* alpha_opt = s_learn->add_option("--alpha", alpha, "CI test significance level (default 0.05)");
    s_learn->add_option("--max-indegree", max_indegree, "Parent limit for score-based search");
    auto* time_opt = s_learn->add_option("--time-limit", time_limit, "Seconds (default 14400)");
    s_learn->add_option("--stem", stem, "Output file stem (default: algorithm name)");
    s_learn->callback([&] {
        action = [&] { return cmd_learn(lrn, algorithm, learn_config, alpha, alpha_opt, max_indegree, time_limit, time_opt, stem); };
    });

    Common avg;
    std::string graphs_dir, min_freq = "auto";
    auto* s_avg = app.add_subcommand("average", "Model-average a directory of graphs");
    avg.add_to(s_avg);
    s_avg->add_option("--graphs", graphs_dir, "Directory of CSV/JSON graphs")->required();
    s_avg->add_option("--min-freq", min_freq, "Minimum edge frequency or 'auto' for ceil(n/3)");
    s_avg->callback([&] { action = [&] { return cmd_average(avg, graphs_dir, min_freq); }; });

    Common ev;
    std::string ev_graph, ev_ref, tier = "high", mode = "strict";
    auto* s_ev = app.add_subcommand("evaluate", "Compare a DAG with a reference or knowledge tier");
    ev.add_to(s_ev, false);
    s_ev->add_option("--graph", ev_graph, "Learned DAG")->required();
    s_ev->add_option("--ref", ev_ref, "Reference DAG or tiered knowledge CSV")->required();
    s_ev->add_option("--tier", tier, "high | moderate | low");
    s_ev->add_option("--mode", mode, "strict | skeleton");
    s_ev->callback([&] { action = [&] { return cmd_evaluate(ev, ev_graph, ev_ref, tier, mode); }; });

    Common fit;
    std::string fit_graph, fit_label;
    double fit_pseudo = 1.0;
    auto* s_fit = app.add_subcommand("fit", "Fit CPTs of a DAG and save the network");
    fit.add_to(s_fit);
    s_fit->add_option("--graph", fit_graph, "DAG (CSV or JSON)")->required();
    s_fit->add_option("--pseudo-count", fit_pseudo, "Dirichlet pseudo count")->check(CLI::NonNegativeNumber);
    s_fit->add_option("--label", fit_label, "Algorithm label stored with the model");
    s_fit->callback([&] { action = [&] { return cmd_fit(fit, fit_graph, fit_pseudo, fit_label); }; });

    Common iv;
    ModelSource iv_src;
    std::string iv_target, iv_state;
    std::vector<std::string> iv_do, iv_ev, iv_vars;
    bool iv_report = false;
    auto* s_iv = app.add_subcommand("intervene", "Interventional query or full delta report");
    iv.add_to(s_iv);
    iv_src.add_to(s_iv);
    s_iv->add_option("--target", iv_target, "Target variable")->required();
    s_iv->add_option("--target-state", iv_state, "Target state for reports (default: last state)");
    s_iv->add_option("--do", iv_do, "VAR=STATE intervention")->take_all();
    s_iv->add_option("--evidence", iv_ev, "VAR=STATE observation")->take_all();
    s_iv->add_flag("--report", iv_report, "Delta report over every single-variable intervention");
    s_iv->add_option("--report-vars", iv_vars, "Variables for --report (default: all others)");
    s_iv->callback([&] {
        action = [&] { return cmd_intervene(iv, iv_src, iv_target, iv_state, iv_do, iv_ev, iv_report, iv_vars); };
    });

    Common sn;
    ModelSource sn_src;
    std::string sn_target, sn_state;
    double epsilon = 1e-4;
    auto* s_sn = app.add_subcommand("sensitivity", "CPT-parameter sensitivity of P(target = state)");
    sn.add_to(s_sn);
    sn_src.add_to(s_sn);
    s_sn->add_option("--target", sn_target, "Target variable")->required();
    s_sn->add_option("--target-state", sn_state, "Target state (default: last state)");
    s_sn->add_option("--epsilon", epsilon, "Finite-difference step");
    s_sn->callback([&] { action = [&] { return cmd_sensitivity(sn, sn_src, sn_target, sn_state, epsilon); }; });

    Common cv;
    std::string cv_graph, cv_target;
    int folds = 10;
    double cv_pseudo = 1.0;
    auto* s_cv = app.add_subcommand("cv", "Stratified k-fold prediction accuracy of a DAG");
    cv.add_to(s_cv);
    s_cv->add_option("--graph", cv_graph, "DAG (CSV or JSON)")->required();
    s_cv->add_option("--target", cv_target, "Target variable");
    s_cv->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000));
    s_cv->add_option("--pseudo-count", cv_pseudo, "Dirichlet pseudo count")->check(CLI::NonNegativeNumber);
    s_cv->callback([&] { action = [&] { return cmd_cv(cv, cv_graph, cv_target, folds, cv_pseudo); }; });

    std::string models_dir, bind = "127.0.0.1";
    int port = 8080;
    double timeout = 30.0;
    auto* s_serve = app.add_subcommand("serve", "Start the HTTP query service");
    s_serve->add_option("--models-dir", models_dir, "Directory of fitted network JSON files")->required();
    s_serve->add_option("--bind", bind, "Bind address");
    s_serve->add_option("--port", port, "Port (0 picks a free one)");
    s_serve->add_option("--timeout", timeout, "Per-request timeout in seconds");
    s_serve->callback([&] { action = [&] { return cmd_serve(models_dir, bind, port, timeout); }; });

    std::string run_config, run_out;
    std::optional<std::uint64_t> run_seed;
    auto* s_run = app.add_subcommand("run", "Run the whole pipeline from a config");
    s_run->add_option("--config", run_config, "Run config (JSON)")->required();
    s_run->add_option("--seed", run_seed, "Override the global seed");
    s_run->add_option("--out", run_out, "Override the output directory");
    s_run->callback([&] { action = [&] { return cmd_run(run_config, run_seed, run_out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }
    try {
        return action();
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kConfigError;
    } catch (const InvalidArgument& e) {
        spdlog::error("invalid argument: {}", e.what());
        return kConfigError;
    } catch (const StageError& e) {
        spdlog::error("{}", e.what());
        return kStageFailure;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kStageFailure;
    }
}
