#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedsim/engine.hpp"
#include "fedsim/error.hpp"
#include "fedsim/scheduler.hpp"
#include "fedsim/selection.hpp"
#include "fedsim/synthetic.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

struct PopulationConfig {
    int n_clients = 100;
    int feature_dim = 16;
    int n_classes = 10;
    double dirichlet_alpha = 0.1;
    std::pair<int, int> samples_per_client{20, 60};
    int test_set_size = 2000;
    double class_separation = 3.0;
};

struct TracesConfig {
    std::string source = "synthetic";  // "synthetic" | "dir"
    // dir source
    std::string path;
    TraceFormat format = TraceFormat::canonical;
    // synthetic source
    SyntheticTraceConfig synthetic;
};

struct ClientsConfig {
    double pull_bytes = 5e6;
    double push_bytes = 5e6;
    double compute_latency_min = 2e-4;  // seconds/sample/epoch, log-uniform
    double compute_latency_max = 2e-3;
};

struct PolicyConfig {
    std::string name;
    SelectionPolicy policy;
    SchedulerConfig scheduler;
};

struct ExperimentConfig {
    PopulationConfig population;
    TracesConfig traces;
    ClientsConfig clients;
    RunSettings run;
    std::vector<PolicyConfig> policies;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string baseline_policy = "utility-greedy";
    std::string outdir = "out";
};

namespace cfgdetail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& scope,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw UnknownKey(scope.empty() ? key : scope + "." + key);
}

template <typename T>
inline void get_to(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        try {
            it->get_to(out);
        } catch (const json::exception& e) {
            throw ValidationError(key, e.what());
        }
    }
}

inline PredictorSpec parse_predictor(const json& j) {
    require_keys(j, "predictor", {"kind", "ewma_lambda", "ar_order", "ar_fit_window"});
    PredictorSpec spec;
    std::string kind = "windowed-ar";
    get_to(j, "kind", kind);
    if (kind == "last-value") spec.kind = PredictorKind::last_value;
    else if (kind == "ewma") spec.kind = PredictorKind::ewma;
    else if (kind == "windowed-ar") spec.kind = PredictorKind::windowed_ar;
    else throw ValidationError("predictor.kind", "unknown kind: " + kind);
    get_to(j, "ewma_lambda", spec.ewma_lambda);
    get_to(j, "ar_order", spec.ar_order);
    get_to(j, "ar_fit_window", spec.ar_fit_window);
    if (spec.ewma_lambda <= 0.0 || spec.ewma_lambda > 1.0)
        throw ValidationError("predictor.ewma_lambda", "must be in (0, 1]");
    if (spec.ar_order < 1) throw ValidationError("predictor.ar_order", "must be >= 1");
    if (spec.ar_fit_window < spec.ar_order + 1)
        throw ValidationError("predictor.ar_fit_window", "must be >= ar_order + 1");
    return spec;
}

inline SchedulerConfig parse_scheduler(const json& j) {
    require_keys(j, "scheduler",
                 {"th_low", "th_high", "c", "d_high", "d_slow", "w_init", "w_min", "w_max",
                  "predictor", "use_prediction", "use_long_term", "stale_decay"});
    SchedulerConfig cfg;
    get_to(j, "th_low", cfg.th_low);
    get_to(j, "th_high", cfg.th_high);
    get_to(j, "c", cfg.c);
    get_to(j, "d_high", cfg.d_high);
    get_to(j, "d_slow", cfg.d_slow);
    get_to(j, "w_init", cfg.w_init);
    get_to(j, "w_min", cfg.w_min);
    get_to(j, "w_max", cfg.w_max);
    get_to(j, "use_prediction", cfg.use_prediction);
    get_to(j, "use_long_term", cfg.use_long_term);
    get_to(j, "stale_decay", cfg.stale_decay);
    if (j.contains("predictor")) cfg.predictor = parse_predictor(j.at("predictor"));
    cfg.validate();
    return cfg;
}

inline PolicyConfig parse_policy(const json& j, const PopulationConfig& pop) {
    require_keys(j, "policy",
                 {"name", "kind", "participants", "epsilon", "penalty_exponent",
                  "preferred_duration", "scheduler"});
    PolicyConfig pc;
    std::string kind;
    get_to(j, "kind", kind);
    if (kind == "random") pc.policy.kind = PolicyKind::random;
    else if (kind == "utility-greedy") pc.policy.kind = PolicyKind::utility_greedy;
    else if (kind == "dynamicfl") pc.policy.kind = PolicyKind::dynamicfl;
    else throw ValidationError("policy.kind", "unknown kind: " + kind);
    pc.name = kind;
    get_to(j, "name", pc.name);
    get_to(j, "participants", pc.policy.participants);
    get_to(j, "epsilon", pc.policy.epsilon);
    get_to(j, "penalty_exponent", pc.policy.penalty_exponent);
    get_to(j, "preferred_duration", pc.policy.preferred_duration);
    if (j.contains("scheduler")) pc.scheduler = parse_scheduler(j.at("scheduler"));
    if (pc.policy.participants < 1 || pc.policy.participants > pop.n_clients)
        throw ValidationError("policy.participants", "must be in [1, n_clients]");
    if (pc.policy.epsilon < 0.0 || pc.policy.epsilon > 1.0)
        throw ValidationError("policy.epsilon", "must be in [0, 1]");
    if (pc.policy.penalty_exponent < 0.0)
        throw ValidationError("policy.penalty_exponent", "must be >= 0");
    // the short-term greedy baseline is the degenerate one-round window
    // without prediction
    if (pc.policy.kind == PolicyKind::utility_greedy) {
        pc.scheduler.w_init = pc.scheduler.w_min = pc.scheduler.w_max = 1;
        pc.scheduler.use_prediction = false;
        pc.scheduler.use_long_term = false;
    }
    return pc;
}

inline ExperimentConfig parse_config(const json& j) {
    require_keys(j, "",
                 {"population", "traces", "clients", "training", "policies", "seeds", "budgets",
                  "target_accuracy", "eval_every", "baseline_policy", "warmup_rounds",
                  "stall_timeout_s", "outdir"});
    ExperimentConfig cfg;

    if (j.contains("population")) {
        const json& p = j.at("population");
        require_keys(p, "population",
                     {"n_clients", "feature_dim", "n_classes", "dirichlet_alpha",
                      "samples_per_client", "test_set_size", "class_separation"});
        get_to(p, "n_clients", cfg.population.n_clients);
        get_to(p, "feature_dim", cfg.population.feature_dim);
        get_to(p, "n_classes", cfg.population.n_classes);
        get_to(p, "dirichlet_alpha", cfg.population.dirichlet_alpha);
        get_to(p, "samples_per_client", cfg.population.samples_per_client);
        get_to(p, "test_set_size", cfg.population.test_set_size);
        get_to(p, "class_separation", cfg.population.class_separation);
        if (cfg.population.n_clients < 1) throw ValidationError("population.n_clients", "must be >= 1");
        if (cfg.population.dirichlet_alpha <= 0)
            throw ValidationError("population.dirichlet_alpha", "must be > 0");
        if (cfg.population.class_separation <= 0)
            throw ValidationError("population.class_separation", "must be > 0");
    }
    if (j.contains("traces")) {
        const json& t = j.at("traces");
        require_keys(t, "traces",
                     {"source", "path", "format", "n_traces", "seed", "static_mean", "duration_s",
                      "sample_interval_s", "base_bw_min", "base_bw_max", "sine_amplitude",
                      "sine_period_min_s", "sine_period_max_s", "fade_rate_per_s",
                      "fade_mean_duration_s", "fade_depth", "noise_rel"});
        get_to(t, "source", cfg.traces.source);
        if (cfg.traces.source != "synthetic" && cfg.traces.source != "dir")
            throw ValidationError("traces.source", "must be 'synthetic' or 'dir'");
        get_to(t, "path", cfg.traces.path);
        std::string fmt = "canonical";
        get_to(t, "format", fmt);
        if (fmt == "canonical") cfg.traces.format = TraceFormat::canonical;
        else if (fmt == "hsdpa") cfg.traces.format = TraceFormat::hsdpa;
        else throw ValidationError("traces.format", "must be 'canonical' or 'hsdpa'");
        auto& s = cfg.traces.synthetic;
        get_to(t, "n_traces", s.n_traces);
        get_to(t, "seed", s.seed);
        get_to(t, "static_mean", s.static_mean);
        get_to(t, "duration_s", s.duration_s);
        get_to(t, "sample_interval_s", s.sample_interval_s);
        get_to(t, "base_bw_min", s.base_bw_min);
        get_to(t, "base_bw_max", s.base_bw_max);
        get_to(t, "sine_amplitude", s.sine_amplitude);
        get_to(t, "sine_period_min_s", s.sine_period_min_s);
        get_to(t, "sine_period_max_s", s.sine_period_max_s);
        get_to(t, "fade_rate_per_s", s.fade_rate_per_s);
        get_to(t, "fade_mean_duration_s", s.fade_mean_duration_s);
        get_to(t, "fade_depth", s.fade_depth);
        get_to(t, "noise_rel", s.noise_rel);
        if (cfg.traces.source == "dir" && cfg.traces.path.empty())
            throw ValidationError("traces.path", "required when source is 'dir'");
    }
    if (j.contains("clients")) {
        const json& c = j.at("clients");
        require_keys(c, "clients",
                     {"pull_bytes", "push_bytes", "compute_latency_min", "compute_latency_max"});
        get_to(c, "pull_bytes", cfg.clients.pull_bytes);
        get_to(c, "push_bytes", cfg.clients.push_bytes);
        get_to(c, "compute_latency_min", cfg.clients.compute_latency_min);
        get_to(c, "compute_latency_max", cfg.clients.compute_latency_max);
        if (cfg.clients.pull_bytes <= 0 || cfg.clients.push_bytes <= 0)
            throw ValidationError("clients.pull_bytes", "update sizes must be > 0");
        if (cfg.clients.compute_latency_min <= 0 ||
            cfg.clients.compute_latency_max < cfg.clients.compute_latency_min)
            throw ValidationError("clients.compute_latency_min", "bad latency range");
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        require_keys(t, "training",
                     {"epochs", "batch_size", "learning_rate", "aggregator", "yogi_beta1",
                      "yogi_beta2", "yogi_tau", "yogi_server_lr"});
        get_to(t, "epochs", cfg.run.epochs);
        get_to(t, "batch_size", cfg.run.batch_size);
        get_to(t, "learning_rate", cfg.run.learning_rate);
        std::string agg = "yogi";
        get_to(t, "aggregator", agg);
        if (agg == "fedavg") cfg.run.aggregator = AggregatorKind::fedavg;
        else if (agg == "yogi") cfg.run.aggregator = AggregatorKind::yogi;
        else throw ValidationError("training.aggregator", "must be 'fedavg' or 'yogi'");
        get_to(t, "yogi_beta1", cfg.run.yogi_beta1);
        get_to(t, "yogi_beta2", cfg.run.yogi_beta2);
        get_to(t, "yogi_tau", cfg.run.yogi_tau);
        get_to(t, "yogi_server_lr", cfg.run.yogi_server_lr);
        if (cfg.run.epochs < 1 || cfg.run.batch_size < 1)
            throw ValidationError("training.epochs", "epochs and batch_size must be >= 1");
    }
    if (j.contains("budgets")) {
        const json& b = j.at("budgets");
        require_keys(b, "budgets", {"max_rounds", "max_sim_hours"});
        get_to(b, "max_rounds", cfg.run.max_rounds);
        double hours = cfg.run.max_sim_seconds / 3600.0;
        get_to(b, "max_sim_hours", hours);
        cfg.run.max_sim_seconds = hours * 3600.0;
        if (cfg.run.max_rounds < 0) throw ValidationError("budgets.max_rounds", "must be >= 0");
    }
    get_to(j, "target_accuracy", cfg.run.target_accuracy);
    if (cfg.run.target_accuracy <= 0.0 || cfg.run.target_accuracy >= 1.0)
        throw ValidationError("target_accuracy", "must be in (0, 1)");
    get_to(j, "eval_every", cfg.run.eval_every);
    if (cfg.run.eval_every < 1) throw ValidationError("eval_every", "must be >= 1");
    get_to(j, "warmup_rounds", cfg.run.warmup_rounds);
    get_to(j, "stall_timeout_s", cfg.run.stall_timeout);
    get_to(j, "baseline_policy", cfg.baseline_policy);
    get_to(j, "outdir", cfg.outdir);
    get_to(j, "seeds", cfg.seeds);
    if (cfg.seeds.empty()) throw ValidationError("seeds", "at least one seed required");

    if (!j.contains("policies") || !j.at("policies").is_array() || j.at("policies").empty())
        throw ValidationError("policies", "at least one policy required");
    for (const auto& pj : j.at("policies"))
        cfg.policies.push_back(parse_policy(pj, cfg.population));
    return cfg;
}

} // namespace cfgdetail

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
    return cfgdetail::parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config parse error: ") + e.what());
    }
    return cfgdetail::parse_config(j);
}

/// Shipped experiment presets. "motivating-static" is the flattened
/// (mean-bandwidth) twin of "motivating".
inline nlohmann::json make_preset(const std::string& name) {
    using json = nlohmann::json;
    json base = {
        {"population",
         {{"n_clients", 200}, {"feature_dim", 16}, {"n_classes", 10}, {"dirichlet_alpha", 0.1},
          {"samples_per_client", json::array({150, 250})}, {"class_separation", 0.8},
          {"test_set_size", 4000}}},
        {"traces",
         {{"source", "synthetic"}, {"n_traces", 40}, {"seed", 7},
          {"base_bw_min", 5e4}, {"base_bw_max", 2e7},
          {"sine_period_min_s", 400.0}, {"sine_period_max_s", 1200.0},
          {"fade_rate_per_s", 0.0025}, {"fade_mean_duration_s", 200.0}}},
        {"training", {{"aggregator", "yogi"}, {"epochs", 20}, {"batch_size", 20}, {"learning_rate", 0.01}}},
        {"budgets", {{"max_rounds", 200}, {"max_sim_hours", 48}}},
        {"target_accuracy", 0.82},
        {"eval_every", 5},
        {"warmup_rounds", 3},
        {"seeds", json::array({1, 2, 3, 4, 5})},
        {"baseline_policy", "utility-greedy"},
    };
    const json random_p = {{"name", "random"}, {"kind", "random"}, {"participants", 20}};
    const json greedy_p = {{"name", "utility-greedy"}, {"kind", "utility-greedy"},
                           {"participants", 20}, {"epsilon", 0.1},
                           {"preferred_duration", 10.0}, {"penalty_exponent", 6.0}};
    json dynamic_p = {{"name", "dynamicfl"}, {"kind", "dynamicfl"},
                      {"participants", 20}, {"epsilon", 0.1},
                      {"preferred_duration", 10.0}, {"penalty_exponent", 6.0}};
    dynamic_p["scheduler"] = {{"w_init", 3}, {"w_min", 2}, {"w_max", 6}};
    json no_pred = dynamic_p;
    no_pred["name"] = "dynamicfl-no-prediction";
    no_pred["scheduler"]["use_prediction"] = false;
    json no_lt = dynamic_p;
    no_lt["name"] = "dynamicfl-no-longterm";
    no_lt["scheduler"] = {{"w_init", 1}, {"w_min", 1}, {"w_max", 1}};

    if (name == "headline") {
        base["policies"] = json::array({random_p, greedy_p, dynamic_p});
        base["outdir"] = "out-headline";
        return base;
    }
    if (name == "motivating" || name == "motivating-static") {
        base["policies"] = json::array({greedy_p});
        // heavier fade regime: the degradation study wants dynamics that
        // visibly hurt a selection policy tuned on stable estimates
        base["traces"]["fade_rate_per_s"] = 1.0 / 300.0;
        base["traces"]["fade_mean_duration_s"] = 300.0;
        base["target_accuracy"] = 0.80;
        base["traces"]["static_mean"] = (name == "motivating-static");
        base["outdir"] = "out-" + name;
        return base;
    }
    if (name == "ablation") {
        base["policies"] = json::array({greedy_p, dynamic_p, no_pred, no_lt});
        // near-uniform class mixtures keep rounds-to-target stable across
        // policies so wall-clock differences isolate the scheduling stack
        base["population"]["dirichlet_alpha"] = 10.0;
        base["target_accuracy"] = 0.84;
        base["outdir"] = "out-ablation";
        return base;
    }
    if (name == "window-sweep") {
        base["policies"] = json::array({dynamic_p});
        base["outdir"] = "out-window-sweep";
        return base;
    }
    throw ValidationError("preset", "unknown preset: " + name);
}

} // namespace fedsim
