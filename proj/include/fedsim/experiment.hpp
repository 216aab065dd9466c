#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/error.hpp"
#include "fedsim/predictor.hpp"
#include "fedsim/synthetic.hpp"

namespace fedsim {

/// Everything one (policy, seed) cell needs; deterministic in (config, seed).
struct Cell {
    Population population;
    TraceStore traces;
    std::vector<ClientProfile> profiles;
};

inline std::map<std::string, BandwidthTrace> load_trace_dir(const std::string& dir,
                                                            TraceFormat format) {
    std::map<std::string, BandwidthTrace> out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            BandwidthTrace t = parse_trace(in, format, f.filename().string());
            out.emplace(t.trace_id, std::move(t));
        } catch (const EmptyTrace&) {
            // skip empty files
        }
    }
    if (out.empty()) throw EmptyTrace{};
    return out;
}

inline Cell build_cell(const ExperimentConfig& cfg, std::uint64_t seed) {
    Cell cell;
    cell.population = generate_population(seed, cfg.population.n_clients, cfg.population.feature_dim,
                                          cfg.population.n_classes, cfg.population.dirichlet_alpha,
                                          cfg.population.samples_per_client,
                                          cfg.population.test_set_size,
                                          cfg.population.class_separation);
    if (cfg.traces.source == "synthetic") {
        SyntheticTraceConfig scfg = cfg.traces.synthetic;
        scfg.seed = mix_seed(scfg.seed, seed);
        cell.traces.traces = generate_traces(scfg);
    } else {
        cell.traces.traces = load_trace_dir(cfg.traces.path, cfg.traces.format);
    }

    std::set<std::string> client_ids, trace_ids;
    for (std::size_t i = 0; i < cell.population.partitions.size(); ++i)
        client_ids.insert(cell.population.partitions[i].client_id);
    for (const auto& [tid, t] : cell.traces.traces) trace_ids.insert(tid);
    cell.traces.assignment = assign_traces(client_ids, trace_ids);

    Rng profile_rng(mix_seed(seed, 0x70726f66u));
    for (std::size_t i = 0; i < cell.population.partitions.size(); ++i) {
        ClientProfile p;
        p.client_id = cell.population.partitions[i].client_id;
        p.trace_id = cell.traces.assignment.at(p.client_id);
        p.per_sample_compute_latency =
            profile_rng.log_uniform(cfg.clients.compute_latency_min, cfg.clients.compute_latency_max);
        p.pull_bytes = cfg.clients.pull_bytes;
        p.push_bytes = cfg.clients.push_bytes;
        p.partition_index = i;
        cell.profiles.push_back(std::move(p));
    }
    return cell;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const PolicyConfig& policy,
                                std::uint64_t seed) {
    const Cell cell = build_cell(cfg, seed);
    Engine engine(cell.population, cell.profiles, cell.traces, policy.policy, policy.scheduler,
                  cfg.run, seed);
    return engine.run();
}

// ---- output files ----

namespace outdetail {

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace outdetail

inline std::string records_to_ndjson(const std::vector<RoundRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["round"] = r.round;
        j["wall_clock_start"] = r.wall_clock_start;
        j["wall_clock_end"] = r.wall_clock_end;
        j["selection_frozen"] = r.selection_frozen;
        j["cohort"] = r.cohort;
        if (r.test_accuracy) j["test_accuracy"] = *r.test_accuracy;
        else j["test_accuracy"] = nullptr;
        nlohmann::ordered_json clients = nlohmann::ordered_json::object();
        for (const auto& [id, pc] : r.per_client) {
            clients[id] = {{"comm_s", pc.comm_seconds},
                           {"comp_s", pc.comp_seconds},
                           {"effective_bw", pc.effective_bw},
                           {"dropped", pc.dropped}};
        }
        j["clients"] = std::move(clients);
        out << j.dump() << "\n";
    }
    return out.str();
}

inline std::string curve_to_csv(const RunResult& result) {
    std::ostringstream out;
    out << "round,wall_clock_s,accuracy\n";
    for (const auto& r : result.records)
        if (r.test_accuracy)
            out << r.round << "," << outdetail::format_double(r.wall_clock_end) << ","
                << outdetail::format_double(*r.test_accuracy) << "\n";
    return out.str();
}

struct CellResult {
    std::string policy;
    std::uint64_t seed = 0;
    RunResult result;
    bool ok = false;
    std::string error;
};

struct ComparisonReport {
    std::vector<CellResult> cells;
    std::map<std::string, double> median_time_to_target;    // only policies where computable
    std::map<std::string, double> median_speedup;           // vs baseline, paired seeds only
    std::string baseline;
    bool all_ok = true;
};

inline std::optional<double> median_of(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void summarize(ComparisonReport& report) {
    std::map<std::string, std::map<std::uint64_t, double>> times;  // policy -> seed -> t
    for (const auto& c : report.cells) {
        if (!c.ok) {
            report.all_ok = false;
            continue;
        }
        if (c.result.reached_target) times[c.policy][c.seed] = c.result.time_to_target;
    }
    for (const auto& [policy, by_seed] : times) {
        std::vector<double> ts;
        for (const auto& [s, t] : by_seed) ts.push_back(t);
        if (auto m = median_of(ts)) report.median_time_to_target[policy] = *m;
        if (policy == report.baseline) continue;
        std::vector<double> speedups;
        auto base_it = times.find(report.baseline);
        if (base_it != times.end()) {
            for (const auto& [seed, t] : by_seed) {
                auto bt = base_it->second.find(seed);
                if (bt != base_it->second.end()) speedups.push_back(bt->second / t);
            }
        }
        if (auto m = median_of(speedups)) report.median_speedup[policy] = *m;
    }
}

inline std::string report_to_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << "policy,seed,status,final_accuracy,rounds,time_to_target_s,speedup_vs_baseline\n";
    std::map<std::string, std::map<std::uint64_t, double>> times;
    for (const auto& c : report.cells)
        if (c.ok && c.result.reached_target) times[c.policy][c.seed] = c.result.time_to_target;
    for (const auto& c : report.cells) {
        std::string status = c.ok ? (c.result.reached_target ? "reached" : "budget-exhausted")
                                  : "failed";
        out << c.policy << "," << c.seed << "," << status << ","
            << outdetail::format_double(c.ok ? c.result.final_accuracy : 0.0) << ","
            << (c.ok ? c.result.rounds_run : 0) << ",";
        if (c.ok && c.result.reached_target)
            out << outdetail::format_double(c.result.time_to_target);
        else
            out << "n/a";
        out << ",";
        // per-seed speedup vs baseline, only when both runs reached the target
        std::string speedup = "n/a";
        if (c.policy != report.baseline && c.ok && c.result.reached_target) {
            auto base = times.find(report.baseline);
            if (base != times.end()) {
                auto bt = base->second.find(c.seed);
                if (bt != base->second.end())
                    speedup = outdetail::format_double(bt->second / c.result.time_to_target);
            }
        }
        out << speedup << "\n";
    }
    for (const auto& [policy, m] : report.median_time_to_target)
        out << policy << ",median,,,," << outdetail::format_double(m) << ","
            << (report.median_speedup.count(policy)
                    ? outdetail::format_double(report.median_speedup.at(policy))
                    : std::string("n/a"))
            << "\n";
    return out.str();
}

inline int matrix_threads() {
    if (const char* env = std::getenv("FEDSIM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Run every (policy, seed) cell, write per-run NDJSON + CSV and the
/// aggregate report. Failed cells are marked and do not abort the matrix.
inline ComparisonReport run_matrix(const ExperimentConfig& cfg,
                                   const std::string& outdir_override = "") {
    const std::string outdir = outdir_override.empty() ? cfg.outdir : outdir_override;
    std::filesystem::create_directories(outdir);

    ComparisonReport report;
    report.baseline = cfg.baseline_policy;
    for (const auto& policy : cfg.policies)
        for (std::uint64_t seed : cfg.seeds)
            report.cells.push_back({policy.name, seed, {}, false, ""});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= report.cells.size()) return;
            CellResult& cell = report.cells[i];
            const PolicyConfig& policy = cfg.policies[i / cfg.seeds.size()];
            try {
                cell.result = run_experiment(cfg, policy, cell.seed);
                cell.ok = cell.result.error.empty();
                cell.error = cell.result.error;
                const std::string stem = cell.policy + "_" + std::to_string(cell.seed);
                outdetail::atomic_write(std::filesystem::path(outdir) / (stem + ".ndjson"),
                                        records_to_ndjson(cell.result.records));
                outdetail::atomic_write(std::filesystem::path(outdir) / (stem + ".csv"),
                                        curve_to_csv(cell.result));
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
    };
    const int n_threads = std::min<int>(matrix_threads(), static_cast<int>(report.cells.size()));
    std::vector<std::thread> threads;
    for (int t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    summarize(report);
    outdetail::atomic_write(std::filesystem::path(outdir) / "report.csv", report_to_csv(report));
    return report;
}

struct WindowSweepRow {
    int window = 0;
    double predictor_mae = 0.0;
    std::optional<double> median_time_to_target;
};

/// Fix the observation window at each listed size (disabling the adaptive
/// resize), run the dynamicfl policy, and tabulate predictor error next to
/// wall-clock-to-target.
inline std::vector<WindowSweepRow> sweep_window(const ExperimentConfig& cfg,
                                                const std::vector<int>& sizes) {
    if (sizes.empty()) throw ValidationError("sizes", "window size list must be non-empty");
    const PolicyConfig* dyn = nullptr;
    for (const auto& p : cfg.policies)
        if (p.policy.kind == PolicyKind::dynamicfl) { dyn = &p; break; }
    if (!dyn) throw ValidationError("policies", "sweep requires a dynamicfl policy");

    std::vector<WindowSweepRow> rows;
    for (int w : sizes) {
        if (w < 1) throw ValidationError("sizes", "window sizes must be >= 1");
        PolicyConfig fixed = *dyn;
        fixed.scheduler.w_init = fixed.scheduler.w_min = fixed.scheduler.w_max = w;

        WindowSweepRow row;
        row.window = w;
        double mae_acc = 0.0;
        std::size_t mae_count = 0;
        std::vector<double> times;
        for (std::uint64_t seed : cfg.seeds) {
            const Cell cell = build_cell(cfg, seed);
            for (const auto& [tid, trace] : cell.traces.traces) {
                try {
                    mae_acc += prediction_error(fixed.scheduler.predictor, trace, w);
                    ++mae_count;
                } catch (const TraceTooShort&) {
                }
            }
            const RunResult r = run_experiment(cfg, fixed, seed);
            if (r.reached_target) times.push_back(r.time_to_target);
        }
        row.predictor_mae = mae_count ? mae_acc / static_cast<double>(mae_count) : 0.0;
        row.median_time_to_target = median_of(times);
        rows.push_back(row);
    }
    return rows;
}

inline std::string sweep_to_csv(const std::vector<WindowSweepRow>& rows) {
    std::ostringstream out;
    out << "window,predictor_mae,wall_clock_to_target_s\n";
    for (const auto& r : rows) {
        out << r.window << "," << outdetail::format_double(r.predictor_mae) << ",";
        if (r.median_time_to_target) out << outdetail::format_double(*r.median_time_to_target);
        else out << "n/a";
        out << "\n";
    }
    return out.str();
}

} // namespace fedsim
