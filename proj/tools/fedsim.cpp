#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/experiment.hpp"

namespace {

fedsim::ExperimentConfig load(const std::string& path) {
    // "preset:<name>" resolves to a built-in preset instead of a file
    if (path.rfind("preset:", 0) == 0)
        return fedsim::parse_config_json(fedsim::make_preset(path.substr(7)));
    return fedsim::load_config(path);
}

void apply_overrides(fedsim::ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                     const std::vector<std::string>& policies, const std::string& outdir) {
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!outdir.empty()) cfg.outdir = outdir;
    if (!policies.empty()) {
        std::vector<fedsim::PolicyConfig> kept;
        for (const auto& p : cfg.policies)
            for (const auto& name : policies)
                if (p.name == name) kept.push_back(p);
        if (kept.empty()) throw fedsim::ValidationError("--policy", "no matching policy in config");
        cfg.policies = std::move(kept);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven federated-learning client-selection simulator"};
    app.require_subcommand(1);

    std::string config_path, outdir, sizes_arg, preset_name, preset_out;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> policies;

    auto* run = app.add_subcommand("run", "Run the experiment matrix from a config");
    run->add_option("config", config_path, "Config file (or preset:<name>)")->required();
    run->add_option("--outdir", outdir, "Output directory override");
    run->add_option("--seed", seeds, "Seed overrides (repeatable)");
    run->add_option("--policy", policies, "Restrict to named policies (repeatable)");

    auto* sweep = app.add_subcommand("sweep-window", "Sweep fixed observation-window sizes");
    sweep->add_option("config", config_path, "Config file (or preset:<name>)")->required();
    sweep->add_option("--sizes", sizes_arg, "Comma-separated window sizes")->required();
    sweep->add_option("--outdir", outdir, "Output directory override");
    sweep->add_option("--seed", seeds, "Seed overrides (repeatable)");

    auto* validate = app.add_subcommand("validate", "Validate a config file");
    validate->add_option("config", config_path, "Config file (or preset:<name>)")->required();

    auto* preset = app.add_subcommand("preset", "Write a built-in preset config");
    preset->add_option("name", preset_name,
                       "headline | motivating | motivating-static | ablation | window-sweep")
        ->required();
    preset->add_option("-o,--output", preset_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            load(config_path);
            std::cout << "config ok\n";
            return 0;
        }
        if (preset->parsed()) {
            const std::string text = fedsim::make_preset(preset_name).dump(2) + "\n";
            if (preset_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(preset_out);
                out << text;
            }
            return 0;
        }
        if (run->parsed()) {
            fedsim::ExperimentConfig cfg = load(config_path);
            apply_overrides(cfg, seeds, policies, outdir);
            const fedsim::ComparisonReport report = fedsim::run_matrix(cfg);
            for (const auto& cell : report.cells) {
                std::cout << cell.policy << " seed=" << cell.seed << ": ";
                if (!cell.ok) {
                    std::cout << "FAILED (" << cell.error << ")\n";
                } else if (cell.result.reached_target) {
                    std::cout << "target in " << cell.result.time_to_target << " s, final acc "
                              << cell.result.final_accuracy << "\n";
                } else {
                    std::cout << "budget exhausted, final acc " << cell.result.final_accuracy << "\n";
                }
            }
            for (const auto& [policy, speedup] : report.median_speedup)
                std::cout << "median speedup " << policy << " vs " << report.baseline << ": "
                          << speedup << "\n";
            std::cout << "report: " << cfg.outdir << "/report.csv\n";
            return report.all_ok ? 0 : 1;
        }
        if (sweep->parsed()) {
            fedsim::ExperimentConfig cfg = load(config_path);
            apply_overrides(cfg, seeds, {}, outdir);
            std::vector<int> sizes;
            std::stringstream ss(sizes_arg);
            for (std::string tok; std::getline(ss, tok, ',');)
                if (!tok.empty()) sizes.push_back(std::stoi(tok));
            const auto rows = fedsim::sweep_window(cfg, sizes);
            const std::string csv = fedsim::sweep_to_csv(rows);
            std::filesystem::create_directories(cfg.outdir);
            std::ofstream(std::filesystem::path(cfg.outdir) / "window_sweep.csv") << csv;
            std::cout << csv;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
