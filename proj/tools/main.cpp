// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "pipesim/experiment.hpp"

namespace {

using pipesim::ConfigError;
using pipesim::ExperimentConfig;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> n_layers;
    std::optional<int> d;
    std::optional<int> frozen_prefix;
    std::optional<std::uint64_t> capacity_bytes;
    std::optional<double> h2d_bandwidth;
    std::optional<double> d2h_bandwidth;
    std::optional<double> per_call_latency;
    std::optional<double> device_compute_rate;
    std::optional<double> host_compute_rate;
    std::optional<int> n_items;
    std::optional<std::int64_t> batch_size;
    std::optional<float> lr;
    std::optional<bool> checkpointing;
    std::optional<std::string> kind;
    std::optional<int> k;
    std::optional<int> k_prime;
    std::optional<std::string> transfer_mode;
    std::optional<std::string> out_dir;
    std::optional<std::string> k_range;        // "min:max" or single value
    std::optional<std::string> k_prime_range;  // "min:max" or single value
    std::optional<std::uint64_t> budget;
    std::optional<std::string> objective;
};

std::pair<int, int> parse_range(const std::string& text, const std::string& flag) {
    try {
        auto colon = text.find(':');
        if (colon == std::string::npos) {
            int v = std::stoi(text);
            return {v, v};
        }
        return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError("config: bad range '" + text + "' for " + flag);
    }
}

pipesim::StrategyKind kind_from_flag(const std::string& name) {
    if (name == "standard") return pipesim::StrategyKind::Standard;
    if (name == "cpu_only") return pipesim::StrategyKind::CpuOnly;
    if (name == "naive") return pipesim::StrategyKind::Naive;
    if (name == "superpipeline") return pipesim::StrategyKind::Superpipeline;
    throw ConfigError("config: unknown strategy kind '" + name + "'");
}

pipesim::TransferMode transfer_mode_from_flag(const std::string& name) {
    if (name == "batch") return pipesim::TransferMode::Batch;
    if (name == "sequential") return pipesim::TransferMode::Sequential;
    throw ConfigError("config: unknown transfer_mode '" + name + "'");
}

pipesim::SweepObjective objective_from_flag(const std::string& name) {
    if (name == "min_per_item_time") return pipesim::SweepObjective::MinPerItemTime;
    if (name == "min_peak_bytes") return pipesim::SweepObjective::MinPeakBytes;
    if (name == "min_time_under_budget") return pipesim::SweepObjective::MinTimeUnderBudget;
    throw ConfigError("config: unknown objective '" + name + "'");
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.seed) cfg.model.seed = *ov.seed;
    if (ov.n_layers) cfg.model.n_layers = *ov.n_layers;
    if (ov.d) cfg.model.d = *ov.d;
    if (ov.frozen_prefix) cfg.model.frozen_prefix = *ov.frozen_prefix;
    if (ov.capacity_bytes) cfg.arena.capacity_bytes = *ov.capacity_bytes;
    if (ov.h2d_bandwidth) cfg.arena.h2d_bandwidth = *ov.h2d_bandwidth;
    if (ov.d2h_bandwidth) cfg.arena.d2h_bandwidth = *ov.d2h_bandwidth;
    if (ov.per_call_latency) cfg.arena.per_call_latency = *ov.per_call_latency;
    if (ov.device_compute_rate) cfg.arena.device_compute_rate = *ov.device_compute_rate;
    if (ov.host_compute_rate) cfg.arena.host_compute_rate = *ov.host_compute_rate;
    if (ov.n_items) cfg.workload.n_items = *ov.n_items;
    if (ov.batch_size) cfg.workload.batch_size = *ov.batch_size;
    if (ov.lr) cfg.workload.lr = *ov.lr;
    if (ov.checkpointing) cfg.workload.checkpointing = *ov.checkpointing;
    if (ov.kind) cfg.strategy.kind = kind_from_flag(*ov.kind);
    if (ov.k) cfg.strategy.k = *ov.k;
    if (ov.k_prime) cfg.strategy.k_prime = *ov.k_prime;
    if (ov.transfer_mode) cfg.strategy.transfer_mode = transfer_mode_from_flag(*ov.transfer_mode);
    if (ov.out_dir) cfg.output.dir = *ov.out_dir;

    if (ov.k_range || ov.k_prime_range || ov.budget || ov.objective) {
        pipesim::SweepSpec spec = cfg.sweep ? *cfg.sweep : pipesim::SweepSpec{};
        if (ov.k_range)
            std::tie(spec.k_min, spec.k_max) = parse_range(*ov.k_range, "--k");
        if (ov.k_prime_range)
            std::tie(spec.k_prime_min, spec.k_prime_max) = parse_range(*ov.k_prime_range, "--kprime");
        if (ov.budget) spec.budget_bytes = *ov.budget;
        if (ov.objective) spec.objective = objective_from_flag(*ov.objective);
        cfg.sweep = spec;
    }
}

void add_common_flags(CLI::App* cmd, std::string& config_path, Overrides& ov) {
    cmd->add_option("-c,--config", config_path, "Experiment config file (JSON)")->required();
    cmd->add_option("--seed", ov.seed, "Model seed");
    cmd->add_option("--n-layers", ov.n_layers, "Number of layers");
    cmd->add_option("--d", ov.d, "Hidden dimension");
    cmd->add_option("--frozen-prefix", ov.frozen_prefix, "Leading frozen layer count");
    cmd->add_option("--capacity", ov.capacity_bytes, "Device capacity in bytes");
    cmd->add_option("--h2d-bandwidth", ov.h2d_bandwidth, "Host-to-device bytes/s");
    cmd->add_option("--d2h-bandwidth", ov.d2h_bandwidth, "Device-to-host bytes/s");
    cmd->add_option("--latency", ov.per_call_latency, "Per-transfer-call latency");
    cmd->add_option("--device-rate", ov.device_compute_rate, "Device flops/s");
    cmd->add_option("--host-rate", ov.host_compute_rate, "Host flops/s");
    cmd->add_option("--n-items", ov.n_items, "Inference items");
    cmd->add_option("--batch-size", ov.batch_size, "Batch rows");
    cmd->add_option("--lr", ov.lr, "Learning rate");
    cmd->add_option("--checkpointing", ov.checkpointing, "Activation checkpointing (0/1)");
    cmd->add_option("--strategy", ov.kind,
                    "standard | cpu_only | naive | superpipeline");
    cmd->add_option("--window", ov.k, "Resident window k");
    cmd->add_option("--subwindow", ov.k_prime, "Swap group k'");
    cmd->add_option("--transfer-mode", ov.transfer_mode, "batch | sequential");
    cmd->add_option("-o,--out-dir", ov.out_dir, "Artifact output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Windowed GPU/CPU layer-offloading simulator"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;

    CLI::App* run = app.add_subcommand("run", "Execute one experiment");
    add_common_flags(run, config_path, ov);
    CLI::App* train = app.add_subcommand("train", "Execute one training-step experiment");
    add_common_flags(train, config_path, ov);
    CLI::App* compare = app.add_subcommand("compare", "Run all four strategies and tabulate");
    add_common_flags(compare, config_path, ov);
    CLI::App* sweep = app.add_subcommand("sweep", "Grid-search (k, k') under a budget");
    add_common_flags(sweep, config_path, ov);
    sweep->add_option("--k", ov.k_range, "k range, 'min:max' or single value");
    sweep->add_option("--kprime", ov.k_prime_range, "k' range, 'min:max' or single value");
    sweep->add_option("--budget", ov.budget, "Memory budget in bytes");
    sweep->add_option("--objective", ov.objective,
                      "min_per_item_time | min_peak_bytes | min_time_under_budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = pipesim::load_config(config_path);
        apply_overrides(cfg, ov);
        if (train->parsed()) cfg.workload.mode = "train";
        if (run->parsed() || train->parsed()) return pipesim::cmd_run(cfg);
        if (compare->parsed()) return pipesim::cmd_compare(cfg);
        return pipesim::cmd_sweep(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pipesim::OomDeadlockError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
