// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipesim/arena.hpp"
#include "pipesim/engine.hpp"
#include "pipesim/model.hpp"
#include "pipesim/strategy.hpp"
#include "pipesim/tuner.hpp"

namespace pipesim {

/// Invalid, inconsistent, or unknown configuration input. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelSpec {
    std::uint64_t seed = 1;
    int n_layers = 1;
    int d = 1;
    int frozen_prefix = 0;
};

struct WorkloadConfig {
    std::string mode = "infer";  // infer | train
    int n_items = 1;
    std::int64_t batch_size = 1;
    float lr = 0.01f;
    bool checkpointing = false;
};

struct OutputConfig {
    std::optional<std::string> dir;           // resolved by output_dir()
    std::vector<std::string> formats = {"csv", "json"};
};

struct ExperimentConfig {
    ModelSpec model;
    ArenaConfig arena;
    WorkloadConfig workload;
    StrategyConfig strategy;
    OutputConfig output;
    std::optional<SweepSpec> sweep;

    void validate() const;  // throws ConfigError
};

/// Strict schema load: every key must be known, every section well-formed.
ExperimentConfig load_config(const std::string& path);

/// Flag and env resolution: explicit dir (flag or file) wins, then the
/// PIPESIM_OUTPUT_DIR environment variable, then "out".
std::string output_dir(const ExperimentConfig& cfg);

// Command entry points; return process exit codes
// (0 ok, 2 config error, 3 OOM-deadlock, 4 fidelity failure).
int cmd_run(const ExperimentConfig& cfg);
int cmd_compare(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg);

}  // namespace pipesim
