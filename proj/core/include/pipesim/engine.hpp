// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pipesim/arena.hpp"
#include "pipesim/model.hpp"
#include "pipesim/strategy.hpp"
#include "pipesim/trace.hpp"

namespace pipesim {

struct TrainConfig {
    float lr = 0.01f;
    bool checkpointing = false;
    std::int64_t batch_size = 1;

    void validate() const {
        if (lr <= 0.0f) throw std::invalid_argument("train: lr must be > 0");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    }
};

/// No event can make progress because a required working set can never fit.
struct OomDeadlockError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunResult {
    std::vector<Tensor> outputs;  // one per input item (inference)
    LayeredModel model;           // post-step model (training)
    float loss = 0.0f;
    Trace trace;
    RunSummary summary;
};

/// Executes the full inference stream under the given strategy. Outputs are
/// bitwise-equal to reference_forward for every strategy; only the timing
/// model differs.
RunResult run_inference(const LayeredModel& model, const std::vector<Tensor>& inputs,
                        const StrategyConfig& strategy, const ArenaConfig& arena_cfg);

/// One training step (forward, MSE loss, reverse backward, SGD) under the
/// given strategy. Loss and post-step weights are bitwise-equal to
/// reference_train_step.
RunResult run_train_step(const LayeredModel& model, const Tensor& x, const Tensor& target,
                         const StrategyConfig& strategy, const ArenaConfig& arena_cfg,
                         const TrainConfig& train_cfg);

std::string digest_tensors(const std::vector<Tensor>& tensors);
std::string digest_train(float loss, const LayeredModel& model);

struct FidelityResult {
    bool ok = false;
    std::string digest;
};

/// Recomputes reference_forward and compares bitwise.
FidelityResult verify_fidelity(const std::vector<Tensor>& outputs, const LayeredModel& model,
                               const std::vector<Tensor>& inputs);

}  // namespace pipesim
