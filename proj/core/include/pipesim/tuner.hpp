// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pipesim/arena.hpp"
#include "pipesim/engine.hpp"
#include "pipesim/model.hpp"
#include "pipesim/strategy.hpp"

namespace pipesim {

enum class SweepObjective { MinPerItemTime, MinPeakBytes, MinTimeUnderBudget };

std::string to_string(SweepObjective objective);

struct SweepSpec {
    int k_min = 2;
    int k_max = 2;
    int k_prime_min = 1;
    int k_prime_max = 1;
    std::uint64_t budget_bytes = 0;
    SweepObjective objective = SweepObjective::MinTimeUnderBudget;

    void validate() const;
};

struct SweepEntry {
    int k = 0;
    int k_prime = 0;
    bool feasible = false;
    std::uint64_t peak_bytes = 0;
    double per_item_time = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> table;  // deterministic grid order: k ascending, then k'
    std::optional<std::pair<int, int>> best;
};

struct SweepWorkload {
    int n_items = 1;
    std::int64_t batch_size = 1;
    TransferMode transfer_mode = TransferMode::Batch;
};

/// Exhaustive (k, k') grid search using the execution engine as evaluator,
/// pre-filtered by the analytic peak-residency bound. Feasible means the run
/// completed with peak bytes within budget; best is chosen by the objective
/// with ties broken by smaller peak bytes, then smaller k, then smaller k'.
SweepResult grid_search(const LayeredModel& model, const ArenaConfig& arena_cfg,
                        const SweepWorkload& workload, const SweepSpec& spec);

}  // namespace pipesim
