// SPDX-License-Identifier: Apache-2.0
#include "pipesim/tuner.hpp"

#include <stdexcept>

namespace pipesim {

std::string to_string(SweepObjective objective) {
    switch (objective) {
        case SweepObjective::MinPerItemTime: return "min_per_item_time";
        case SweepObjective::MinPeakBytes: return "min_peak_bytes";
        case SweepObjective::MinTimeUnderBudget: return "min_time_under_budget";
    }
    return "unknown";
}

void SweepSpec::validate() const {
    if (k_min > k_max || k_prime_min > k_prime_max)
        throw std::invalid_argument("sweep: empty range");
    if (k_min < 1 || k_prime_min < 1) throw std::invalid_argument("sweep: ranges must be positive");
    if (budget_bytes == 0) throw std::invalid_argument("sweep: budget_bytes must be > 0");
}

namespace {

/// Objective ranking among feasible entries; returns true if a beats b.
bool better(SweepObjective objective, const SweepEntry& a, const SweepEntry& b) {
    double pa = 0, pb = 0;
    switch (objective) {
        case SweepObjective::MinPerItemTime:
        case SweepObjective::MinTimeUnderBudget:
            pa = a.per_item_time;
            pb = b.per_item_time;
            break;
        case SweepObjective::MinPeakBytes:
            pa = static_cast<double>(a.peak_bytes);
            pb = static_cast<double>(b.peak_bytes);
            break;
    }
    if (pa != pb) return pa < pb;
    if (a.peak_bytes != b.peak_bytes) return a.peak_bytes < b.peak_bytes;
    if (a.k != b.k) return a.k < b.k;
    return a.k_prime < b.k_prime;
}

}  // namespace

SweepResult grid_search(const LayeredModel& model, const ArenaConfig& arena_cfg,
                        const SweepWorkload& workload, const SweepSpec& spec) {
    spec.validate();
    if (workload.n_items < 1 || workload.batch_size < 1)
        throw std::invalid_argument("sweep: workload counts must be >= 1");

    const std::uint64_t act_bytes =
        static_cast<std::uint64_t>(workload.batch_size) * static_cast<std::uint64_t>(model.d) * 4;

    std::vector<Tensor> inputs;
    inputs.reserve(static_cast<std::size_t>(workload.n_items));
    for (int i = 0; i < workload.n_items; ++i)
        inputs.push_back(make_input(model.seed, static_cast<std::uint64_t>(i),
                                    workload.batch_size, model.d));

    SweepResult result;
    for (int k = spec.k_min; k <= spec.k_max; ++k) {
        for (int kp = spec.k_prime_min; kp <= spec.k_prime_max; ++kp) {
            if (kp >= k || k > model.n_layers) continue;
            StrategyConfig strategy;
            strategy.kind = StrategyKind::Superpipeline;
            strategy.k = k;
            strategy.k_prime = kp;
            strategy.transfer_mode = workload.transfer_mode;

            SweepEntry entry;
            entry.k = k;
            entry.k_prime = kp;

            // Analytic pre-filter: peak weights plus the single in/out
            // activation buffer can never fit, so skip the engine run.
            const std::uint64_t bound =
                peak_weight_residency(strategy, model.n_layers, model.layer_bytes()) + act_bytes;
            if (bound > spec.budget_bytes) {
                result.table.push_back(entry);
                continue;
            }

            try {
                RunResult run = run_inference(model, inputs, strategy, arena_cfg);
                entry.peak_bytes = run.summary.peak_bytes;
                entry.per_item_time = run.summary.per_item_time;
                entry.feasible = entry.peak_bytes <= spec.budget_bytes;
            } catch (const OomDeadlockError&) {
                entry.feasible = false;
            }
            result.table.push_back(entry);
        }
    }

    const SweepEntry* best = nullptr;
    for (const auto& entry : result.table) {
        if (!entry.feasible) continue;
        if (!best || better(spec.objective, entry, *best)) best = &entry;
    }
    if (best) result.best = std::make_pair(best->k, best->k_prime);
    return result;
}

}  // namespace pipesim
