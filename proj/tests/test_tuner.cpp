// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pipesim/tuner.hpp"

using namespace pipesim;

namespace {

ArenaConfig default_arena() {
    ArenaConfig arena;
    arena.capacity_bytes = 1ull << 30;
    arena.h2d_bandwidth = 200.0;
    arena.d2h_bandwidth = 100.0;
    arena.device_compute_rate = 512.0;
    arena.host_compute_rate = 5.12;
    return arena;
}

SweepSpec full_grid(std::uint64_t budget, SweepObjective objective) {
    SweepSpec spec;
    spec.k_min = 2;
    spec.k_max = 8;
    spec.k_prime_min = 1;
    spec.k_prime_max = 7;
    spec.budget_bytes = budget;
    spec.objective = objective;
    return spec;
}

}  // namespace

TEST_CASE("spec validation") {
    SweepSpec spec = full_grid(1, SweepObjective::MinPerItemTime);
    CHECK_NOTHROW(spec.validate());
    spec.k_min = 5;
    spec.k_max = 4;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = full_grid(0, SweepObjective::MinPerItemTime);
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = full_grid(1, SweepObjective::MinPerItemTime);
    spec.k_prime_min = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("objective names") {
    CHECK(to_string(SweepObjective::MinPerItemTime) == "min_per_item_time");
    CHECK(to_string(SweepObjective::MinPeakBytes) == "min_peak_bytes");
    CHECK(to_string(SweepObjective::MinTimeUnderBudget) == "min_time_under_budget");
}

TEST_CASE("budget below one layer leaves every pair infeasible") {
    LayeredModel model = build_model(3, 8, 16, 0);
    SweepWorkload workload;
    workload.n_items = 2;
    SweepResult result = grid_search(model, default_arena(), workload,
                                     full_grid(100, SweepObjective::MinPerItemTime));
    CHECK(result.table.size() == 28);
    for (const auto& entry : result.table) CHECK_FALSE(entry.feasible);
    CHECK_FALSE(result.best.has_value());
}

TEST_CASE("the 8-layer grid enumerates exactly the 28 valid pairs in order") {
    LayeredModel model = build_model(3, 8, 8, 0);
    SweepWorkload workload;
    SweepResult result = grid_search(model, default_arena(), workload,
                                     full_grid(1ull << 40, SweepObjective::MinPerItemTime));
    REQUIRE(result.table.size() == 28);
    std::size_t idx = 0;
    for (int k = 2; k <= 8; ++k)
        for (int kp = 1; kp < k; ++kp) {
            CHECK(result.table[idx].k == k);
            CHECK(result.table[idx].k_prime == kp);
            ++idx;
        }
}

TEST_CASE("best is never dominated within the grid, per objective") {
    LayeredModel model = build_model(17, 8, 8, 0);
    SweepWorkload workload;
    workload.n_items = 2;
    ArenaConfig arena = default_arena();

    for (auto objective : {SweepObjective::MinPerItemTime, SweepObjective::MinPeakBytes,
                           SweepObjective::MinTimeUnderBudget}) {
        SweepResult result =
            grid_search(model, arena, workload, full_grid(1ull << 40, objective));
        REQUIRE(result.best.has_value());
        const SweepEntry* best = nullptr;
        for (const auto& entry : result.table)
            if (entry.k == result.best->first && entry.k_prime == result.best->second)
                best = &entry;
        REQUIRE(best != nullptr);
        CHECK(best->feasible);
        for (const auto& entry : result.table) {
            if (!entry.feasible) continue;
            if (objective == SweepObjective::MinPeakBytes)
                CHECK(best->peak_bytes <= entry.peak_bytes);
            else
                CHECK(best->per_item_time <= entry.per_item_time);
        }
    }
}

TEST_CASE("every feasible pair respects the budget") {
    LayeredModel model = build_model(23, 8, 8, 0);
    SweepWorkload workload;
    const std::uint64_t budget = 6 * model.layer_bytes() + 64;
    SweepResult result = grid_search(model, default_arena(), workload,
                                     full_grid(budget, SweepObjective::MinTimeUnderBudget));
    bool any_feasible = false, any_infeasible = false;
    for (const auto& entry : result.table) {
        if (entry.feasible) {
            any_feasible = true;
            CHECK(entry.peak_bytes <= budget);
        } else {
            any_infeasible = true;
        }
    }
    CHECK(any_feasible);
    CHECK(any_infeasible);
    REQUIRE(result.best.has_value());
    CHECK(result.best->first + result.best->second <= 6);
}

TEST_CASE("repeated sweeps are identical") {
    LayeredModel model = build_model(29, 6, 8, 0);
    SweepWorkload workload;
    auto spec = full_grid(1ull << 40, SweepObjective::MinPerItemTime);
    spec.k_max = 6;
    SweepResult a = grid_search(model, default_arena(), workload, spec);
    SweepResult b = grid_search(model, default_arena(), workload, spec);
    REQUIRE(a.table.size() == b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) {
        CHECK(a.table[i].k == b.table[i].k);
        CHECK(a.table[i].k_prime == b.table[i].k_prime);
        CHECK(a.table[i].feasible == b.table[i].feasible);
        CHECK(a.table[i].peak_bytes == b.table[i].peak_bytes);
        CHECK(a.table[i].per_item_time == b.table[i].per_item_time);
    }
    CHECK(a.best == b.best);
}

TEST_CASE("range clamping skips pairs outside k' < k <= n_layers") {
    LayeredModel model = build_model(5, 4, 8, 0);
    SweepWorkload workload;
    SweepResult result = grid_search(model, default_arena(), workload,
                                     full_grid(1ull << 40, SweepObjective::MinPerItemTime));
    // k in [2,4] only; pairs: (2,1),(3,1),(3,2),(4,1),(4,2),(4,3)
    CHECK(result.table.size() == 6);
    for (const auto& entry : result.table) {
        CHECK(entry.k <= 4);
        CHECK(entry.k_prime < entry.k);
    }
}
