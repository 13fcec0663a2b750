// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "pipesim/engine.hpp"
#include "pipesim/sim.hpp"

namespace {

using namespace pipesim;

ArenaConfig default_arena() {
    ArenaConfig arena;
    arena.capacity_bytes = 1ull << 30;
    arena.h2d_bandwidth = 200.0;
    arena.d2h_bandwidth = 100.0;
    arena.device_compute_rate = 512.0;
    arena.host_compute_rate = 5.12;
    return arena;
}

StrategyConfig strategy_for(int idx) {
    StrategyConfig s;
    switch (idx) {
        case 0: s.kind = StrategyKind::Standard; break;
        case 1: s.kind = StrategyKind::CpuOnly; break;
        case 2:
            s.kind = StrategyKind::Naive;
            s.k = 4;
            break;
        default:
            s.kind = StrategyKind::Superpipeline;
            s.k = 4;
            s.k_prime = 2;
            break;
    }
    return s;
}

void BM_RunInference(benchmark::State& state) {
    LayeredModel model = build_model(7, 8, 16, 0);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(make_input(7, i, 1, 16));
    StrategyConfig strategy = strategy_for(static_cast<int>(state.range(0)));
    ArenaConfig arena = default_arena();
    for (auto _ : state) {
        auto result = run_inference(model, inputs, strategy, arena);
        benchmark::DoNotOptimize(result.summary.makespan);
    }
}
BENCHMARK(BM_RunInference)->DenseRange(0, 3);

void BM_RunTrainStep(benchmark::State& state) {
    LayeredModel model = build_model(7, 8, 16, 0);
    Tensor x = make_input(7, 0, 4, 16);
    Tensor target = make_input(7, 1, 4, 16);
    StrategyConfig strategy = strategy_for(3);
    ArenaConfig arena = default_arena();
    TrainConfig train_cfg;
    train_cfg.batch_size = 4;
    train_cfg.checkpointing = state.range(0) != 0;
    for (auto _ : state) {
        auto result = run_train_step(model, x, target, strategy, arena, train_cfg);
        benchmark::DoNotOptimize(result.loss);
    }
}
BENCHMARK(BM_RunTrainStep)->Arg(0)->Arg(1);

void BM_TransferDuration(benchmark::State& state) {
    std::vector<std::uint64_t> sizes(static_cast<std::size_t>(state.range(0)), 4096);
    for (auto _ : state) {
        double d = transfer_duration(sizes,
                                     state.range(1) ? TransferMode::Batch
                                                    : TransferMode::Sequential,
                                     1.0e9, 1.0e-5);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(BM_TransferDuration)->Args({8, 0})->Args({8, 1})->Args({64, 0})->Args({64, 1});

}  // namespace

BENCHMARK_MAIN();
