// SPDX-License-Identifier: Apache-2.0
#include "pipesim/scheduler.hpp"

#include <algorithm>
#include <stdexcept>

namespace pipesim {

namespace {

bool group_resident(const PipelineState& state, int begin, int end) {
    for (int p = begin; p < end; ++p)
        if (state.placement[static_cast<std::size_t>(state.sequence[static_cast<std::size_t>(p)])] !=
            Placement::Device)
            return false;
    return true;
}

bool group_on_host(const PipelineState& state, int begin, int end) {
    for (int p = begin; p < end; ++p)
        if (state.placement[static_cast<std::size_t>(state.sequence[static_cast<std::size_t>(p)])] !=
            Placement::Host)
            return false;
    return true;
}

std::vector<int> sequence_slice(const PipelineState& state, int begin, int end) {
    std::vector<int> layers;
    layers.reserve(static_cast<std::size_t>(end - begin));
    for (int p = begin; p < end; ++p)
        layers.push_back(state.sequence[static_cast<std::size_t>(p)]);
    return layers;
}

}  // namespace

void init_pass(PipelineState& state, const StrategyConfig& cfg, std::vector<int> sequence,
               bool first_pass) {
    state.sequence = std::move(sequence);
    state.next_compute = 0;
    state.compute_busy = false;
    state.next_load = 0;
    state.next_evict = 0;
    state.evict_ready.clear();
    state.group_begin = 0;
    state.group_end = cfg.kind == StrategyKind::Naive
                          ? std::min(cfg.k, state.stream_length())
                          : 0;
    // Standard never evicts, so residency from the first pass carries over.
    state.prologue_issued = cfg.kind == StrategyKind::Standard && !first_pass;
}

std::vector<Action> policy_step(const StrategyConfig& cfg, const PipelineState& state) {
    std::vector<Action> actions;
    const int len = state.stream_length();

    auto compute_ready = [&](bool need_residency) {
        if (state.compute_busy || state.next_compute >= len) return false;
        if (!need_residency) return true;
        const int layer = state.sequence[static_cast<std::size_t>(state.next_compute)];
        return state.placement[static_cast<std::size_t>(layer)] == Placement::Device;
    };
    auto begin_compute = [&] {
        Action a;
        a.kind = Action::Kind::BeginCompute;
        a.position = state.next_compute;
        actions.push_back(std::move(a));
    };

    switch (cfg.kind) {
        case StrategyKind::Standard: {
            if (!state.prologue_issued) {
                Action a;
                a.kind = Action::Kind::IssueH2D;
                for (int l = 0; l < state.n_layers(); ++l) a.layers.push_back(l);
                actions.push_back(std::move(a));
            }
            if (compute_ready(true)) begin_compute();
            break;
        }
        case StrategyKind::CpuOnly: {
            if (compute_ready(false)) begin_compute();
            break;
        }
        case StrategyKind::Naive: {
            if (state.next_load <= state.group_begin && state.group_end > state.group_begin) {
                Action a;
                a.kind = Action::Kind::IssueH2D;
                a.layers = sequence_slice(state, state.group_begin, state.group_end);
                actions.push_back(std::move(a));
            }
            // Strictly phased: compute waits until the whole group is resident.
            if (compute_ready(true) && state.next_compute < state.group_end &&
                group_resident(state, state.group_begin, state.group_end))
                begin_compute();
            if (state.next_compute >= state.group_end && !state.compute_busy &&
                state.next_evict < state.group_end) {
                Action a;
                a.kind = Action::Kind::IssueD2H;
                a.layers = sequence_slice(state, state.group_begin, state.group_end);
                actions.push_back(std::move(a));
            }
            break;
        }
        case StrategyKind::Superpipeline: {
            if (!state.prologue_issued) {
                Action a;
                a.kind = Action::Kind::IssueH2D;
                a.layers = sequence_slice(state, 0, std::min(cfg.k, len));
                actions.push_back(std::move(a));
            }
            if (static_cast<int>(state.evict_ready.size()) >= cfg.k_prime) {
                Action evict;
                evict.kind = Action::Kind::IssueD2H;
                evict.layers.assign(state.evict_ready.begin(),
                                    state.evict_ready.begin() + cfg.k_prime);
                actions.push_back(std::move(evict));
                if (state.next_load < len) {
                    Action load;
                    load.kind = Action::Kind::IssueH2D;
                    load.layers = sequence_slice(
                        state, state.next_load,
                        std::min(state.next_load + cfg.k_prime, len));
                    actions.push_back(std::move(load));
                }
            } else if (state.next_compute >= len && !state.compute_busy &&
                       !state.evict_ready.empty()) {
                // Final partial group at stream end is evicted as-is.
                Action evict;
                evict.kind = Action::Kind::IssueD2H;
                evict.layers = state.evict_ready;
                actions.push_back(std::move(evict));
            }
            if (compute_ready(true)) begin_compute();
            break;
        }
    }

    if (actions.empty()) actions.push_back(Action::wait());
    return actions;
}

void mark_load_issued(PipelineState& state, int count) {
    state.next_load += count;
    state.prologue_issued = true;
}

void mark_naive_evict_issued(PipelineState& state) { state.next_evict = state.group_end; }

void mark_superpipe_evict_issued(PipelineState& state, int count) {
    state.evict_ready.erase(state.evict_ready.begin(), state.evict_ready.begin() + count);
}

void on_compute_begin(PipelineState& state) {
    if (state.compute_busy) throw std::logic_error("scheduler: compute already busy");
    state.compute_busy = true;
}

void on_compute_complete(const StrategyConfig& cfg, PipelineState& state, int layer) {
    state.compute_busy = false;
    state.next_compute += 1;
    if (cfg.kind == StrategyKind::Superpipeline) state.evict_ready.push_back(layer);
}

bool advance_naive_group(PipelineState& state, const StrategyConfig& cfg) {
    if (cfg.kind != StrategyKind::Naive) return false;
    if (state.group_end >= state.stream_length()) return false;
    if (state.next_compute < state.group_end || state.next_evict < state.group_end) return false;
    if (!group_on_host(state, state.group_begin, state.group_end)) return false;
    state.group_begin = state.group_end;
    state.group_end = std::min(state.group_end + cfg.k, state.stream_length());
    return true;
}

}  // namespace pipesim
