// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pipesim/strategy.hpp"

namespace pipesim {

enum class Placement { Host, InFlightToDevice, Device, InFlightToHost };

/// Online state of one compute pass. `sequence` is the layer visited at each
/// compute position (forward stream for inference, reversed for the backward
/// pass). Placement is tracked per layer; a layer appears at most once in the
/// arena at any instant.
struct PipelineState {
    std::vector<int> sequence;
    std::vector<Placement> placement;  // indexed by layer
    int next_compute = 0;
    bool compute_busy = false;
    int next_load = 0;   // sequence position of the next layer not yet scheduled for load
    int next_evict = 0;  // naive: boundary of groups already issued for eviction
    std::vector<int> evict_ready;  // superpipeline: computed layers awaiting eviction, finish order
    bool prologue_issued = false;
    int group_begin = 0;  // naive: current phase group [begin, end) in sequence positions
    int group_end = 0;

    int stream_length() const { return static_cast<int>(sequence.size()); }
    int n_layers() const { return static_cast<int>(placement.size()); }
    bool pass_compute_done() const { return next_compute >= stream_length() && !compute_busy; }
};

struct Action {
    enum class Kind { IssueH2D, IssueD2H, BeginCompute, Wait };
    Kind kind = Kind::Wait;
    std::vector<int> layers;  // IssueH2D / IssueD2H
    int position = -1;        // BeginCompute: position into the sequence

    static Action wait() { return Action{}; }
};

/// Starts a pass: installs the compute sequence and resets per-pass cursors.
/// Standard keeps its residency across passes, so its prologue fires once.
void init_pass(PipelineState& state, const StrategyConfig& cfg, std::vector<int> sequence,
               bool first_pass);

/// Deterministic residency policy: decides which transfers to issue and
/// whether compute may proceed, given the current pipeline state. Pure;
/// the caller applies the returned actions and updates the state.
std::vector<Action> policy_step(const StrategyConfig& cfg, const PipelineState& state);

/// State transitions applied by the execution engine.
void mark_load_issued(PipelineState& state, int count);
void mark_naive_evict_issued(PipelineState& state);
void mark_superpipe_evict_issued(PipelineState& state, int count);
void on_compute_begin(PipelineState& state);
void on_compute_complete(const StrategyConfig& cfg, PipelineState& state, int layer);
/// Advances the naive phase group once the current group is computed and
/// fully evicted; returns true if the group moved.
bool advance_naive_group(PipelineState& state, const StrategyConfig& cfg);

}  // namespace pipesim
