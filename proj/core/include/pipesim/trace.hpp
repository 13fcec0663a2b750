// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pipesim {

struct MemoryFootprint {
    std::uint64_t weight_bytes = 0;
    std::uint64_t activation_bytes = 0;
    std::uint64_t gradient_bytes = 0;

    std::uint64_t total() const { return weight_bytes + activation_bytes + gradient_bytes; }

    friend bool operator==(const MemoryFootprint&, const MemoryFootprint&) = default;
};

struct TraceEvent {
    enum class Kind { Compute, H2D, D2H, Stall };

    double t_start = 0.0;
    double t_end = 0.0;
    Kind kind = Kind::Compute;

    // Compute detail.
    int item = -1;
    int layer = -1;
    bool backward = false;
    // Transfer detail: layer set and bytes moved by this request.
    std::vector<int> layers;
    std::uint64_t moved_weight_bytes = 0;
    std::uint64_t moved_activation_bytes = 0;
    // Compute detail: activation bytes allocated at start (forward, training)
    // or released at end (backward, checkpointing), and the gradient buffer
    // held for the duration of a backward compute.
    std::uint64_t compute_activation_bytes = 0;
    std::uint64_t compute_gradient_bytes = 0;
    // Stall detail.
    std::string reason;

    // Ledger snapshot once every same-instant transition at t_end has settled.
    std::uint64_t resident_bytes_after = 0;
    MemoryFootprint footprint_after;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

using Trace = std::vector<TraceEvent>;

struct RunSummary {
    std::string strategy;
    int k = 0;
    int k_prime = 0;
    std::uint64_t peak_bytes = 0;
    double per_item_time = 0.0;
    double makespan = 0.0;
    double total_stall_time = 0.0;
    std::uint64_t n_transfers_h2d = 0;
    std::uint64_t n_transfers_d2h = 0;
    std::string output_digest;
    // Instantaneous peaks from the arena ledger, by tag, plus the bytes of
    // gradient buffers allocated over the whole step.
    std::uint64_t peak_weight_bytes = 0;
    std::uint64_t peak_activation_bytes = 0;
    std::uint64_t peak_gradient_bytes = 0;
    std::uint64_t total_gradient_bytes = 0;
    double loss = 0.0;
    bool has_loss = false;
};

/// Aggregates the timing/peak/transfer-count fields from a completed trace.
/// Strategy echo, digest, and ledger peaks are stamped by the engine.
RunSummary summarize(const Trace& trace, int n_items);

std::string kind_name(TraceEvent::Kind kind);
std::string event_detail(const TraceEvent& ev);

/// Shortest round-trip decimal form, deterministic across runs.
std::string format_double(double v);

void export_trace_csv(const Trace& trace, const std::string& path);
void export_trace_json(const Trace& trace, const RunSummary& summary, const std::string& path);
Trace import_trace_csv(const std::string& path);

std::string summary_to_json(const RunSummary& summary);

}  // namespace pipesim
