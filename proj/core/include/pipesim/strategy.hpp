// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pipesim/sim.hpp"

namespace pipesim {

enum class StrategyKind { Standard, CpuOnly, Naive, Superpipeline };

std::string to_string(StrategyKind kind);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Standard;
    int k = 0;        // Naive, Superpipeline
    int k_prime = 0;  // Superpipeline only
    TransferMode transfer_mode = TransferMode::Batch;

    /// Throws std::invalid_argument on violated parameter constraints.
    void validate(int n_layers) const;
};

/// Item-major compute order over the (item, layer) stream.
std::vector<std::pair<int, int>> execution_stream(int n_layers, int n_items);

/// Admission-unconstrained peak device weight residency, in bytes.
/// Standard: n*s; CpuOnly: 0; Naive: k*s; Superpipeline: min(k + k', n)*s.
std::uint64_t peak_weight_residency(const StrategyConfig& cfg, int n_layers,
                                    std::uint64_t weight_bytes_per_layer);

}  // namespace pipesim
