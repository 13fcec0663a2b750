// SPDX-License-Identifier: Apache-2.0
#include "pipesim/strategy.hpp"

#include <algorithm>
#include <stdexcept>

namespace pipesim {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Standard: return "standard";
        case StrategyKind::CpuOnly: return "cpu_only";
        case StrategyKind::Naive: return "naive";
        case StrategyKind::Superpipeline: return "superpipeline";
    }
    return "unknown";
}

void StrategyConfig::validate(int n_layers) const {
    if (n_layers < 1) throw std::invalid_argument("strategy: n_layers must be >= 1");
    switch (kind) {
        case StrategyKind::Standard:
        case StrategyKind::CpuOnly:
            break;
        case StrategyKind::Naive:
            if (k <= 0 || k > n_layers)
                throw std::invalid_argument("strategy: naive requires 0 < k <= n_layers");
            break;
        case StrategyKind::Superpipeline:
            if (k <= 0 || k > n_layers)
                throw std::invalid_argument("strategy: superpipeline requires 0 < k <= n_layers");
            if (k_prime <= 0 || k_prime >= k)
                throw std::invalid_argument("strategy: superpipeline requires 0 < k' < k");
            break;
    }
}

std::vector<std::pair<int, int>> execution_stream(int n_layers, int n_items) {
    if (n_layers < 1 || n_items < 1)
        throw std::invalid_argument("execution_stream: counts must be >= 1");
    std::vector<std::pair<int, int>> stream;
    stream.reserve(static_cast<std::size_t>(n_layers) * n_items);
    for (int item = 0; item < n_items; ++item)
        for (int layer = 0; layer < n_layers; ++layer) stream.emplace_back(item, layer);
    return stream;
}

std::uint64_t peak_weight_residency(const StrategyConfig& cfg, int n_layers,
                                    std::uint64_t weight_bytes_per_layer) {
    cfg.validate(n_layers);
    const auto s = weight_bytes_per_layer;
    switch (cfg.kind) {
        case StrategyKind::Standard: return static_cast<std::uint64_t>(n_layers) * s;
        case StrategyKind::CpuOnly: return 0;
        case StrategyKind::Naive: return static_cast<std::uint64_t>(cfg.k) * s;
        case StrategyKind::Superpipeline:
            return static_cast<std::uint64_t>(std::min(cfg.k + cfg.k_prime, n_layers)) * s;
    }
    return 0;
}

}  // namespace pipesim
