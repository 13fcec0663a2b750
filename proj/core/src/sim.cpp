// SPDX-License-Identifier: Apache-2.0
#include "pipesim/sim.hpp"

namespace pipesim {

double transfer_duration(const std::vector<std::uint64_t>& sizes, TransferMode mode,
                         double bandwidth, double per_call_latency) {
    if (bandwidth <= 0) throw std::invalid_argument("transfer_duration: bandwidth must be > 0");
    if (mode == TransferMode::Sequential) {
        double total = 0.0;
        for (auto s : sizes) total += per_call_latency + static_cast<double>(s) / bandwidth;
        return total;
    }
    std::uint64_t pooled = 0;
    for (auto s : sizes) pooled += s;
    return per_call_latency + static_cast<double>(pooled) / bandwidth;
}

}  // namespace pipesim
