// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>

namespace pipesim {

/// Cost model for the bounded device and its two transfer directions.
/// Bandwidths are bytes per virtual second, compute rates flops per
/// virtual second, latency virtual seconds per transfer call.
struct ArenaConfig {
    std::uint64_t capacity_bytes = 0;
    double h2d_bandwidth = 1.0;
    double d2h_bandwidth = 1.0;
    double per_call_latency = 0.0;
    double device_compute_rate = 1.0;
    double host_compute_rate = 1.0;

    void validate() const {
        if (h2d_bandwidth <= 0 || d2h_bandwidth <= 0)
            throw std::invalid_argument("arena: bandwidths must be > 0");
        if (device_compute_rate <= 0 || host_compute_rate <= 0)
            throw std::invalid_argument("arena: compute rates must be > 0");
        if (per_call_latency < 0)
            throw std::invalid_argument("arena: per_call_latency must be >= 0");
    }
};

enum class AllocTag { Weight, Activation, Gradient };

using AllocHandle = std::uint64_t;

/// Bounded device-memory ledger. Admission control only; the owner decides
/// whether a failed allocation means "wait" or "out of memory".
class DeviceArena {
public:
    explicit DeviceArena(ArenaConfig config) : config_(config) {}

    const ArenaConfig& config() const { return config_; }

    /// Returns nullopt when the allocation would exceed capacity.
    std::optional<AllocHandle> alloc(std::uint64_t bytes, AllocTag tag) {
        if (resident_bytes_ + bytes > config_.capacity_bytes) return std::nullopt;
        AllocHandle h = next_handle_++;
        ledger_.emplace(h, Entry{bytes, tag});
        resident_bytes_ += bytes;
        tag_bytes(tag) += bytes;
        if (resident_bytes_ > peak_bytes_) peak_bytes_ = resident_bytes_;
        if (tag_bytes(tag) > peak_tag_bytes(tag)) peak_tag_bytes(tag) = tag_bytes(tag);
        return h;
    }

    bool can_alloc(std::uint64_t bytes) const {
        return resident_bytes_ + bytes <= config_.capacity_bytes;
    }

    void free(AllocHandle handle) {
        auto it = ledger_.find(handle);
        if (it == ledger_.end())
            throw std::logic_error("arena: free of unknown or already-freed handle");
        resident_bytes_ -= it->second.bytes;
        tag_bytes(it->second.tag) -= it->second.bytes;
        ledger_.erase(it);
    }

    std::uint64_t resident_bytes() const { return resident_bytes_; }
    std::uint64_t resident_bytes(AllocTag tag) const {
        return tag == AllocTag::Weight       ? weight_bytes_
               : tag == AllocTag::Activation ? activation_bytes_
                                             : gradient_bytes_;
    }
    std::uint64_t peak_bytes() const { return peak_bytes_; }
    std::uint64_t peak_bytes(AllocTag tag) const {
        return tag == AllocTag::Weight       ? peak_weight_bytes_
               : tag == AllocTag::Activation ? peak_activation_bytes_
                                             : peak_gradient_bytes_;
    }
    std::size_t live_allocations() const { return ledger_.size(); }

private:
    struct Entry {
        std::uint64_t bytes;
        AllocTag tag;
    };

    std::uint64_t& tag_bytes(AllocTag tag) {
        return tag == AllocTag::Weight       ? weight_bytes_
               : tag == AllocTag::Activation ? activation_bytes_
                                             : gradient_bytes_;
    }
    std::uint64_t& peak_tag_bytes(AllocTag tag) {
        return tag == AllocTag::Weight       ? peak_weight_bytes_
               : tag == AllocTag::Activation ? peak_activation_bytes_
                                             : peak_gradient_bytes_;
    }

    ArenaConfig config_;
    std::unordered_map<AllocHandle, Entry> ledger_;
    AllocHandle next_handle_ = 1;
    std::uint64_t resident_bytes_ = 0;
    std::uint64_t weight_bytes_ = 0;
    std::uint64_t activation_bytes_ = 0;
    std::uint64_t gradient_bytes_ = 0;
    std::uint64_t peak_bytes_ = 0;
    std::uint64_t peak_weight_bytes_ = 0;
    std::uint64_t peak_activation_bytes_ = 0;
    std::uint64_t peak_gradient_bytes_ = 0;
};

}  // namespace pipesim
