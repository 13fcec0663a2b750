// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace pipesim {

enum class TransferDirection { HostToDevice, DeviceToHost };
enum class TransferMode { Sequential, Batch };

/// Completion kinds in fixed tie-break priority: D2H before H2D before Compute.
enum class EventKind : int { D2HComplete = 0, H2DComplete = 1, ComputeComplete = 2 };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::ComputeComplete;
    std::uint64_t payload = 0;
    std::uint64_t seq = 0;  // insertion order, last tie-break
};

/// Min-ordered pending-event queue over deterministic virtual time.
class VirtualClock {
public:
    void schedule(double time, EventKind kind, std::uint64_t payload = 0) {
        if (time < now_) throw std::logic_error("clock: scheduling into the past");
        queue_.push(Event{time, kind, payload, next_seq_++});
    }

    std::optional<Event> pop() {
        if (queue_.empty()) return std::nullopt;
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        return ev;
    }

    double now() const { return now_; }
    std::optional<double> next_time() const {
        if (queue_.empty()) return std::nullopt;
        return queue_.top().time;
    }
    bool empty() const { return queue_.empty(); }
    std::size_t pending() const { return queue_.size(); }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
};

/// Pops events in time order (ties by kind priority, then insertion order),
/// invoking the callback for each; returns the time of the last event.
template <typename Callback>
double run_to_quiescence(VirtualClock& clock, Callback&& on_event) {
    while (auto ev = clock.pop()) on_event(*ev);
    return clock.now();
}

struct TransferRequest {
    TransferDirection direction = TransferDirection::HostToDevice;
    std::vector<int> items;
    TransferMode mode = TransferMode::Sequential;
    double issue_time = 0.0;
};

/// Sequential: sum of (latency + size/bandwidth) per item.
/// Batch: one latency plus the pooled size over bandwidth.
double transfer_duration(const std::vector<std::uint64_t>& sizes, TransferMode mode,
                         double bandwidth, double per_call_latency);

/// One channel job: a transfer that occupies the channel for `duration`
/// once started. Residency changes are applied by the owner at completion.
struct TransferJob {
    std::vector<int> layers;
    std::uint64_t weight_bytes = 0;
    std::uint64_t activation_bytes = 0;
    double duration = 0.0;
    double start_time = -1.0;

    std::uint64_t total_bytes() const { return weight_bytes + activation_bytes; }
};

/// FIFO per direction: a job starts when the channel is idle and every
/// predecessor has completed. H2D jobs additionally wait on an admission
/// predicate supplied by the owner.
class TransferChannel {
public:
    explicit TransferChannel(TransferDirection direction) : direction_(direction) {}

    TransferDirection direction() const { return direction_; }
    void push(TransferJob job) { queue_.push_back(std::move(job)); }

    bool busy() const { return active_.has_value(); }
    bool drained() const { return !busy() && queue_.empty(); }
    std::size_t queued() const { return queue_.size(); }
    const TransferJob& active() const { return *active_; }
    const TransferJob& front() const { return queue_.front(); }
    TransferJob& front_mut() { return queue_.front(); }

    /// Starts the head job if the channel is idle and admit(front) holds.
    template <typename Admit>
    bool try_start(VirtualClock& clock, Admit&& admit) {
        if (busy() || queue_.empty()) return false;
        if (!admit(queue_.front())) return false;
        active_ = std::move(queue_.front());
        queue_.pop_front();
        active_->start_time = clock.now();
        clock.schedule(clock.now() + active_->duration,
                       direction_ == TransferDirection::DeviceToHost ? EventKind::D2HComplete
                                                                     : EventKind::H2DComplete);
        return true;
    }

    TransferJob take_completed() {
        if (!busy()) throw std::logic_error("channel: no active job to complete");
        TransferJob job = std::move(*active_);
        active_.reset();
        return job;
    }

private:
    TransferDirection direction_;
    std::deque<TransferJob> queue_;
    std::optional<TransferJob> active_;
};

}  // namespace pipesim
