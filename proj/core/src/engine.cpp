// SPDX-License-Identifier: Apache-2.0
#include "pipesim/engine.hpp"

#include <algorithm>
#include <optional>

#include "pipesim/scheduler.hpp"
#include "pipesim/sim.hpp"

namespace pipesim {

namespace {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

class Engine {
public:
    Engine(const LayeredModel& model, const StrategyConfig& strategy, const ArenaConfig& arena_cfg)
        : model_(model),
          strategy_(strategy),
          arena_cfg_(arena_cfg),
          arena_(arena_cfg),
          h2d_(TransferDirection::HostToDevice),
          d2h_(TransferDirection::DeviceToHost) {
        arena_cfg_.validate();
        strategy_.validate(model_.n_layers);
        const auto n = static_cast<std::size_t>(model_.n_layers);
        state_.placement.assign(n, Placement::Host);
        weight_handle_.assign(n, std::nullopt);
        act_handle_.assign(n, std::nullopt);
        act_on_host_.assign(n, false);
    }

    RunResult infer(const std::vector<Tensor>& inputs) {
        if (inputs.empty()) throw std::invalid_argument("run_inference: no inputs");
        for (const auto& in : inputs)
            if (in.shape.size() != 2 || in.cols() != model_.d)
                throw std::invalid_argument("run_inference: inputs must have shape [b, d]");
        inputs_ = &inputs;
        n_items_ = static_cast<int>(inputs.size());
        batch_rows_ = inputs.front().rows();

        if (strategy_.kind != StrategyKind::CpuOnly) {
            io_handle_ = arena_.alloc(activation_bytes(), AllocTag::Activation);
            if (!io_handle_)
                throw OomDeadlockError("activation buffer alone exceeds device capacity");
        }

        std::vector<int> seq;
        seq.reserve(static_cast<std::size_t>(n_items_) * model_.n_layers);
        for (auto [item, layer] : execution_stream(model_.n_layers, n_items_)) {
            (void)item;
            seq.push_back(layer);
        }
        passes_.push_back(std::move(seq));

        run();

        RunResult result;
        result.outputs = std::move(outputs_);
        result.model = model_;
        result.summary = make_summary(digest_tensors(result.outputs));
        result.trace = std::move(trace_);
        return result;
    }

    RunResult train(const Tensor& x, const Tensor& target, const TrainConfig& train_cfg) {
        train_cfg.validate();
        if (x.shape.size() != 2 || x.cols() != model_.d || x.rows() != train_cfg.batch_size)
            throw std::invalid_argument("run_train_step: x must have shape [batch_size, d]");
        if (!target.same_shape(x))
            throw std::invalid_argument("run_train_step: target shape mismatch");
        training_ = true;
        train_cfg_ = train_cfg;
        target_ = &target;
        n_items_ = 1;
        batch_rows_ = train_cfg.batch_size;
        cur_ = x;
        saved_inputs_.resize(static_cast<std::size_t>(model_.n_layers));

        std::vector<int> fwd(static_cast<std::size_t>(model_.n_layers));
        for (int i = 0; i < model_.n_layers; ++i) fwd[static_cast<std::size_t>(i)] = i;
        std::vector<int> bwd(fwd.rbegin(), fwd.rend());
        passes_.push_back(std::move(fwd));
        passes_.push_back(std::move(bwd));

        run();

        RunResult result;
        result.model = model_;
        result.loss = loss_;
        result.summary = make_summary(digest_train(loss_, result.model));
        result.trace = std::move(trace_);
        result.summary.loss = loss_;
        result.summary.has_loss = true;
        return result;
    }

private:
    // ----- byte accounting helpers -----

    std::uint64_t activation_bytes() const {
        return static_cast<std::uint64_t>(batch_rows_) * static_cast<std::uint64_t>(model_.d) * 4;
    }
    std::uint64_t layer_bytes() const { return model_.layer_bytes(); }

    double bandwidth(TransferDirection dir) const {
        return dir == TransferDirection::HostToDevice ? arena_cfg_.h2d_bandwidth
                                                      : arena_cfg_.d2h_bandwidth;
    }

    int arena_weight_layers() const {
        int count = 0;
        for (const auto& h : weight_handle_)
            if (h) ++count;
        return count;
    }

    // ----- run loop -----

    void run() {
        init_pass(state_, strategy_, passes_[0], true);
        pump();
        while (auto ev = clock_.pop()) {
            handle(*ev);
            pump();
            stamp_snapshots(clock_.next_time().value_or(clock_.now() + 1.0));
        }
        if (!finished())
            throw OomDeadlockError("no runnable event: required working set cannot fit in " +
                                   std::to_string(arena_cfg_.capacity_bytes) + " bytes");
        release_remaining();
    }

    bool finished() const {
        return pass_ + 1 == static_cast<int>(passes_.size()) && state_.pass_compute_done() &&
               evictions_flushed() && h2d_.drained() && d2h_.drained();
    }

    bool evictions_flushed() const {
        if (strategy_.kind == StrategyKind::Superpipeline) return state_.evict_ready.empty();
        if (strategy_.kind == StrategyKind::Naive)
            return state_.next_evict >= state_.stream_length();
        return true;
    }

    void release_remaining() {
        for (auto& h : weight_handle_)
            if (h) { arena_.free(*h); h.reset(); }
        for (auto& h : act_handle_)
            if (h) { arena_.free(*h); h.reset(); }
        if (io_handle_) { arena_.free(*io_handle_); io_handle_.reset(); }
    }

    void pump() {
        bool changed = true;
        while (changed) {
            changed = false;
            if (advance_naive_group(state_, strategy_)) changed = true;
            if (maybe_advance_pass()) changed = true;
            for (const auto& action : policy_step(strategy_, state_))
                if (apply(action)) changed = true;
            if (try_start_channels()) changed = true;
        }
    }

    bool maybe_advance_pass() {
        if (pass_ + 1 >= static_cast<int>(passes_.size())) return false;
        if (!state_.pass_compute_done() || !evictions_flushed()) return false;
        pass_ += 1;
        if (training_ && pass_ == 1) {
            loss_ = mse_loss(cur_, *target_);
            dy_ = mse_grad(cur_, *target_);
        }
        init_pass(state_, strategy_, passes_[static_cast<std::size_t>(pass_)], false);
        return true;
    }

    // ----- actions -----

    bool apply(const Action& action) {
        switch (action.kind) {
            case Action::Kind::IssueH2D: return issue_transfer(action.layers, h2d_);
            case Action::Kind::IssueD2H: return issue_transfer(action.layers, d2h_);
            case Action::Kind::BeginCompute: return begin_compute(action.position);
            case Action::Kind::Wait: return false;
        }
        return false;
    }

    bool issue_transfer(const std::vector<int>& layers, TransferChannel& channel) {
        const bool to_device = channel.direction() == TransferDirection::HostToDevice;
        auto job_for = [&](const std::vector<int>& set) {
            TransferJob job;
            job.layers = set;
            std::vector<std::uint64_t> sizes;
            for (int layer : set) {
                std::uint64_t bytes = layer_bytes();
                job.weight_bytes += layer_bytes();
                if (carries_activation(layer, to_device)) {
                    bytes += activation_bytes();
                    job.activation_bytes += activation_bytes();
                }
                sizes.push_back(bytes);
            }
            job.duration = transfer_duration(sizes, TransferMode::Batch,
                                             bandwidth(channel.direction()),
                                             arena_cfg_.per_call_latency);
            return job;
        };
        if (strategy_.transfer_mode == TransferMode::Sequential) {
            // One channel job per layer: residency is granted layer by layer.
            for (int layer : layers) channel.push(job_for({layer}));
        } else {
            channel.push(job_for(layers));
        }
        if (to_device) {
            mark_load_issued(state_, static_cast<int>(layers.size()));
        } else {
            for (int layer : layers)
                state_.placement[static_cast<std::size_t>(layer)] = Placement::InFlightToHost;
            if (strategy_.kind == StrategyKind::Naive)
                mark_naive_evict_issued(state_);
            else if (strategy_.kind == StrategyKind::Superpipeline)
                mark_superpipe_evict_issued(state_, static_cast<int>(layers.size()));
        }
        return true;
    }

    bool carries_activation(int layer, bool to_device) const {
        if (!training_ || !train_cfg_.checkpointing) return false;
        if (to_device) return act_on_host_[static_cast<std::size_t>(layer)];
        // Offload the layer's input activation when its forward window retires.
        return pass_ == 0 && act_handle_[static_cast<std::size_t>(layer)].has_value();
    }

    bool begin_compute(int position) {
        if (state_.compute_busy) return false;
        const int layer = state_.sequence[static_cast<std::size_t>(position)];
        const auto& block = model_.blocks[static_cast<std::size_t>(layer)];
        const bool backward = training_ && pass_ == 1;
        const bool on_device = strategy_.kind != StrategyKind::CpuOnly;

        if (on_device) {
            if (state_.placement[static_cast<std::size_t>(layer)] != Placement::Device)
                return false;
            if (backward && train_cfg_.checkpointing && act_on_host_[static_cast<std::size_t>(layer)])
                return false;
        }

        std::uint64_t grad_bytes = 0;
        std::uint64_t act_bytes = 0;
        if (training_ && on_device) {
            if (!backward) {
                auto h = arena_.alloc(activation_bytes(), AllocTag::Activation);
                if (!h) return false;  // wait for memory; deadlock detection catches dead ends
                act_handle_[static_cast<std::size_t>(layer)] = *h;
                act_bytes = activation_bytes();
            } else if (!block.frozen) {
                auto h = arena_.alloc(layer_bytes(), AllocTag::Gradient);
                if (!h) return false;
                grad_handle_ = *h;
                grad_bytes = layer_bytes();
                total_gradient_bytes_ += grad_bytes;
            }
        } else if (training_ && !backward) {
            act_bytes = 0;  // cpu-only: host memory is not modeled
        }

        const double now = clock_.now();
        if (compute_started_ && now > compute_idle_since_) {
            TraceEvent stall;
            stall.kind = TraceEvent::Kind::Stall;
            stall.t_start = compute_idle_since_;
            stall.t_end = now;
            stall.reason = "residency";
            record(stall);
        }
        compute_started_ = true;

        const double flops = compute_flops(backward, block.frozen);
        const double rate = on_device ? arena_cfg_.device_compute_rate : arena_cfg_.host_compute_rate;
        compute_start_time_ = now;
        pending_act_bytes_ = act_bytes;
        pending_grad_bytes_ = grad_bytes;
        on_compute_begin(state_);
        clock_.schedule(now + flops / rate, EventKind::ComputeComplete,
                        static_cast<std::uint64_t>(position));
        return true;
    }

    double compute_flops(bool backward, bool frozen) const {
        const double b = static_cast<double>(batch_rows_);
        const double d = static_cast<double>(model_.d);
        const double fwd = 2.0 * b * d * d;
        if (!backward) return fwd;
        return frozen ? fwd : 2.0 * fwd;  // dx only vs dx + dW/db
    }

    // ----- channel starts -----

    /// Checkpointed activations ride the reload of their layer. Whether a
    /// layer's activation is host-side is only known once the eviction has
    /// drained, so the payload settles at channel start, not at issue.
    void refresh_h2d_payload(TransferJob& job) {
        job.weight_bytes = 0;
        job.activation_bytes = 0;
        std::vector<std::uint64_t> sizes;
        for (int layer : job.layers) {
            std::uint64_t bytes = layer_bytes();
            job.weight_bytes += layer_bytes();
            if (carries_activation(layer, true)) {
                bytes += activation_bytes();
                job.activation_bytes += activation_bytes();
            }
            sizes.push_back(bytes);
        }
        job.duration = transfer_duration(sizes, TransferMode::Batch,
                                         bandwidth(TransferDirection::HostToDevice),
                                         arena_cfg_.per_call_latency);
    }

    bool try_start_channels() {
        bool any = false;
        while (d2h_.try_start(clock_, [](const TransferJob&) { return true; })) any = true;
        if (!h2d_.busy() && h2d_.queued() > 0) refresh_h2d_payload(h2d_.front_mut());
        // try_start schedules one active job at a time; loop is for clarity only.
        if (h2d_.try_start(clock_, [&](const TransferJob& job) { return admit_h2d(job); })) {
            const auto& job = h2d_.active();
            for (int layer : job.layers) {
                auto h = arena_.alloc(layer_bytes(), AllocTag::Weight);
                if (!h) throw std::logic_error("engine: admission check out of sync with ledger");
                if (state_.placement[static_cast<std::size_t>(layer)] != Placement::Host)
                    throw std::logic_error("engine: H2D started for a layer not on host");
                weight_handle_[static_cast<std::size_t>(layer)] = *h;
                state_.placement[static_cast<std::size_t>(layer)] = Placement::InFlightToDevice;
                if (training_ && train_cfg_.checkpointing &&
                    act_on_host_[static_cast<std::size_t>(layer)]) {
                    auto ah = arena_.alloc(activation_bytes(), AllocTag::Activation);
                    if (!ah) throw std::logic_error("engine: admission check out of sync with ledger");
                    act_handle_[static_cast<std::size_t>(layer)] = *ah;
                }
            }
            any = true;
        }
        return any;
    }

    bool admit_h2d(const TransferJob& job) const {
        // A layer re-enters the device only after its eviction has drained.
        for (int layer : job.layers)
            if (state_.placement[static_cast<std::size_t>(layer)] != Placement::Host) return false;
        if (!arena_.can_alloc(job.total_bytes())) return false;
        if (strategy_.kind == StrategyKind::Superpipeline) {
            // Weight window: resident plus in-flight layers never exceed k + k'.
            if (arena_weight_layers() + static_cast<int>(job.layers.size()) >
                strategy_.k + strategy_.k_prime)
                return false;
        }
        return true;
    }

    // ----- event handling -----

    void handle(const Event& ev) {
        switch (ev.kind) {
            case EventKind::D2HComplete: on_d2h_complete(); break;
            case EventKind::H2DComplete: on_h2d_complete(); break;
            case EventKind::ComputeComplete: on_compute_done(static_cast<int>(ev.payload)); break;
        }
    }

    void on_d2h_complete() {
        TransferJob job = d2h_.take_completed();
        for (int layer : job.layers) {
            auto& h = weight_handle_[static_cast<std::size_t>(layer)];
            arena_.free(*h);
            h.reset();
            state_.placement[static_cast<std::size_t>(layer)] = Placement::Host;
            if (job.activation_bytes) {
                auto& ah = act_handle_[static_cast<std::size_t>(layer)];
                arena_.free(*ah);
                ah.reset();
                act_on_host_[static_cast<std::size_t>(layer)] = true;
            }
        }
        record_transfer(TraceEvent::Kind::D2H, job);
    }

    void on_h2d_complete() {
        TransferJob job = h2d_.take_completed();
        for (int layer : job.layers) {
            state_.placement[static_cast<std::size_t>(layer)] = Placement::Device;
            if (job.activation_bytes) act_on_host_[static_cast<std::size_t>(layer)] = false;
        }
        record_transfer(TraceEvent::Kind::H2D, job);
    }

    void on_compute_done(int position) {
        const int layer = state_.sequence[static_cast<std::size_t>(position)];
        const bool backward = training_ && pass_ == 1;
        auto& block = model_.blocks[static_cast<std::size_t>(layer)];

        if (!backward) {
            if (!training_) {
                const int item = position / model_.n_layers;
                if (layer == 0) cur_ = (*inputs_)[static_cast<std::size_t>(item)];
            } else {
                saved_inputs_[static_cast<std::size_t>(layer)] = cur_;
            }
            cur_ = layer_forward(block, cur_);
            if (!training_ && layer == model_.n_layers - 1) outputs_.push_back(cur_);
        } else {
            LayerGrads g = layer_backward(block, saved_inputs_[static_cast<std::size_t>(layer)], dy_);
            dy_ = std::move(g.dx);
            if (!block.frozen) apply_sgd(block, g.dW, g.db, train_cfg_.lr);
            if (grad_handle_) {
                arena_.free(*grad_handle_);
                grad_handle_.reset();
            }
            if (train_cfg_.checkpointing && act_handle_[static_cast<std::size_t>(layer)]) {
                arena_.free(*act_handle_[static_cast<std::size_t>(layer)]);
                act_handle_[static_cast<std::size_t>(layer)].reset();
            }
        }

        TraceEvent ev;
        ev.kind = TraceEvent::Kind::Compute;
        ev.t_start = compute_start_time_;
        ev.t_end = clock_.now();
        ev.item = training_ ? 0 : position / model_.n_layers;
        ev.layer = layer;
        ev.backward = backward;
        ev.compute_activation_bytes = pending_act_bytes_;
        ev.compute_gradient_bytes = pending_grad_bytes_;
        record(ev);
        pending_act_bytes_ = 0;
        pending_grad_bytes_ = 0;

        on_compute_complete(strategy_, state_, layer);
        compute_idle_since_ = clock_.now();
    }

    // ----- trace -----

    void record_transfer(TraceEvent::Kind kind, const TransferJob& job) {
        TraceEvent ev;
        ev.kind = kind;
        ev.t_start = job.start_time;
        ev.t_end = clock_.now();
        ev.layers = job.layers;
        ev.moved_weight_bytes = job.weight_bytes;
        ev.moved_activation_bytes = job.activation_bytes;
        record(ev);
    }

    void record(TraceEvent ev) {
        trace_.push_back(std::move(ev));
        unstamped_.push_back(trace_.size() - 1);
    }

    /// Footprint snapshots settle once the clock moves past the instant, so a
    /// row reflects every same-instant free and admission.
    void stamp_snapshots(double next_time) {
        if (unstamped_.empty() || next_time == clock_.now()) return;
        for (auto idx : unstamped_) {
            auto& ev = trace_[idx];
            ev.resident_bytes_after = arena_.resident_bytes();
            ev.footprint_after.weight_bytes = arena_.resident_bytes(AllocTag::Weight);
            ev.footprint_after.activation_bytes = arena_.resident_bytes(AllocTag::Activation);
            ev.footprint_after.gradient_bytes = arena_.resident_bytes(AllocTag::Gradient);
        }
        unstamped_.clear();
    }

    RunSummary make_summary(std::string digest) {
        RunSummary s = summarize(trace_, n_items_);
        s.strategy = to_string(strategy_.kind);
        s.k = strategy_.k;
        s.k_prime = strategy_.k_prime;
        s.output_digest = std::move(digest);
        s.peak_weight_bytes = arena_.peak_bytes(AllocTag::Weight);
        s.peak_activation_bytes = arena_.peak_bytes(AllocTag::Activation);
        s.peak_gradient_bytes = arena_.peak_bytes(AllocTag::Gradient);
        s.total_gradient_bytes = total_gradient_bytes_;
        return s;
    }

    // ----- members -----

    LayeredModel model_;
    StrategyConfig strategy_;
    ArenaConfig arena_cfg_;
    DeviceArena arena_;
    VirtualClock clock_;
    TransferChannel h2d_;
    TransferChannel d2h_;
    PipelineState state_;

    std::vector<std::vector<int>> passes_;
    int pass_ = 0;

    const std::vector<Tensor>* inputs_ = nullptr;
    const Tensor* target_ = nullptr;
    bool training_ = false;
    TrainConfig train_cfg_;
    int n_items_ = 1;
    std::int64_t batch_rows_ = 1;

    std::vector<std::optional<AllocHandle>> weight_handle_;
    std::vector<std::optional<AllocHandle>> act_handle_;
    std::vector<bool> act_on_host_;
    std::optional<AllocHandle> io_handle_;
    std::optional<AllocHandle> grad_handle_;

    Tensor cur_;
    Tensor dy_;
    std::vector<Tensor> saved_inputs_;
    std::vector<Tensor> outputs_;
    float loss_ = 0.0f;

    double compute_start_time_ = 0.0;
    double compute_idle_since_ = 0.0;
    bool compute_started_ = false;
    std::uint64_t pending_act_bytes_ = 0;
    std::uint64_t pending_grad_bytes_ = 0;
    std::uint64_t total_gradient_bytes_ = 0;

    Trace trace_;
    std::vector<std::size_t> unstamped_;
};

}  // namespace

RunResult run_inference(const LayeredModel& model, const std::vector<Tensor>& inputs,
                        const StrategyConfig& strategy, const ArenaConfig& arena_cfg) {
    Engine engine(model, strategy, arena_cfg);
    return engine.infer(inputs);
}

RunResult run_train_step(const LayeredModel& model, const Tensor& x, const Tensor& target,
                         const StrategyConfig& strategy, const ArenaConfig& arena_cfg,
                         const TrainConfig& train_cfg) {
    Engine engine(model, strategy, arena_cfg);
    return engine.train(x, target, train_cfg);
}

std::string digest_tensors(const std::vector<Tensor>& tensors) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& t : tensors) {
        h = fnv1a64(t.shape.data(), t.shape.size() * sizeof(std::int64_t), h);
        h = fnv1a64(t.values.data(), t.values.size() * sizeof(float), h);
    }
    return to_hex(h);
}

std::string digest_train(float loss, const LayeredModel& model) {
    std::uint64_t h = fnv1a64(&loss, sizeof(loss));
    for (const auto& block : model.blocks) {
        h = fnv1a64(block.weight.data(), block.weight.size() * sizeof(float), h);
        h = fnv1a64(block.bias.data(), block.bias.size() * sizeof(float), h);
    }
    return to_hex(h);
}

FidelityResult verify_fidelity(const std::vector<Tensor>& outputs, const LayeredModel& model,
                               const std::vector<Tensor>& inputs) {
    FidelityResult result;
    result.digest = digest_tensors(outputs);
    if (outputs.size() != inputs.size()) return result;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (!(reference_forward(model, inputs[i]) == outputs[i])) return result;
    result.ok = true;
    return result;
}

}  // namespace pipesim
