// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pipesim/tensor.hpp"

namespace pipesim {

enum class Activation { ReLU, Identity };

/// One repeating model partition: a dense block y = act(x*W + b).
struct LayerBlock {
    int index = 0;
    int d = 0;
    std::vector<float> weight;  // d*d, row-major
    std::vector<float> bias;    // d
    Activation activation = Activation::ReLU;
    bool frozen = false;

    std::uint64_t weight_bytes() const {
        auto dd = static_cast<std::uint64_t>(d);
        return (dd * dd + dd) * 4;
    }
};

struct LayeredModel {
    int d = 0;
    int n_layers = 0;
    std::uint64_t seed = 0;
    std::vector<LayerBlock> blocks;

    std::uint64_t layer_bytes() const {
        return blocks.empty() ? 0 : blocks.front().weight_bytes();
    }
};

/// splitmix64; the per-layer stream is seeded from (seed, layer index).
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t s) : state(s) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

LayeredModel build_model(std::uint64_t seed, int n_layers, int d, int frozen_prefix);

Tensor layer_forward(const LayerBlock& block, const Tensor& x);

struct LayerGrads {
    Tensor dx;
    std::vector<float> dW;  // d*d
    std::vector<float> db;  // d
};

/// Backprop through one block; x must be the exact forward input.
/// ReLU derivative at 0 is 0.
LayerGrads layer_backward(const LayerBlock& block, const Tensor& x, const Tensor& dy);

/// All-resident composition of layer_forward; the fidelity oracle.
Tensor reference_forward(const LayeredModel& model, const Tensor& x);

/// Mean-squared-error loss and its gradient w.r.t. y, in float32 arithmetic.
float mse_loss(const Tensor& y, const Tensor& target);
Tensor mse_grad(const Tensor& y, const Tensor& target);

/// In-place SGD update; no-op for frozen blocks.
void apply_sgd(LayerBlock& block, const std::vector<float>& dW, const std::vector<float>& db,
               float lr);

struct TrainStepResult {
    float loss = 0.0f;
    std::vector<LayerGrads> grads;  // one entry per block; empty dW/db for frozen blocks
};

/// Full-resident forward + MSE + reverse backward + SGD. Mutates the model.
TrainStepResult reference_train_step(LayeredModel& model, const Tensor& x, const Tensor& target,
                                     float lr);

/// Deterministic input generator for workloads.
Tensor make_input(std::uint64_t seed, std::uint64_t stream_tag, std::int64_t rows, int d);

}  // namespace pipesim
