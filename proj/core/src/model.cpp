// SPDX-License-Identifier: Apache-2.0
#include "pipesim/model.hpp"

#include <cmath>
#include <stdexcept>

namespace pipesim {

namespace {

std::uint64_t layer_stream_seed(std::uint64_t seed, std::uint64_t index) {
    // Decorrelate per-layer streams without sharing state across layers.
    return seed ^ (0xA24BAED4963EE407ull * (index + 1) + 0x9FB21C651E98DF25ull);
}

void check_input_shape(const LayerBlock& block, const Tensor& x) {
    if (x.shape.size() != 2 || x.cols() != block.d)
        throw std::invalid_argument("layer: input must have shape [b, d]");
}

}  // namespace

LayeredModel build_model(std::uint64_t seed, int n_layers, int d, int frozen_prefix) {
    if (n_layers < 1) throw std::invalid_argument("build_model: n_layers must be >= 1");
    if (d < 1) throw std::invalid_argument("build_model: d must be >= 1");
    if (frozen_prefix < 0 || frozen_prefix > n_layers)
        throw std::invalid_argument("build_model: frozen_prefix out of range");

    LayeredModel model;
    model.d = d;
    model.n_layers = n_layers;
    model.seed = seed;
    model.blocks.reserve(static_cast<std::size_t>(n_layers));

    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n_layers; ++i) {
        LayerBlock block;
        block.index = i;
        block.d = d;
        block.activation = Activation::ReLU;
        block.frozen = i < frozen_prefix;
        block.weight.resize(static_cast<std::size_t>(d) * d);
        block.bias.resize(static_cast<std::size_t>(d));
        SplitMix64 rng(layer_stream_seed(seed, static_cast<std::uint64_t>(i)));
        for (auto& w : block.weight)
            w = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
        for (auto& b : block.bias)
            b = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
        model.blocks.push_back(std::move(block));
    }
    return model;
}

Tensor layer_forward(const LayerBlock& block, const Tensor& x) {
    check_input_shape(block, x);
    const auto b = x.rows();
    const auto d = static_cast<std::int64_t>(block.d);
    Tensor y = Tensor::zeros({b, d});
    for (std::int64_t r = 0; r < b; ++r) {
        for (std::int64_t j = 0; j < d; ++j) {
            float acc = 0.0f;
            for (std::int64_t i = 0; i < d; ++i)
                acc += x.at(r, i) * block.weight[static_cast<std::size_t>(i * d + j)];
            acc += block.bias[static_cast<std::size_t>(j)];
            if (block.activation == Activation::ReLU && acc < 0.0f) acc = 0.0f;
            y.at(r, j) = acc;
        }
    }
    return y;
}

LayerGrads layer_backward(const LayerBlock& block, const Tensor& x, const Tensor& dy) {
    check_input_shape(block, x);
    if (!dy.same_shape(x)) throw std::invalid_argument("layer_backward: dy shape mismatch");
    const auto b = x.rows();
    const auto d = static_cast<std::int64_t>(block.d);

    // Recompute pre-activation z = x*W + b to gate the ReLU derivative.
    Tensor z = Tensor::zeros({b, d});
    for (std::int64_t r = 0; r < b; ++r) {
        for (std::int64_t j = 0; j < d; ++j) {
            float acc = 0.0f;
            for (std::int64_t i = 0; i < d; ++i)
                acc += x.at(r, i) * block.weight[static_cast<std::size_t>(i * d + j)];
            acc += block.bias[static_cast<std::size_t>(j)];
            z.at(r, j) = acc;
        }
    }

    Tensor dz = Tensor::zeros({b, d});
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t j = 0; j < d; ++j) {
            float g = dy.at(r, j);
            if (block.activation == Activation::ReLU && z.at(r, j) <= 0.0f) g = 0.0f;
            dz.at(r, j) = g;
        }

    LayerGrads grads;
    grads.dx = Tensor::zeros({b, d});
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t i = 0; i < d; ++i) {
            float acc = 0.0f;
            for (std::int64_t j = 0; j < d; ++j)
                acc += dz.at(r, j) * block.weight[static_cast<std::size_t>(i * d + j)];
            grads.dx.at(r, i) = acc;
        }

    grads.dW.assign(static_cast<std::size_t>(d) * d, 0.0f);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) {
            float acc = 0.0f;
            for (std::int64_t r = 0; r < b; ++r) acc += x.at(r, i) * dz.at(r, j);
            grads.dW[static_cast<std::size_t>(i * d + j)] = acc;
        }

    grads.db.assign(static_cast<std::size_t>(d), 0.0f);
    for (std::int64_t j = 0; j < d; ++j) {
        float acc = 0.0f;
        for (std::int64_t r = 0; r < b; ++r) acc += dz.at(r, j);
        grads.db[static_cast<std::size_t>(j)] = acc;
    }
    return grads;
}

Tensor reference_forward(const LayeredModel& model, const Tensor& x) {
    Tensor cur = x;
    for (const auto& block : model.blocks) cur = layer_forward(block, cur);
    return cur;
}

float mse_loss(const Tensor& y, const Tensor& target) {
    if (!y.same_shape(target)) throw std::invalid_argument("mse: shape mismatch");
    float acc = 0.0f;
    for (std::size_t i = 0; i < y.values.size(); ++i) {
        const float e = y.values[i] - target.values[i];
        acc += e * e;
    }
    return acc / static_cast<float>(y.values.size());
}

Tensor mse_grad(const Tensor& y, const Tensor& target) {
    if (!y.same_shape(target)) throw std::invalid_argument("mse: shape mismatch");
    Tensor g = Tensor::zeros(y.shape);
    const float inv_n = 1.0f / static_cast<float>(y.values.size());
    for (std::size_t i = 0; i < y.values.size(); ++i)
        g.values[i] = 2.0f * (y.values[i] - target.values[i]) * inv_n;
    return g;
}

void apply_sgd(LayerBlock& block, const std::vector<float>& dW, const std::vector<float>& db,
               float lr) {
    if (block.frozen) return;
    for (std::size_t i = 0; i < block.weight.size(); ++i) block.weight[i] -= lr * dW[i];
    for (std::size_t i = 0; i < block.bias.size(); ++i) block.bias[i] -= lr * db[i];
}

TrainStepResult reference_train_step(LayeredModel& model, const Tensor& x, const Tensor& target,
                                     float lr) {
    std::vector<Tensor> inputs;
    inputs.reserve(model.blocks.size());
    Tensor cur = x;
    for (const auto& block : model.blocks) {
        inputs.push_back(cur);
        cur = layer_forward(block, cur);
    }

    TrainStepResult result;
    result.loss = mse_loss(cur, target);
    result.grads.resize(model.blocks.size());

    Tensor dy = mse_grad(cur, target);
    for (int i = model.n_layers - 1; i >= 0; --i) {
        auto& block = model.blocks[static_cast<std::size_t>(i)];
        LayerGrads g = layer_backward(block, inputs[static_cast<std::size_t>(i)], dy);
        dy = g.dx;
        if (!block.frozen) {
            apply_sgd(block, g.dW, g.db, lr);
            result.grads[static_cast<std::size_t>(i)] = std::move(g);
        } else {
            result.grads[static_cast<std::size_t>(i)].dx = std::move(g.dx);
        }
    }
    return result;
}

Tensor make_input(std::uint64_t seed, std::uint64_t stream_tag, std::int64_t rows, int d) {
    SplitMix64 rng(seed ^ (0xD6E8FEB86659FD93ull * (stream_tag + 1)));
    Tensor t = Tensor::zeros({rows, d});
    for (auto& v : t.values) v = static_cast<float>(2.0 * rng.next_unit() - 1.0);
    return t;
}

}  // namespace pipesim
