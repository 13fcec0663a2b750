// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "pipesim/model.hpp"

using namespace pipesim;

namespace {

// Independent naive affine+ReLU in the same accumulation order as the library.
Tensor oracle_forward(const LayerBlock& block, const Tensor& x) {
    const auto b = x.rows();
    const auto d = static_cast<std::int64_t>(block.d);
    Tensor y = Tensor::zeros({b, d});
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t j = 0; j < d; ++j) {
            float acc = 0.0f;
            for (std::int64_t i = 0; i < d; ++i)
                acc += x.at(r, i) * block.weight[static_cast<std::size_t>(i * d + j)];
            acc += block.bias[static_cast<std::size_t>(j)];
            y.at(r, j) = (block.activation == Activation::ReLU && acc < 0.0f) ? 0.0f : acc;
        }
    return y;
}

// Double-precision scalar probe f(W, b) = sum(c .* relu(x W + b)).
double probe(const LayerBlock& block, const Tensor& x, const Tensor& c) {
    const auto b = x.rows();
    const auto d = static_cast<std::int64_t>(block.d);
    double f = 0.0;
    for (std::int64_t r = 0; r < b; ++r)
        for (std::int64_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < d; ++i)
                acc += static_cast<double>(x.at(r, i)) *
                       static_cast<double>(block.weight[static_cast<std::size_t>(i * d + j)]);
            acc += static_cast<double>(block.bias[static_cast<std::size_t>(j)]);
            if (block.activation == Activation::ReLU && acc < 0.0) acc = 0.0;
            f += static_cast<double>(c.at(r, j)) * acc;
        }
    return f;
}

bool close(double got, double want, double rel, double abs) {
    return std::fabs(got - want) <= abs + rel * std::fabs(want);
}

}  // namespace

TEST_CASE("layer_forward matches an independent naive matmul bitwise") {
    for (std::uint64_t seed : {1ull, 42ull, 1234ull}) {
        LayeredModel model = build_model(seed, 3, 7, 0);
        Tensor x = make_input(seed, 9, 5, 7);
        for (const auto& block : model.blocks) {
            Tensor got = layer_forward(block, x);
            Tensor want = oracle_forward(block, x);
            REQUIRE(got == want);
            x = got;
        }
    }
}

TEST_CASE("layer_backward matches central finite differences") {
    LayeredModel model = build_model(77, 1, 6, 0);
    LayerBlock& block = model.blocks[0];
    Tensor x = make_input(77, 3, 4, 6);
    Tensor c = make_input(77, 4, 4, 6);

    LayerGrads grads = layer_backward(block, x, c);

    const double eps = 1e-4;
    const auto d = static_cast<std::int64_t>(block.d);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) {
            auto idx = static_cast<std::size_t>(i * d + j);
            const float keep = block.weight[idx];
            block.weight[idx] = static_cast<float>(keep + eps);
            double up = probe(block, x, c);
            block.weight[idx] = static_cast<float>(keep - eps);
            double down = probe(block, x, c);
            block.weight[idx] = keep;
            double fd = (up - down) / (2 * eps);
            CHECK(close(grads.dW[idx], fd, 1e-3, 1e-5));
        }
    for (std::int64_t j = 0; j < d; ++j) {
        auto idx = static_cast<std::size_t>(j);
        const float keep = block.bias[idx];
        block.bias[idx] = static_cast<float>(keep + eps);
        double up = probe(block, x, c);
        block.bias[idx] = static_cast<float>(keep - eps);
        double down = probe(block, x, c);
        block.bias[idx] = keep;
        double fd = (up - down) / (2 * eps);
        CHECK(close(grads.db[idx], fd, 1e-3, 1e-5));
    }

    // dx by perturbing the input.
    for (std::int64_t r = 0; r < x.rows(); ++r)
        for (std::int64_t i = 0; i < d; ++i) {
            const float keep = x.at(r, i);
            x.at(r, i) = static_cast<float>(keep + eps);
            double up = probe(block, x, c);
            x.at(r, i) = static_cast<float>(keep - eps);
            double down = probe(block, x, c);
            x.at(r, i) = keep;
            double fd = (up - down) / (2 * eps);
            CHECK(close(grads.dx.at(r, i), fd, 1e-3, 1e-5));
        }
}

TEST_CASE("model construction is deterministic and seed-sensitive") {
    LayeredModel a = build_model(5, 4, 8, 0);
    LayeredModel b = build_model(5, 4, 8, 0);
    LayeredModel c = build_model(6, 4, 8, 0);
    for (int i = 0; i < 4; ++i) {
        CHECK(a.blocks[i].weight == b.blocks[i].weight);
        CHECK(a.blocks[i].bias == b.blocks[i].bias);
        CHECK(a.blocks[i].weight != c.blocks[i].weight);
    }
    // Per-layer streams differ from each other.
    CHECK(a.blocks[0].weight != a.blocks[1].weight);
}

TEST_CASE("weight initialization stays within the 1/sqrt(d) bound") {
    LayeredModel m = build_model(11, 2, 16, 0);
    const float bound = 1.0f / std::sqrt(16.0f);
    for (const auto& block : m.blocks) {
        for (float w : block.weight) CHECK(std::fabs(w) <= bound);
        for (float b : block.bias) CHECK(std::fabs(b) <= bound);
    }
}

TEST_CASE("frozen blocks ignore sgd and keep weights through a train step") {
    LayeredModel m = build_model(3, 4, 6, 2);
    CHECK(m.blocks[0].frozen);
    CHECK(m.blocks[1].frozen);
    CHECK_FALSE(m.blocks[2].frozen);

    std::vector<float> w0 = m.blocks[0].weight;
    std::vector<float> w2 = m.blocks[2].weight;
    Tensor x = make_input(3, 0, 2, 6);
    Tensor target = make_input(3, 1, 2, 6);
    reference_train_step(m, x, target, 0.05f);
    CHECK(m.blocks[0].weight == w0);
    CHECK(m.blocks[2].weight != w2);
}

TEST_CASE("identity activation is a plain affine map") {
    LayeredModel m = build_model(9, 1, 3, 0);
    m.blocks[0].activation = Activation::Identity;
    m.blocks[0].weight = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    m.blocks[0].bias = {1, 2, 3};
    Tensor x = Tensor::zeros({1, 3});
    x.values = {-5, 0, 5};
    Tensor y = layer_forward(m.blocks[0], x);
    CHECK(y.values == std::vector<float>{-4, 2, 8});

    m.blocks[0].activation = Activation::ReLU;
    y = layer_forward(m.blocks[0], x);
    CHECK(y.values == std::vector<float>{0, 2, 8});
}

TEST_CASE("mse loss and gradient on known values") {
    Tensor y = Tensor::zeros({1, 2});
    y.values = {1.0f, 3.0f};
    Tensor t = Tensor::zeros({1, 2});
    t.values = {0.0f, 1.0f};
    CHECK(mse_loss(y, t) == 2.5f);  // (1 + 4) / 2
    Tensor g = mse_grad(y, t);
    CHECK(g.values == std::vector<float>{1.0f, 2.0f});  // 2*e/n
}

TEST_CASE("reference_train_step reduces loss on a second step") {
    LayeredModel m = build_model(21, 3, 8, 0);
    Tensor x = make_input(21, 0, 4, 8);
    Tensor target = make_input(21, 1, 4, 8);
    float first = reference_train_step(m, x, target, 0.05f).loss;
    float second = reference_train_step(m, x, target, 0.05f).loss;
    CHECK(second < first);
}

TEST_CASE("train step is deterministic") {
    LayeredModel a = build_model(13, 4, 8, 1);
    LayeredModel b = build_model(13, 4, 8, 1);
    Tensor x = make_input(13, 0, 2, 8);
    Tensor target = make_input(13, 1, 2, 8);
    auto ra = reference_train_step(a, x, target, 0.01f);
    auto rb = reference_train_step(b, x, target, 0.01f);
    CHECK(std::memcmp(&ra.loss, &rb.loss, sizeof(float)) == 0);
    for (int i = 0; i < 4; ++i) {
        CHECK(a.blocks[i].weight == b.blocks[i].weight);
        CHECK(a.blocks[i].bias == b.blocks[i].bias);
    }
}

TEST_CASE("make_input is deterministic, tag-sensitive, bounded") {
    Tensor a = make_input(8, 0, 3, 5);
    Tensor b = make_input(8, 0, 3, 5);
    Tensor c = make_input(8, 1, 3, 5);
    CHECK(a == b);
    CHECK(a.values != c.values);
    for (float v : a.values) CHECK(std::fabs(v) <= 1.0f);
}

TEST_CASE("construction rejects bad parameters") {
    CHECK_THROWS_AS(build_model(1, 0, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_model(1, 4, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_model(1, 4, 4, 5), std::invalid_argument);
    CHECK_THROWS_AS(build_model(1, 4, 4, -1), std::invalid_argument);
}
