// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pipesim {

/// Dense row-major float32 tensor.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> values;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> s, std::vector<float> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (element_count(shape) != static_cast<std::int64_t>(values.size()))
            throw std::invalid_argument("tensor: shape does not match value count");
    }

    static std::int64_t element_count(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<std::int64_t> shape) {
        auto n = element_count(shape);
        return Tensor{std::move(shape), std::vector<float>(static_cast<std::size_t>(n), 0.0f)};
    }

    std::int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::int64_t cols() const { return shape.size() < 2 ? 0 : shape[1]; }

    float& at(std::int64_t r, std::int64_t c) {
        return values[static_cast<std::size_t>(r * cols() + c)];
    }
    float at(std::int64_t r, std::int64_t c) const {
        return values[static_cast<std::size_t>(r * cols() + c)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.values == b.values;
    }
};

}  // namespace pipesim
