#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace volmap {

/// Dense row-major numeric array. The sole currency of the NN engine; float
/// for the production path, double for the verification path.
template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(element_count(shape), T{0});
    }
    TensorT(std::initializer_list<std::size_t> s)
        : TensorT(std::vector<std::size_t>(s)) {}

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    // 3D accessors for [C x H x W] layouts.
    T& at(std::size_t c, std::size_t h, std::size_t w) {
        return data[(c * shape[1] + h) * shape[2] + w];
    }
    T at(std::size_t c, std::size_t h, std::size_t w) const {
        return data[(c * shape[1] + h) * shape[2] + w];
    }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = (U)data[i];
        return out;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

/// Integer label plane [H x W]; cell values are class ids or the ignore sentinel.
struct LabelGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<int32_t> data;

    LabelGrid() = default;
    LabelGrid(std::size_t r, std::size_t c, int32_t fill = 0)
        : rows(r), cols(c), data(r * c, fill) {}

    int32_t& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    int32_t at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }
};

}  // namespace volmap
