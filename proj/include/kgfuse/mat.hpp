#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kgfuse {

// Dense row-major matrix. No expression templates, no views into other
// matrices; the SIMD kernels operate on row spans.
template <typename T>
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(size_t r, size_t c, T init = T{}) : rows(r), cols(c), data(r * c, init) {}

    std::span<T> row(size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const T> row(size_t i) const { return {data.data() + i * cols, cols}; }

    T& at(size_t i, size_t j) { return data[i * cols + j]; }
    const T& at(size_t i, size_t j) const { return data[i * cols + j]; }

    std::span<T> flat() { return {data.data(), data.size()}; }
    std::span<const T> flat() const { return {data.data(), data.size()}; }

    void zero() { data.assign(data.size(), T{}); }

    bool operator==(const Mat&) const = default;
};

}  // namespace kgfuse
