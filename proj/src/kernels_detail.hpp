#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>

// Scalar reference kernels. These define the semantics; the AVX2 variants
// must reproduce them (bit-exactly for elementwise ops, to tolerance for
// reductions). Keep the arithmetic expression shapes in sync with
// kernels_avx2.cpp: elementwise ops are written mul-then-add so neither
// variant contracts to FMA.
namespace kgfuse::kernels::scalar {

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    assert(a.size() == b.size());
    T acc{};
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T dot3(std::span<const T> a, std::span<const T> b, std::span<const T> c) {
    assert(a.size() == b.size() && b.size() == c.size());
    T acc{};
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] * b[i]) * c[i];
    return acc;
}

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
    assert(x.size() == y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        T t = alpha * x[i];
        y[i] += t;
    }
}

template <typename T>
void scale(T alpha, std::span<T> x) {
    for (auto& v : x) v *= alpha;
}

template <typename T>
void add(std::span<const T> x, std::span<T> acc) {
    assert(x.size() == acc.size());
    for (size_t i = 0; i < x.size(); ++i) acc[i] += x[i];
}

template <typename T>
void hadamard(std::span<const T> a, std::span<const T> b, std::span<T> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

template <typename T>
void add_scaled_product(T alpha, std::span<const T> a, std::span<const T> b, std::span<T> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    for (size_t i = 0; i < a.size(); ++i) {
        T t = a[i] * b[i];
        T s = alpha * t;
        out[i] += s;
    }
}

template <typename T>
void max_elementwise(std::span<const T> x, std::span<T> acc) {
    assert(x.size() == acc.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] > acc[i]) acc[i] = x[i];
    }
}

template <typename T>
void matvec(std::span<const T> w, size_t rows, size_t cols, std::span<const T> x,
            std::span<T> y) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (size_t i = 0; i < rows; ++i) {
        y[i] += dot<T>(w.subspan(i * cols, cols), x);
    }
}

template <typename T>
void matvec_t(std::span<const T> w, size_t rows, size_t cols, std::span<const T> x,
              std::span<T> y) {
    assert(w.size() == rows * cols && x.size() == rows && y.size() == cols);
    for (size_t i = 0; i < rows; ++i) {
        const T xi = x[i];
        const T* row = w.data() + i * cols;
        for (size_t j = 0; j < cols; ++j) {
            T t = xi * row[j];
            y[j] += t;
        }
    }
}

template <typename T>
void ger(std::span<T> w, size_t rows, size_t cols, std::span<const T> g, std::span<const T> x) {
    assert(w.size() == rows * cols && g.size() == rows && x.size() == cols);
    for (size_t i = 0; i < rows; ++i) {
        const T gi = g[i];
        T* row = w.data() + i * cols;
        for (size_t j = 0; j < cols; ++j) {
            T t = gi * x[j];
            row[j] += t;
        }
    }
}

template <typename T>
T sum(std::span<const T> x) {
    T acc{};
    for (T v : x) acc += v;
    return acc;
}

template <typename T>
T max(std::span<const T> x) {
    assert(!x.empty());
    T m = x[0];
    for (T v : x)
        if (v > m) m = v;
    return m;
}

template <typename T>
T l2norm(std::span<const T> x) {
    return std::sqrt(dot<T>(x, x));
}

}  // namespace kgfuse::kernels::scalar
