#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops shared by the embedding trainer and the ESIM
// stack. Every primitive has a scalar reference implementation and an AVX2
// variant; the active one is picked once at startup (cpuid, overridable via
// KGFUSE_KERNEL=scalar|avx2) and equivalence-tested in tests/test_kernels.cpp.
//
// Parity contract between variants:
//   - elementwise ops (axpy, scale, add, hadamard, add_scaled_product,
//     max_elementwise, matvec_t, ger) and max() are bit-exact;
//   - reductions (dot, dot3, sum, matvec, l2norm) reassociate and agree to
//     relative tolerance only.
namespace kgfuse::kernels {

enum class Variant { Scalar, Avx2 };

bool avx2_supported();
Variant active();
void set_variant(Variant v);  // test hook; normal code never calls this
std::string_view variant_name(Variant v);

// sum_i a[i]*b[i]
float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);

// sum_i a[i]*b[i]*c[i]
float dot3(std::span<const float> a, std::span<const float> b, std::span<const float> c);
double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c);

// y[i] += alpha * x[i]
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// x[i] *= alpha
void scale(float alpha, std::span<float> x);
void scale(double alpha, std::span<double> x);

// acc[i] += x[i]
void add(std::span<const float> x, std::span<float> acc);
void add(std::span<const double> x, std::span<double> acc);

// out[i] = a[i] * b[i]
void hadamard(std::span<const float> a, std::span<const float> b, std::span<float> out);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);

// out[i] += alpha * (a[i] * b[i])
void add_scaled_product(float alpha, std::span<const float> a, std::span<const float> b,
                        std::span<float> out);
void add_scaled_product(double alpha, std::span<const double> a, std::span<const double> b,
                        std::span<double> out);

// acc[i] = max(acc[i], x[i])
void max_elementwise(std::span<const float> x, std::span<float> acc);
void max_elementwise(std::span<const double> x, std::span<double> acc);

// y += W x, W row-major rows x cols, |x| = cols, |y| = rows
void matvec(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
            std::span<float> y);
void matvec(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
            std::span<double> y);

// y += W^T x, |x| = rows, |y| = cols
void matvec_t(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
              std::span<float> y);
void matvec_t(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
              std::span<double> y);

// W[i][j] += g[i] * x[j]  (rank-1 accumulate)
void ger(std::span<float> w, size_t rows, size_t cols, std::span<const float> g,
         std::span<const float> x);
void ger(std::span<double> w, size_t rows, size_t cols, std::span<const double> g,
         std::span<const double> x);

float sum(std::span<const float> x);
double sum(std::span<const double> x);

float max(std::span<const float> x);  // x non-empty
double max(std::span<const double> x);

float l2norm(std::span<const float> x);
double l2norm(std::span<const double> x);

}  // namespace kgfuse::kernels
