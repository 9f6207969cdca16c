#pragma once

#include <cstddef>
#include <span>

// AVX2 variants. Only compiled into the dispatch table when the build
// supports -mavx2 (KGFUSE_HAVE_AVX2); selected at runtime only if cpuid
// reports AVX2.
namespace kgfuse::kernels::avx2 {

float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);
float dot3(std::span<const float> a, std::span<const float> b, std::span<const float> c);
double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c);
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(float alpha, std::span<float> x);
void scale(double alpha, std::span<double> x);
void add(std::span<const float> x, std::span<float> acc);
void add(std::span<const double> x, std::span<double> acc);
void hadamard(std::span<const float> a, std::span<const float> b, std::span<float> out);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);
void add_scaled_product(float alpha, std::span<const float> a, std::span<const float> b,
                        std::span<float> out);
void add_scaled_product(double alpha, std::span<const double> a, std::span<const double> b,
                        std::span<double> out);
void max_elementwise(std::span<const float> x, std::span<float> acc);
void max_elementwise(std::span<const double> x, std::span<double> acc);
void matvec(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
            std::span<float> y);
void matvec(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
            std::span<double> y);
void matvec_t(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
              std::span<float> y);
void matvec_t(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
              std::span<double> y);
void ger(std::span<float> w, size_t rows, size_t cols, std::span<const float> g,
         std::span<const float> x);
void ger(std::span<double> w, size_t rows, size_t cols, std::span<const double> g,
         std::span<const double> x);
float sum(std::span<const float> x);
double sum(std::span<const double> x);
float max(std::span<const float> x);
double max(std::span<const double> x);
float l2norm(std::span<const float> x);
double l2norm(std::span<const double> x);

}  // namespace kgfuse::kernels::avx2
