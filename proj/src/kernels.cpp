#include "kgfuse/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_avx2.hpp"
#include "kernels_detail.hpp"

namespace kgfuse::kernels {

bool avx2_supported() {
#if defined(KGFUSE_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Variant resolve_initial() {
    if (const char* env = std::getenv("KGFUSE_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return Variant::Scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Variant::Avx2;
        return Variant::Scalar;
    }
    return avx2_supported() ? Variant::Avx2 : Variant::Scalar;
}

Variant g_variant = resolve_initial();

inline bool use_avx2() {
#ifdef KGFUSE_HAVE_AVX2
    return g_variant == Variant::Avx2;
#else
    return false;
#endif
}

}  // namespace

Variant active() { return g_variant; }

void set_variant(Variant v) {
    g_variant = (v == Variant::Avx2 && avx2_supported()) ? Variant::Avx2 : Variant::Scalar;
}

std::string_view variant_name(Variant v) {
    return v == Variant::Avx2 ? "avx2" : "scalar";
}

#ifdef KGFUSE_HAVE_AVX2
#define KGFUSE_DISPATCH(fn, ...) \
    return use_avx2() ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define KGFUSE_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

float dot(std::span<const float> a, std::span<const float> b) { KGFUSE_DISPATCH(dot, a, b); }
double dot(std::span<const double> a, std::span<const double> b) { KGFUSE_DISPATCH(dot, a, b); }

float dot3(std::span<const float> a, std::span<const float> b, std::span<const float> c) {
    KGFUSE_DISPATCH(dot3, a, b, c);
}
double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    KGFUSE_DISPATCH(dot3, a, b, c);
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
    KGFUSE_DISPATCH(axpy, alpha, x, y);
}
void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    KGFUSE_DISPATCH(axpy, alpha, x, y);
}

void scale(float alpha, std::span<float> x) { KGFUSE_DISPATCH(scale, alpha, x); }
void scale(double alpha, std::span<double> x) { KGFUSE_DISPATCH(scale, alpha, x); }

void add(std::span<const float> x, std::span<float> acc) { KGFUSE_DISPATCH(add, x, acc); }
void add(std::span<const double> x, std::span<double> acc) { KGFUSE_DISPATCH(add, x, acc); }

void hadamard(std::span<const float> a, std::span<const float> b, std::span<float> out) {
    KGFUSE_DISPATCH(hadamard, a, b, out);
}
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    KGFUSE_DISPATCH(hadamard, a, b, out);
}

void add_scaled_product(float alpha, std::span<const float> a, std::span<const float> b,
                        std::span<float> out) {
    KGFUSE_DISPATCH(add_scaled_product, alpha, a, b, out);
}
void add_scaled_product(double alpha, std::span<const double> a, std::span<const double> b,
                        std::span<double> out) {
    KGFUSE_DISPATCH(add_scaled_product, alpha, a, b, out);
}

void max_elementwise(std::span<const float> x, std::span<float> acc) {
    KGFUSE_DISPATCH(max_elementwise, x, acc);
}
void max_elementwise(std::span<const double> x, std::span<double> acc) {
    KGFUSE_DISPATCH(max_elementwise, x, acc);
}

void matvec(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
            std::span<float> y) {
    KGFUSE_DISPATCH(matvec, w, rows, cols, x, y);
}
void matvec(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
            std::span<double> y) {
    KGFUSE_DISPATCH(matvec, w, rows, cols, x, y);
}

void matvec_t(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
              std::span<float> y) {
    KGFUSE_DISPATCH(matvec_t, w, rows, cols, x, y);
}
void matvec_t(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
              std::span<double> y) {
    KGFUSE_DISPATCH(matvec_t, w, rows, cols, x, y);
}

void ger(std::span<float> w, size_t rows, size_t cols, std::span<const float> g,
         std::span<const float> x) {
    KGFUSE_DISPATCH(ger, w, rows, cols, g, x);
}
void ger(std::span<double> w, size_t rows, size_t cols, std::span<const double> g,
         std::span<const double> x) {
    KGFUSE_DISPATCH(ger, w, rows, cols, g, x);
}

float sum(std::span<const float> x) { KGFUSE_DISPATCH(sum, x); }
double sum(std::span<const double> x) { KGFUSE_DISPATCH(sum, x); }

float max(std::span<const float> x) { KGFUSE_DISPATCH(max, x); }
double max(std::span<const double> x) { KGFUSE_DISPATCH(max, x); }

float l2norm(std::span<const float> x) { KGFUSE_DISPATCH(l2norm, x); }
double l2norm(std::span<const double> x) { KGFUSE_DISPATCH(l2norm, x); }

#undef KGFUSE_DISPATCH

}  // namespace kgfuse::kernels
