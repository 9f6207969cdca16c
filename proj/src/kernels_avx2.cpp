#include "kernels_avx2.hpp"

#ifdef KGFUSE_HAVE_AVX2

#include <immintrin.h>

#include <cassert>
#include <cmath>

// Elementwise ops use separate mul/add (no FMA) so each output element is
// computed with exactly the rounding sequence of the scalar reference.
// Reductions keep 4/8-lane accumulators and may use FMA; callers compare
// them to the reference with a tolerance, not bitwise.
namespace kgfuse::kernels::avx2 {

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehl_ps(lo, lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_shuffle_ps(lo, lo, 0x1);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
}

inline double hsum256d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    lo = _mm_add_sd(lo, sh);
    return _mm_cvtsd_f64(lo);
}

}  // namespace

float dot(std::span<const float> a, std::span<const float> b) {
    assert(a.size() == b.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(7);
    __m256 acc = _mm256_setzero_ps();
    for (size_t i = 0; i < vn; i += 8) {
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a.data() + i), _mm256_loadu_ps(b.data() + i), acc);
    }
    float r = hsum256(acc);
    for (size_t i = vn; i < n; ++i) r += a[i] * b[i];
    return r;
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < vn; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc);
    }
    double r = hsum256d(acc);
    for (size_t i = vn; i < n; ++i) r += a[i] * b[i];
    return r;
}

float dot3(std::span<const float> a, std::span<const float> b, std::span<const float> c) {
    assert(a.size() == b.size() && b.size() == c.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(7);
    __m256 acc = _mm256_setzero_ps();
    for (size_t i = 0; i < vn; i += 8) {
        __m256 ab = _mm256_mul_ps(_mm256_loadu_ps(a.data() + i), _mm256_loadu_ps(b.data() + i));
        acc = _mm256_fmadd_ps(ab, _mm256_loadu_ps(c.data() + i), acc);
    }
    float r = hsum256(acc);
    for (size_t i = vn; i < n; ++i) r += (a[i] * b[i]) * c[i];
    return r;
}

double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    assert(a.size() == b.size() && b.size() == c.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < vn; i += 4) {
        __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c.data() + i), acc);
    }
    double r = hsum256d(acc);
    for (size_t i = vn; i < n; ++i) r += (a[i] * b[i]) * c[i];
    return r;
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
    assert(x.size() == y.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(7);
    const __m256 va = _mm256_set1_ps(alpha);
    for (size_t i = 0; i < vn; i += 8) {
        __m256 t = _mm256_mul_ps(va, _mm256_loadu_ps(x.data() + i));
        _mm256_storeu_ps(y.data() + i, _mm256_add_ps(_mm256_loadu_ps(y.data() + i), t));
    }
    for (size_t i = vn; i < n; ++i) {
        float t = alpha * x[i];
        y[i] += t;
    }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(3);
    const __m256d va = _mm256_set1_pd(alpha);
    for (size_t i = 0; i < vn; i += 4) {
        __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i));
        _mm256_storeu_pd(y.data() + i, _mm256_add_pd(_mm256_loadu_pd(y.data() + i), t));
    }
    for (size_t i = vn; i < n; ++i) {
        double t = alpha * x[i];
        y[i] += t;
    }
}

void scale(float alpha, std::span<float> x) {
    const size_t n = x.size();
    const size_t vn = n & ~size_t(7);
    const __m256 va = _mm256_set1_ps(alpha);
    for (size_t i = 0; i < vn; i += 8) {
        _mm256_storeu_ps(x.data() + i, _mm256_mul_ps(_mm256_loadu_ps(x.data() + i), va));
    }
    for (size_t i = vn; i < n; ++i) x[i] *= alpha;
}

void scale(double alpha, std::span<double> x) {
    const size_t n = x.size();
    const size_t vn = n & ~size_t(3);
    const __m256d va = _mm256_set1_pd(alpha);
    for (size_t i = 0; i < vn; i += 4) {
        _mm256_storeu_pd(x.data() + i, _mm256_mul_pd(_mm256_loadu_pd(x.data() + i), va));
    }
    for (size_t i = vn; i < n; ++i) x[i] *= alpha;
}

void add(std::span<const float> x, std::span<float> acc) {
    assert(x.size() == acc.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(7);
    for (size_t i = 0; i < vn; i += 8) {
        _mm256_storeu_ps(acc.data() + i, _mm256_add_ps(_mm256_loadu_ps(acc.data() + i),
                                                       _mm256_loadu_ps(x.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) acc[i] += x[i];
}

void add(std::span<const double> x, std::span<double> acc) {
    assert(x.size() == acc.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(3);
    for (size_t i = 0; i < vn; i += 4) {
        _mm256_storeu_pd(acc.data() + i, _mm256_add_pd(_mm256_loadu_pd(acc.data() + i),
                                                       _mm256_loadu_pd(x.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) acc[i] += x[i];
}

void hadamard(std::span<const float> a, std::span<const float> b, std::span<float> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(7);
    for (size_t i = 0; i < vn; i += 8) {
        _mm256_storeu_ps(out.data() + i, _mm256_mul_ps(_mm256_loadu_ps(a.data() + i),
                                                       _mm256_loadu_ps(b.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) out[i] = a[i] * b[i];
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(3);
    for (size_t i = 0; i < vn; i += 4) {
        _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(_mm256_loadu_pd(a.data() + i),
                                                       _mm256_loadu_pd(b.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) out[i] = a[i] * b[i];
}

void add_scaled_product(float alpha, std::span<const float> a, std::span<const float> b,
                        std::span<float> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(7);
    const __m256 va = _mm256_set1_ps(alpha);
    for (size_t i = 0; i < vn; i += 8) {
        __m256 t = _mm256_mul_ps(_mm256_loadu_ps(a.data() + i), _mm256_loadu_ps(b.data() + i));
        __m256 s = _mm256_mul_ps(va, t);
        _mm256_storeu_ps(out.data() + i, _mm256_add_ps(_mm256_loadu_ps(out.data() + i), s));
    }
    for (size_t i = vn; i < n; ++i) {
        float t = a[i] * b[i];
        float s = alpha * t;
        out[i] += s;
    }
}

void add_scaled_product(double alpha, std::span<const double> a, std::span<const double> b,
                        std::span<double> out) {
    assert(a.size() == b.size() && b.size() == out.size());
    const size_t n = a.size();
    const size_t vn = n & ~size_t(3);
    const __m256d va = _mm256_set1_pd(alpha);
    for (size_t i = 0; i < vn; i += 4) {
        __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        __m256d s = _mm256_mul_pd(va, t);
        _mm256_storeu_pd(out.data() + i, _mm256_add_pd(_mm256_loadu_pd(out.data() + i), s));
    }
    for (size_t i = vn; i < n; ++i) {
        double t = a[i] * b[i];
        double s = alpha * t;
        out[i] += s;
    }
}

void max_elementwise(std::span<const float> x, std::span<float> acc) {
    assert(x.size() == acc.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(7);
    for (size_t i = 0; i < vn; i += 8) {
        _mm256_storeu_ps(acc.data() + i, _mm256_max_ps(_mm256_loadu_ps(acc.data() + i),
                                                       _mm256_loadu_ps(x.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) {
        if (x[i] > acc[i]) acc[i] = x[i];
    }
}

void max_elementwise(std::span<const double> x, std::span<double> acc) {
    assert(x.size() == acc.size());
    const size_t n = x.size();
    const size_t vn = n & ~size_t(3);
    for (size_t i = 0; i < vn; i += 4) {
        _mm256_storeu_pd(acc.data() + i, _mm256_max_pd(_mm256_loadu_pd(acc.data() + i),
                                                       _mm256_loadu_pd(x.data() + i)));
    }
    for (size_t i = vn; i < n; ++i) {
        if (x[i] > acc[i]) acc[i] = x[i];
    }
}

void matvec(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
            std::span<float> y) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (size_t i = 0; i < rows; ++i) {
        y[i] += dot(w.subspan(i * cols, cols), x);
    }
}

void matvec(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
            std::span<double> y) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (size_t i = 0; i < rows; ++i) {
        y[i] += dot(w.subspan(i * cols, cols), x);
    }
}

void matvec_t(std::span<const float> w, size_t rows, size_t cols, std::span<const float> x,
              std::span<float> y) {
    assert(w.size() == rows * cols && x.size() == rows && y.size() == cols);
    const size_t vc = cols & ~size_t(7);
    for (size_t i = 0; i < rows; ++i) {
        const float* row = w.data() + i * cols;
        const __m256 xi = _mm256_set1_ps(x[i]);
        for (size_t j = 0; j < vc; j += 8) {
            __m256 t = _mm256_mul_ps(xi, _mm256_loadu_ps(row + j));
            _mm256_storeu_ps(y.data() + j, _mm256_add_ps(_mm256_loadu_ps(y.data() + j), t));
        }
        for (size_t j = vc; j < cols; ++j) {
            float t = x[i] * row[j];
            y[j] += t;
        }
    }
}

void matvec_t(std::span<const double> w, size_t rows, size_t cols, std::span<const double> x,
              std::span<double> y) {
    assert(w.size() == rows * cols && x.size() == rows && y.size() == cols);
    const size_t vc = cols & ~size_t(3);
    for (size_t i = 0; i < rows; ++i) {
        const double* row = w.data() + i * cols;
        const __m256d xi = _mm256_set1_pd(x[i]);
        for (size_t j = 0; j < vc; j += 4) {
            __m256d t = _mm256_mul_pd(xi, _mm256_loadu_pd(row + j));
            _mm256_storeu_pd(y.data() + j, _mm256_add_pd(_mm256_loadu_pd(y.data() + j), t));
        }
        for (size_t j = vc; j < cols; ++j) {
            double t = x[i] * row[j];
            y[j] += t;
        }
    }
}

void ger(std::span<float> w, size_t rows, size_t cols, std::span<const float> g,
         std::span<const float> x) {
    assert(w.size() == rows * cols && g.size() == rows && x.size() == cols);
    const size_t vc = cols & ~size_t(7);
    for (size_t i = 0; i < rows; ++i) {
        float* row = w.data() + i * cols;
        const __m256 gi = _mm256_set1_ps(g[i]);
        for (size_t j = 0; j < vc; j += 8) {
            __m256 t = _mm256_mul_ps(gi, _mm256_loadu_ps(x.data() + j));
            _mm256_storeu_ps(row + j, _mm256_add_ps(_mm256_loadu_ps(row + j), t));
        }
        for (size_t j = vc; j < cols; ++j) {
            float t = g[i] * x[j];
            row[j] += t;
        }
    }
}

void ger(std::span<double> w, size_t rows, size_t cols, std::span<const double> g,
         std::span<const double> x) {
    assert(w.size() == rows * cols && g.size() == rows && x.size() == cols);
    const size_t vc = cols & ~size_t(3);
    for (size_t i = 0; i < rows; ++i) {
        double* row = w.data() + i * cols;
        const __m256d gi = _mm256_set1_pd(g[i]);
        for (size_t j = 0; j < vc; j += 4) {
            __m256d t = _mm256_mul_pd(gi, _mm256_loadu_pd(x.data() + j));
            _mm256_storeu_pd(row + j, _mm256_add_pd(_mm256_loadu_pd(row + j), t));
        }
        for (size_t j = vc; j < cols; ++j) {
            double t = g[i] * x[j];
            row[j] += t;
        }
    }
}

float sum(std::span<const float> x) {
    const size_t n = x.size();
    const size_t vn = n & ~size_t(7);
    __m256 acc = _mm256_setzero_ps();
    for (size_t i = 0; i < vn; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x.data() + i));
    float r = hsum256(acc);
    for (size_t i = vn; i < n; ++i) r += x[i];
    return r;
}

double sum(std::span<const double> x) {
    const size_t n = x.size();
    const size_t vn = n & ~size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (size_t i = 0; i < vn; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x.data() + i));
    double r = hsum256d(acc);
    for (size_t i = vn; i < n; ++i) r += x[i];
    return r;
}

float max(std::span<const float> x) {
    assert(!x.empty());
    float m = x[0];
    size_t i = 0;
    if (x.size() >= 8) {
        __m256 vm = _mm256_loadu_ps(x.data());
        for (i = 8; i + 8 <= x.size(); i += 8) {
            vm = _mm256_max_ps(vm, _mm256_loadu_ps(x.data() + i));
        }
        alignas(32) float lanes[8];
        _mm256_store_ps(lanes, vm);
        m = lanes[0];
        for (int k = 1; k < 8; ++k)
            if (lanes[k] > m) m = lanes[k];
    }
    for (; i < x.size(); ++i)
        if (x[i] > m) m = x[i];
    return m;
}

double max(std::span<const double> x) {
    assert(!x.empty());
    double m = x[0];
    size_t i = 0;
    if (x.size() >= 4) {
        __m256d vm = _mm256_loadu_pd(x.data());
        for (i = 4; i + 4 <= x.size(); i += 4) {
            vm = _mm256_max_pd(vm, _mm256_loadu_pd(x.data() + i));
        }
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, vm);
        m = lanes[0];
        for (int k = 1; k < 4; ++k)
            if (lanes[k] > m) m = lanes[k];
    }
    for (; i < x.size(); ++i)
        if (x[i] > m) m = x[i];
    return m;
}

float l2norm(std::span<const float> x) { return std::sqrt(dot(x, x)); }
double l2norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

}  // namespace kgfuse::kernels::avx2

#endif  // KGFUSE_HAVE_AVX2
