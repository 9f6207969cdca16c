#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace kgfuse {

// Deterministic RNG wrapper. mt19937_64's output sequence is fixed by the
// standard, and all derived draws below use explicit bit manipulation, so
// streams are bit-identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    bool coin() { return (next_u64() >> 63) != 0; }

    // Unbiased integer in [0, bound) via rejection.
    uint64_t below(uint64_t bound) {
        if (bound <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    // Fisher-Yates with our own index draws (std::shuffle is stdlib-dependent).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace kgfuse
