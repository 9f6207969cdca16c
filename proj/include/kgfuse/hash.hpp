#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kgfuse {

constexpr uint64_t FNV_OFFSET = 0xcbf29ce484222325ULL;
constexpr uint64_t FNV_PRIME = 0x100000001b3ULL;

constexpr uint64_t fnv1a64(std::string_view bytes, uint64_t h = FNV_OFFSET) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= FNV_PRIME;
    }
    return h;
}

// Finalizer from the splitmix64 generator; good avalanche, platform-stable.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named substream seed: every stage (kge, esim, synth, dropout, ...) pulls
// its own seed from the single global one.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view stream) {
    return mix64(global_seed ^ fnv1a64(stream));
}

std::string hex64(uint64_t v);

// FNV-1a over the file's bytes, as 16 hex chars. Throws Error if unreadable.
std::string digest_file(const std::string& path);

}  // namespace kgfuse
