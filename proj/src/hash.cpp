#include "kgfuse/hash.hpp"

#include <cstdio>
#include <fstream>

#include "kgfuse/error.hpp"

namespace kgfuse {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open file for digest: " + path);
    uint64_t h = FNV_OFFSET;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
        if (!in) break;
    }
    return hex64(h);
}

}  // namespace kgfuse
