#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "kgfuse/error.hpp"

namespace kgfuse {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_config("cannot open input file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open output file: " + path);
    return out;
}

inline std::string read_file(const std::string& path) {
    auto in = open_input(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& content) {
    auto out = open_output(path);
    out << content;
    if (!out) fail("failed writing " + path);
}

}  // namespace kgfuse
