#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

// Every CLI command writes one of these next to its outputs: the resolved
// configuration, the global seed, input digests and the active kernel
// variant. No wall-clock data, so reruns produce identical bytes.
namespace kgfuse {

struct Manifest {
    std::string command;
    nlohmann::ordered_json config;  // resolved key -> value
    uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a64 hex
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    void write(const std::string& path) const;
    std::string to_json() const;
};

}  // namespace kgfuse
