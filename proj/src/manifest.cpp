#include "kgfuse/manifest.hpp"

#include "kgfuse/hash.hpp"
#include "kgfuse/io.hpp"
#include "kgfuse/kernels.hpp"

namespace kgfuse {

void Manifest::add_input(const std::string& path) {
    input_digests[path] = digest_file(path);
}

std::string Manifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["seed"] = seed;
    j["kernel"] = std::string(kernels::variant_name(kernels::active()));
    j["config"] = config;
    auto& inputs = j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [path, digest] : input_digests) inputs[path] = digest;
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

void Manifest::write(const std::string& path) const { write_file(path, to_json()); }

}  // namespace kgfuse
