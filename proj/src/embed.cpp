#include "kgfuse/embed.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "kgfuse/hash.hpp"

namespace kgfuse::embed {

StaticEmbeddingTable StaticEmbeddingTable::load(std::istream& in, OovPolicy policy,
                                                uint64_t hash_seed) {
    StaticEmbeddingTable table;
    table.policy_ = policy;
    table.hash_seed_ = hash_seed;

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<float> vec;
        float v;
        while (ss >> v) vec.push_back(v);
        if (token.empty() || vec.empty()) {
            fail("word vectors line " + std::to_string(lineno) + ": expected `token v1 ... vd`");
        }
        if (table.dim_ == 0) {
            table.dim_ = vec.size();
        } else if (vec.size() != table.dim_) {
            fail("word vectors line " + std::to_string(lineno) + ": dimension " +
                 std::to_string(vec.size()) + " != " + std::to_string(table.dim_));
        }
        auto it = table.index_.find(token);
        if (it != table.index_.end()) {
            table.rows_[it->second] = std::move(vec);  // last wins
        } else {
            table.index_.emplace(std::move(token), static_cast<uint32_t>(table.rows_.size()));
            table.rows_.push_back(std::move(vec));
        }
    }
    return table;
}

bool StaticEmbeddingTable::contains(std::string_view token) const {
    return index_.find(std::string(token)) != index_.end();
}

bool StaticEmbeddingTable::lookup(std::string_view token, std::span<float> out) const {
    if (out.size() != dim_) fail_config("lookup: output span has wrong dimension");
    auto it = index_.find(std::string(token));
    if (it != index_.end()) {
        const auto& row = rows_[it->second];
        std::copy(row.begin(), row.end(), out.begin());
        return true;
    }
    if (policy_ == OovPolicy::Zero) {
        std::fill(out.begin(), out.end(), 0.0f);
        return false;
    }
    // hashed fallback: derived from (token bytes, seed, index) only
    const uint64_t base = fnv1a64(token) ^ mix64(hash_seed_);
    for (size_t i = 0; i < out.size(); ++i) {
        const uint64_t bits = mix64(base + 0x9e3779b97f4a7c15ULL * (i + 1));
        const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
        out[i] = static_cast<float>((2.0 * unit - 1.0) * 0.1);
    }
    return false;
}

size_t fused_width(size_t ctx_dim, size_t kg_dim, const FusionConfig& config) {
    return ctx_dim + (config.use_kg ? kg_dim : 0) + (config.use_sentiment ? 1 : 0);
}

size_t FusedSequence::count(const std::vector<uint8_t>& v) const {
    size_t n = 0;
    for (uint8_t b : v) n += b != 0;
    return n;
}

std::string debug_json(const FusedSequence& seq) {
    nlohmann::ordered_json j;
    j["tokens"] = seq.tokens();
    j["width"] = seq.width();
    j["concepts"] = seq.count(seq.had_concept);
    j["oov"] = seq.count(seq.oov);
    j["kg_missing"] = seq.count(seq.kg_missing);
    return j.dump();
}

FusedSequence fuse(std::span<const annotate::AlignedToken> aligned,
                   const StaticEmbeddingTable& ctx, const kge::EmbeddingTable* kg_table,
                   const kg::Vocab* entity_vocab, const FusionConfig& config) {
    if (config.use_kg && (kg_table == nullptr || entity_vocab == nullptr)) {
        fail_config("fuse: use_kg set but no KG table/vocab supplied");
    }
    const size_t d_ctx = ctx.dim();
    const size_t d_kg = config.use_kg ? kg_table->dim() : 0;
    const size_t width = fused_width(d_ctx, d_kg, config);

    FusedSequence seq;
    seq.matrix = Mat<float>(aligned.size(), width);
    seq.had_concept.resize(aligned.size(), 0);
    seq.oov.resize(aligned.size(), 0);
    seq.kg_missing.resize(aligned.size(), 0);

    for (size_t t = 0; t < aligned.size(); ++t) {
        const auto& tok = aligned[t];
        auto row = seq.matrix.row(t);
        const bool known = ctx.lookup(tok.text, row.subspan(0, d_ctx));
        seq.oov[t] = known ? 0 : 1;
        seq.had_concept[t] = tok.concept_id.has_value() ? 1 : 0;
        if (config.use_kg) {
            auto slice = row.subspan(d_ctx, d_kg);
            bool filled = false;
            if (tok.concept_id) {
                if (auto idx = entity_vocab->find(*tok.concept_id)) {
                    auto kg_row = kg_table->entities.row(*idx);
                    std::copy(kg_row.begin(), kg_row.end(), slice.begin());
                    filled = true;
                } else {
                    seq.kg_missing[t] = 1;
                }
            }
            if (!filled) std::fill(slice.begin(), slice.end(), 0.0f);
        }
        if (config.use_sentiment) {
            row[width - 1] = tok.sentiment ? 1.0f : 0.0f;
        }
    }
    return seq;
}

}  // namespace kgfuse::embed
