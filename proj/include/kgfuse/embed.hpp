#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgfuse/annotate.hpp"
#include "kgfuse/kge.hpp"
#include "kgfuse/kg_store.hpp"
#include "kgfuse/mat.hpp"

// Per-token contextual vectors (GloVe-style text files, or deterministic
// hashed fallbacks for OOV tokens) and their fusion with knowledge-graph
// embeddings and the negation sentiment bit:
//   row(w) = ctx(w) (+) kg_slice(w) (+) sentiment(w)
namespace kgfuse::embed {

enum class OovPolicy { Zero, Hashed };

class StaticEmbeddingTable {
public:
    // Lines `token v1 ... vd`, consistent d; inconsistent dimensions throw
    // Error with the line number; duplicate tokens keep the last vector.
    static StaticEmbeddingTable load(std::istream& in, OovPolicy policy = OovPolicy::Zero,
                                     uint64_t hash_seed = 0);

    size_t dim() const { return dim_; }
    size_t size() const { return rows_.size(); }
    OovPolicy policy() const { return policy_; }

    bool contains(std::string_view token) const;

    // Writes the token's vector into out (|out| == dim()). Unknown tokens get
    // zeros (Zero policy) or a seeded hash vector with entries in [-0.1, 0.1]
    // (Hashed policy; stable across runs and platforms). Returns true when
    // the token was present in the table.
    bool lookup(std::string_view token, std::span<float> out) const;

private:
    std::unordered_map<std::string, uint32_t> index_;
    std::vector<std::vector<float>> rows_;
    size_t dim_ = 0;
    OovPolicy policy_ = OovPolicy::Zero;
    uint64_t hash_seed_ = 0;
};

struct FusionConfig {
    bool use_kg = true;
    bool use_sentiment = true;
};

struct FusedSequence {
    Mat<float> matrix;  // tokens x width
    // per-token provenance
    std::vector<uint8_t> had_concept;
    std::vector<uint8_t> oov;         // contextual lookup missed
    std::vector<uint8_t> kg_missing;  // had a concept but not in the KG vocab

    size_t tokens() const { return matrix.rows; }
    size_t width() const { return matrix.cols; }
    size_t count(const std::vector<uint8_t>& v) const;
};

size_t fused_width(size_t ctx_dim, size_t kg_dim, const FusionConfig& config);

// kg_table/entity_vocab may be null when config.use_kg is false. Tokens with
// no concept, and concepts absent from the vocab, get an all-zero kg slice.
FusedSequence fuse(std::span<const annotate::AlignedToken> aligned,
                   const StaticEmbeddingTable& ctx, const kge::EmbeddingTable* kg_table,
                   const kg::Vocab* entity_vocab, const FusionConfig& config);

// One JSON line with the row width and provenance counters (tokens, width,
// concepts, oov, kg misses) for debug dumps.
std::string debug_json(const FusedSequence& seq);

}  // namespace kgfuse::embed
