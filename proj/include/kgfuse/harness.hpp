#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kgfuse/annotate.hpp"
#include "kgfuse/embed.hpp"
#include "kgfuse/esim.hpp"
#include "kgfuse/kge.hpp"
#include "kgfuse/kg_store.hpp"

// Dataset loading, accuracy, ablation driving, and the synthetic corpus
// generator that makes the KG/sentiment signal path testable at desk scale.
namespace kgfuse::harness {

struct NLIExample {
    std::string premise;
    std::string hypothesis;
    esim::Label label = esim::Label::Neutral;
    bool flipped = false;  // synthetic negation wrap marker (absent in real data)

    bool operator==(const NLIExample&) const = default;
};

struct DatasetSplits {
    std::vector<NLIExample> train, dev, test;
};

// JSON Lines with sentence1/sentence2/gold_label (extra fields tolerated, a
// `flipped` bool is picked up when present). Bad JSON or labels throw Error
// with the line number.
std::vector<NLIExample> load_jsonl(std::istream& in);
void write_jsonl(std::ostream& out, std::span<const NLIExample> examples);

// matches / total; empty input throws ConfigError.
double accuracy(std::span<const esim::Label> predictions, std::span<const esim::Label> golds);

// ---- synthetic corpus ----

struct SyntheticSpec {
    size_t concepts = 60;
    size_t clusters = 0;  // 0 = one cluster per ~6 concepts (min 2, made even)
    size_t isa_edges = SIZE_MAX;       // SIZE_MAX = all intra-cluster pairs
    size_t opposite_edges = SIZE_MAX;  // SIZE_MAX = all opposite-cluster pairs
    size_t distractor_relations = 1;   // extra relation types with random edges
    size_t train_examples = 2000;
    size_t dev_examples = 300;
    size_t test_examples = 300;
    double flip_fraction = 0.0;  // negation-wrap probability per example
    bool append_filler = true;   // trailing filler word per sentence
    std::vector<std::string> filler_words;  // empty = built-in list
    size_t ctx_dim = 16;  // width of the emitted word-vector file
    uint64_t seed = 0;
};

// The concept graph behind a bundle: concepts partitioned into clusters,
// `isa` edges inside clusters, `opposite-of` edges between paired clusters,
// and label-irrelevant distractor relations anywhere.
struct ClusterGraph {
    kg::TripleSet triples;               // isa/opposite: Metathesaurus tag,
                                         // distractors: SemanticNetwork tag
    std::vector<std::string> entity_ids; // index -> id
    std::vector<size_t> cluster_of;      // index -> cluster
    size_t clusters = 0;
};

ClusterGraph make_cluster_graph(size_t concepts, size_t clusters, size_t isa_edges,
                                size_t opposite_edges, size_t distractor_relations,
                                uint64_t seed);

struct SyntheticBundle {
    ClusterGraph graph;
    std::string metathesaurus_tsv;    // isa + opposite-of edges
    std::string semantic_network_tsv; // distractor edges
    std::string lexicon_tsv;
    std::string triggers_txt;
    std::string vectors_txt;
    DatasetSplits splits;
};

// Labels derive from the emitted graph: entailment iff (A isa B), contra-
// diction iff (A opposite-of B), neutral otherwise; a flipped side swaps
// entailment and contradiction. Concept pairs are partitioned so dev/test
// pairs never occur in train sentences, and the negation trigger surfaces
// used in dev/test never occur in train. Byte-identical output per seed.
SyntheticBundle generate_synthetic(const SyntheticSpec& spec);

// kg_metathesaurus.tsv, kg_semantic_network.tsv, lexicon.tsv, triggers.txt,
// vectors.txt, train.jsonl, dev.jsonl, test.jsonl under `dir`.
void write_bundle(const SyntheticBundle& bundle, const std::string& dir);

// ---- ablation ----

struct AblationConfig {
    kge::TrainConfig kge;
    esim::Config esim;
    embed::OovPolicy oov = embed::OovPolicy::Zero;
    size_t negation_window = 5;
};

struct AblationRow {
    std::string name;  // base | w_kg | w_kg_sentiment
    double accuracy = 0.0;
    std::vector<esim::Label> predictions;  // over the test split, in order
};

struct AblationReport {
    std::vector<AblationRow> rows;
};

// Trains DistMult once on `graph`, then trains/evaluates the three fusion
// configurations (identical ESIM seeds) and reports test accuracy per row.
AblationReport run_ablation(const DatasetSplits& splits, const kg::TripleSet& graph,
                            const annotate::ConceptLexicon& lexicon,
                            const annotate::TriggerList& triggers,
                            const embed::StaticEmbeddingTable& ctx, const AblationConfig& config);

void write_ablation_csv(std::ostream& out, const AblationReport& report);
void print_ablation_table(std::ostream& out, const AblationReport& report);

// annotate + align + fuse one sentence (the shared pipeline step)
esim::Example fuse_example(const NLIExample& ex, const annotate::ConceptLexicon& lexicon,
                           const annotate::TriggerList& triggers,
                           const embed::StaticEmbeddingTable& ctx,
                           const kge::EmbeddingTable* kg_table, const kg::Vocab* entity_vocab,
                           const embed::FusionConfig& fusion, size_t negation_window = 5);

}  // namespace kgfuse::harness
