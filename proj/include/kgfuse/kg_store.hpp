#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

// Triple storage: edgelist ingestion from multiple sources, dedup/merge,
// subgraph extraction against a concept set, and deterministic vocabularies.
// Everything here is read-only after construction and safe to share.
namespace kgfuse::kg {

enum class Source { Metathesaurus = 0, SemanticNetwork = 1, Other = 2 };

std::string_view source_name(Source s);
Source source_from_name(std::string_view name);  // throws ConfigError on unknown tag

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;
    Source source = Source::Other;

    // identity is (head, relation, tail); source is a provenance tag
    bool same_key(const Triple& o) const {
        return head == o.head && relation == o.relation && tail == o.tail;
    }
};

struct TripleSet {
    std::vector<Triple> triples;
    bool deduplicated = false;

    size_t size() const { return triples.size(); }
    bool empty() const { return triples.empty(); }
};

// TSV `head<TAB>relation<TAB>tail`; '#' comments and blank lines skipped.
// Malformed lines throw Error with the 1-based line number. Order preserved,
// duplicates kept (dedup is a separate step).
TripleSet load_edgelist(std::istream& in, Source source);

// Drops exact (head, relation, tail) duplicates, keeping the first-seen
// triple (and therefore its source tag).
TripleSet dedup(const TripleSet& g);

// Union of a and b, deduplicated, a's triples first.
TripleSet merge(const TripleSet& a, const TripleSet& b);

// Keeps exactly the triples with BOTH endpoints in `concepts`.
TripleSet extract_subgraph(const TripleSet& g, const std::unordered_set<std::string>& concepts);

// Bidirectional identifier <-> dense index map. Indices are assigned in
// lexicographic (byte) order of the identifier strings, so the same set of
// strings always yields the same map.
class Vocab {
public:
    Vocab() = default;
    static Vocab from_identifiers(std::vector<std::string> ids);  // dedups + sorts

    size_t size() const { return names_.size(); }
    const std::string& name(size_t index) const;
    std::optional<uint32_t> find(std::string_view id) const;
    uint32_t require(std::string_view id) const;  // throws Error if absent
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, uint32_t> index_;
};

// Throws Error("empty graph") when g has no triples.
std::pair<Vocab, Vocab> build_vocabs(const TripleSet& g);

struct DegreeSummary {
    size_t min = 0;
    size_t max = 0;
    double mean = 0.0;
    size_t p50 = 0;
    size_t p90 = 0;
};

struct KGStats {
    size_t entity_count = 0;
    size_t relation_count = 0;
    size_t triple_count = 0;
    std::array<size_t, 3> triples_by_source = {0, 0, 0};  // indexed by Source
    DegreeSummary degree;
};

KGStats stats(const TripleSet& g);
std::string stats_json(const KGStats& s);

// Deduplicated TSV sorted by (head, relation, tail); byte-stable across runs.
void write_tsv_sorted(std::ostream& out, const TripleSet& g);

// One concept identifier per line, '#' comments allowed.
std::unordered_set<std::string> load_concepts(std::istream& in);

// Dense-index view used by the embedding trainer.
struct IndexedTriple {
    uint32_t head = 0;
    uint32_t relation = 0;
    uint32_t tail = 0;
};

std::vector<IndexedTriple> index_triples(const TripleSet& g, const Vocab& entities,
                                         const Vocab& relations);

}  // namespace kgfuse::kg
