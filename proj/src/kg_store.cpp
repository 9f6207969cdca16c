#include "kgfuse/kg_store.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "kgfuse/error.hpp"

namespace kgfuse::kg {

std::string_view source_name(Source s) {
    switch (s) {
        case Source::Metathesaurus: return "metathesaurus";
        case Source::SemanticNetwork: return "semantic_network";
        case Source::Other: return "other";
    }
    return "other";
}

Source source_from_name(std::string_view name) {
    if (name == "metathesaurus") return Source::Metathesaurus;
    if (name == "semantic_network") return Source::SemanticNetwork;
    if (name == "other") return Source::Other;
    fail_config("unknown triple source tag: " + std::string(name));
}

namespace {

// (head, relation, tail) key for dedup sets
struct KeyHash {
    size_t operator()(const Triple* t) const {
        size_t h = std::hash<std::string>{}(t->head);
        h = h * 1315423911u ^ std::hash<std::string>{}(t->relation);
        h = h * 1315423911u ^ std::hash<std::string>{}(t->tail);
        return h;
    }
};
struct KeyEq {
    bool operator()(const Triple* a, const Triple* b) const { return a->same_key(*b); }
};

}  // namespace

TripleSet load_edgelist(std::istream& in, Source source) {
    TripleSet out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t tab1 = line.find('\t');
        size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos ||
            line.find('\t', tab2 + 1) != std::string::npos) {
            fail("edgelist line " + std::to_string(lineno) +
                 ": expected exactly 3 tab-separated fields");
        }
        Triple t{line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                 line.substr(tab2 + 1), source};
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
            fail("edgelist line " + std::to_string(lineno) + ": empty field");
        }
        out.triples.push_back(std::move(t));
    }
    return out;
}

TripleSet dedup(const TripleSet& g) {
    TripleSet out;
    out.deduplicated = true;
    std::unordered_set<const Triple*, KeyHash, KeyEq> seen;
    seen.reserve(g.size());
    for (const Triple& t : g.triples) {
        if (seen.insert(&t).second) out.triples.push_back(t);
    }
    return out;
}

TripleSet merge(const TripleSet& a, const TripleSet& b) {
    TripleSet joined;
    joined.triples.reserve(a.size() + b.size());
    joined.triples.insert(joined.triples.end(), a.triples.begin(), a.triples.end());
    joined.triples.insert(joined.triples.end(), b.triples.begin(), b.triples.end());
    return dedup(joined);
}

TripleSet extract_subgraph(const TripleSet& g, const std::unordered_set<std::string>& concepts) {
    TripleSet out;
    out.deduplicated = g.deduplicated;
    for (const Triple& t : g.triples) {
        if (concepts.count(t.head) && concepts.count(t.tail)) out.triples.push_back(t);
    }
    return out;
}

Vocab Vocab::from_identifiers(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    Vocab v;
    v.names_ = std::move(ids);
    v.index_.reserve(v.names_.size());
    for (size_t i = 0; i < v.names_.size(); ++i) {
        v.index_.emplace(v.names_[i], static_cast<uint32_t>(i));
    }
    return v;
}

const std::string& Vocab::name(size_t index) const {
    if (index >= names_.size()) fail("vocab index out of range");
    return names_[index];
}

std::optional<uint32_t> Vocab::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

uint32_t Vocab::require(std::string_view id) const {
    auto idx = find(id);
    if (!idx) fail("identifier not in vocabulary: " + std::string(id));
    return *idx;
}

std::pair<Vocab, Vocab> build_vocabs(const TripleSet& g) {
    if (g.empty()) fail("empty graph");
    std::vector<std::string> ents, rels;
    ents.reserve(g.size() * 2);
    rels.reserve(g.size());
    for (const Triple& t : g.triples) {
        ents.push_back(t.head);
        ents.push_back(t.tail);
        rels.push_back(t.relation);
    }
    return {Vocab::from_identifiers(std::move(ents)), Vocab::from_identifiers(std::move(rels))};
}

KGStats stats(const TripleSet& g) {
    KGStats s;
    s.triple_count = g.size();
    std::unordered_map<std::string, size_t> degree;
    std::unordered_set<std::string> relations;
    for (const Triple& t : g.triples) {
        s.triples_by_source[static_cast<size_t>(t.source)]++;
        degree[t.head]++;
        degree[t.tail]++;  // self-loops count twice
        relations.insert(t.relation);
    }
    s.entity_count = degree.size();
    s.relation_count = relations.size();
    if (!degree.empty()) {
        std::vector<size_t> degs;
        degs.reserve(degree.size());
        size_t total = 0;
        for (const auto& [_, d] : degree) {
            degs.push_back(d);
            total += d;
        }
        std::sort(degs.begin(), degs.end());
        s.degree.min = degs.front();
        s.degree.max = degs.back();
        s.degree.mean = static_cast<double>(total) / static_cast<double>(degs.size());
        s.degree.p50 = degs[(degs.size() - 1) / 2];
        s.degree.p90 = degs[(degs.size() - 1) * 9 / 10];
    }
    return s;
}

std::string stats_json(const KGStats& s) {
    nlohmann::ordered_json j;
    j["entities"] = s.entity_count;
    j["relations"] = s.relation_count;
    j["triples"]["total"] = s.triple_count;
    for (Source src : {Source::Metathesaurus, Source::SemanticNetwork, Source::Other}) {
        j["triples"][std::string(source_name(src))] = s.triples_by_source[static_cast<size_t>(src)];
    }
    j["degree"]["min"] = s.degree.min;
    j["degree"]["max"] = s.degree.max;
    j["degree"]["mean"] = s.degree.mean;
    j["degree"]["p50"] = s.degree.p50;
    j["degree"]["p90"] = s.degree.p90;
    return j.dump(2) + "\n";
}

void write_tsv_sorted(std::ostream& out, const TripleSet& g) {
    TripleSet d = g.deduplicated ? g : dedup(g);
    std::vector<const Triple*> order;
    order.reserve(d.size());
    for (const Triple& t : d.triples) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const Triple* a, const Triple* b) {
        if (a->head != b->head) return a->head < b->head;
        if (a->relation != b->relation) return a->relation < b->relation;
        return a->tail < b->tail;
    });
    for (const Triple* t : order) {
        out << t->head << '\t' << t->relation << '\t' << t->tail << '\n';
    }
}

std::unordered_set<std::string> load_concepts(std::istream& in) {
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.insert(line);
    }
    return out;
}

std::vector<IndexedTriple> index_triples(const TripleSet& g, const Vocab& entities,
                                         const Vocab& relations) {
    std::vector<IndexedTriple> out;
    out.reserve(g.size());
    for (const Triple& t : g.triples) {
        out.push_back({entities.require(t.head), relations.require(t.relation),
                       entities.require(t.tail)});
    }
    return out;
}

}  // namespace kgfuse::kg
