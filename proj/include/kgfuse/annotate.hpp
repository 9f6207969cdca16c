#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

// Lexicon-driven concept annotation: tokenize, greedy longest-match against a
// surface-form lexicon (preferred-id canonicalization, score tie-breaks),
// trigger-window negation, and token-level alignment. All functions are pure;
// the lexicon and trigger list are immutable after load.
namespace kgfuse::annotate {

// Whitespace split (ASCII); a maximal leading or trailing run of Unicode
// punctuation on a word becomes its own token. Case is preserved.
std::vector<std::string> tokenize(std::string_view text);

// true if the codepoint is in Unicode general category P
bool is_punct_codepoint(uint32_t cp);

// ASCII-level lowercase (lexicon matching is case-insensitive at this level)
std::string to_lower(std::string_view s);

struct LexiconEntry {
    std::vector<std::string> surface;  // lowercase tokens, non-empty
    std::string concept_id;
    std::string preferred_id;  // defaults to concept_id
    double score = 0.0;        // match-strength, used for tie-breaks
};

class ConceptLexicon {
public:
    // TSV: surface form<TAB>concept<TAB>preferred<TAB>score. The surface form
    // is space-separated and stored lowercase. Duplicate (surface, concept)
    // pairs and malformed lines throw Error with the line number.
    static ConceptLexicon load(std::istream& in);

    void add(LexiconEntry entry);

    size_t size() const { return count_; }
    size_t max_surface_tokens() const { return max_tokens_; }

    // entries whose surface equals `key` (tokens joined by single spaces)
    const std::vector<LexiconEntry>* find(const std::string& key) const;

private:
    std::unordered_map<std::string, std::vector<LexiconEntry>> by_surface_;
    size_t max_tokens_ = 0;
    size_t count_ = 0;
};

struct ConceptAnnotation {
    size_t start = 0;  // token span [start, end)
    size_t end = 0;
    std::string concept_id;  // preferred id
    bool negated = false;
    double score = 0.0;
};

// Greedy left-to-right longest match over lowercased tokens. Between entries
// of equal span length: highest score wins, then smallest concept id. Output
// spans are disjoint and sorted; concept ids are the preferred ids.
std::vector<ConceptAnnotation> match_concepts(std::span<const std::string> tokens,
                                              const ConceptLexicon& lexicon);

class TriggerList {
public:
    // "no", "not", "without", "denies", "denied", "negative", "ruled out"
    static TriggerList defaults();
    // one trigger per line (may be multiword); '#' comments allowed
    static TriggerList load(std::istream& in);

    void add(std::string_view phrase);
    const std::vector<std::vector<std::string>>& triggers() const { return triggers_; }

private:
    std::vector<std::vector<std::string>> triggers_;  // lowercase token sequences
};

// Marks an annotation negated when a trigger lies entirely within the
// `window` tokens before its span, with no sentence-ending punctuation token
// (".", "!", "?") between trigger and span.
void detect_negation(std::span<const std::string> tokens,
                     std::vector<ConceptAnnotation>& annotations, const TriggerList& triggers,
                     size_t window = 5);

struct AlignedToken {
    std::string text;
    std::optional<std::string> concept_id;
    int sentiment = 0;  // 1 only when the covering annotation is negated
};

// Copies each span's concept id and negation bit onto every covered token.
// Overlapping spans violate the precondition and throw ConfigError.
std::vector<AlignedToken> align(std::span<const std::string> tokens,
                                std::span<const ConceptAnnotation> annotations);

// {"tokens": [...], "annotations": [{start, end, concept, negated, score}]}
std::string sentence_json(std::span<const std::string> tokens,
                          std::span<const ConceptAnnotation> annotations);

}  // namespace kgfuse::annotate
