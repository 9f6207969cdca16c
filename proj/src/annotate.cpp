#include "kgfuse/annotate.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "kgfuse/error.hpp"

namespace kgfuse::annotate {

namespace {

// Unicode general category P, as contiguous codepoint ranges.
struct CpRange {
    uint32_t lo, hi;
};
constexpr CpRange kPunctRanges[] = {
    {0x21, 0x23},       {0x25, 0x2A},       {0x2C, 0x2F},       {0x3A, 0x3B},
    {0x3F, 0x40},       {0x5B, 0x5D},       {0x5F, 0x5F},       {0x7B, 0x7B},
    {0x7D, 0x7D},       {0xA1, 0xA1},       {0xA7, 0xA7},       {0xAB, 0xAB},
    {0xB6, 0xB7},       {0xBB, 0xBB},       {0xBF, 0xBF},       {0x37E, 0x37E},
    {0x387, 0x387},     {0x55A, 0x55F},     {0x589, 0x58A},     {0x5BE, 0x5BE},
    {0x5C0, 0x5C0},     {0x5C3, 0x5C3},     {0x5C6, 0x5C6},     {0x5F3, 0x5F4},
    {0x609, 0x60A},     {0x60C, 0x60D},     {0x61B, 0x61B},     {0x61E, 0x61F},
    {0x66A, 0x66D},     {0x6D4, 0x6D4},     {0x700, 0x70D},     {0x7F7, 0x7F9},
    {0x830, 0x83E},     {0x85E, 0x85E},     {0x964, 0x965},     {0x970, 0x970},
    {0x9FD, 0x9FD},     {0xA76, 0xA76},     {0xAF0, 0xAF0},     {0xC77, 0xC77},
    {0xC84, 0xC84},     {0xDF4, 0xDF4},     {0xE4F, 0xE4F},     {0xE5A, 0xE5B},
    {0xF04, 0xF12},     {0xF14, 0xF14},     {0xF3A, 0xF3D},     {0xF85, 0xF85},
    {0xFD0, 0xFD4},     {0xFD9, 0xFDA},     {0x104A, 0x104F},   {0x10FB, 0x10FB},
    {0x1360, 0x1368},   {0x1400, 0x1400},   {0x166E, 0x166E},   {0x169B, 0x169C},
    {0x16EB, 0x16ED},   {0x1735, 0x1736},   {0x17D4, 0x17D6},   {0x17D8, 0x17DA},
    {0x1800, 0x180A},   {0x1944, 0x1945},   {0x1A1E, 0x1A1F},   {0x1AA0, 0x1AA6},
    {0x1AA8, 0x1AAD},   {0x1B5A, 0x1B60},   {0x1BFC, 0x1BFF},   {0x1C3B, 0x1C3F},
    {0x1C7E, 0x1C7F},   {0x1CC0, 0x1CC7},   {0x1CD3, 0x1CD3},   {0x2010, 0x2027},
    {0x2030, 0x2043},   {0x2045, 0x2051},   {0x2053, 0x205E},   {0x207D, 0x207E},
    {0x208D, 0x208E},   {0x2308, 0x230B},   {0x2329, 0x232A},   {0x2768, 0x2775},
    {0x27C5, 0x27C6},   {0x27E6, 0x27EF},   {0x2983, 0x2998},   {0x29D8, 0x29DB},
    {0x29FC, 0x29FD},   {0x2CF9, 0x2CFC},   {0x2CFE, 0x2CFF},   {0x2D70, 0x2D70},
    {0x2E00, 0x2E2E},   {0x2E30, 0x2E4F},   {0x2E52, 0x2E52},   {0x3001, 0x3003},
    {0x3008, 0x3011},   {0x3014, 0x301F},   {0x3030, 0x3030},   {0x303D, 0x303D},
    {0x30A0, 0x30A0},   {0x30FB, 0x30FB},   {0xA4FE, 0xA4FF},   {0xA60D, 0xA60F},
    {0xA673, 0xA673},   {0xA67E, 0xA67E},   {0xA6F2, 0xA6F7},   {0xA874, 0xA877},
    {0xA8CE, 0xA8CF},   {0xA8F8, 0xA8FA},   {0xA8FC, 0xA8FC},   {0xA92E, 0xA92F},
    {0xA95F, 0xA95F},   {0xA9C1, 0xA9CD},   {0xA9DE, 0xA9DF},   {0xAA5C, 0xAA5F},
    {0xAADE, 0xAADF},   {0xAAF0, 0xAAF1},   {0xABEB, 0xABEB},   {0xFD3E, 0xFD3F},
    {0xFE10, 0xFE19},   {0xFE30, 0xFE52},   {0xFE54, 0xFE61},   {0xFE63, 0xFE63},
    {0xFE68, 0xFE68},   {0xFE6A, 0xFE6B},   {0xFF01, 0xFF03},   {0xFF05, 0xFF0A},
    {0xFF0C, 0xFF0F},   {0xFF1A, 0xFF1B},   {0xFF1F, 0xFF20},   {0xFF3B, 0xFF3D},
    {0xFF3F, 0xFF3F},   {0xFF5B, 0xFF5B},   {0xFF5D, 0xFF5D},   {0xFF5F, 0xFF65},
    {0x10100, 0x10102}, {0x1039F, 0x1039F}, {0x103D0, 0x103D0}, {0x1056F, 0x1056F},
    {0x10857, 0x10857}, {0x1091F, 0x1091F}, {0x1093F, 0x1093F}, {0x10A50, 0x10A58},
    {0x10A7F, 0x10A7F}, {0x10AF0, 0x10AF6}, {0x10B39, 0x10B3F}, {0x10B99, 0x10B9C},
    {0x10EAD, 0x10EAD}, {0x10F55, 0x10F59}, {0x11047, 0x1104D}, {0x110BB, 0x110BC},
    {0x110BE, 0x110C1}, {0x11140, 0x11143}, {0x11174, 0x11175}, {0x111C5, 0x111C8},
    {0x111CD, 0x111CD}, {0x111DB, 0x111DB}, {0x111DD, 0x111DF}, {0x11238, 0x1123D},
    {0x112A9, 0x112A9}, {0x1144B, 0x1144F}, {0x1145A, 0x1145B}, {0x1145D, 0x1145D},
    {0x114C6, 0x114C6}, {0x115C1, 0x115D7}, {0x11641, 0x11643}, {0x11660, 0x1166C},
    {0x1173C, 0x1173E}, {0x1183B, 0x1183B}, {0x11944, 0x11946}, {0x119E2, 0x119E2},
    {0x11A3F, 0x11A46}, {0x11A9A, 0x11A9C}, {0x11A9E, 0x11AA2}, {0x11C41, 0x11C45},
    {0x11C70, 0x11C71}, {0x11EF7, 0x11EF8}, {0x11FFF, 0x11FFF}, {0x12470, 0x12474},
    {0x16A6E, 0x16A6F}, {0x16AF5, 0x16AF5}, {0x16B37, 0x16B3B}, {0x16B44, 0x16B44},
    {0x16E97, 0x16E9A}, {0x16FE2, 0x16FE2}, {0x1BC9F, 0x1BC9F}, {0x1DA87, 0x1DA8B},
    {0x1E95E, 0x1E95F},
};

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Decodes the next UTF-8 codepoint; malformed bytes are passed through as
// their byte value so arbitrary input never throws.
uint32_t next_codepoint(std::string_view s, size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    size_t need = 0;
    uint32_t cp = b0;
    if (b0 < 0x80) {
        ++i;
        return cp;
    } else if ((b0 & 0xE0) == 0xC0) {
        need = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        need = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        need = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + need >= s.size()) {
        ++i;
        return b0;
    }
    uint32_t acc = cp;
    for (size_t k = 1; k <= need; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        acc = (acc << 6) | (bk & 0x3F);
    }
    i += need + 1;
    return acc;
}

}  // namespace

bool is_punct_codepoint(uint32_t cp) {
    auto it = std::upper_bound(std::begin(kPunctRanges), std::end(kPunctRanges), cp,
                               [](uint32_t v, const CpRange& r) { return v < r.lo; });
    if (it == std::begin(kPunctRanges)) return false;
    --it;
    return cp >= it->lo && cp <= it->hi;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;

    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_ascii_space(text[i])) ++i;
        if (i >= text.size()) break;
        const size_t word_start = i;
        while (i < text.size() && !is_ascii_space(text[i])) ++i;
        std::string_view word = text.substr(word_start, i - word_start);

        // codepoint boundaries + punctuation class for this word
        std::vector<size_t> starts;
        std::vector<bool> punct;
        size_t k = 0;
        while (k < word.size()) {
            starts.push_back(k);
            punct.push_back(is_punct_codepoint(next_codepoint(word, k)));
        }
        starts.push_back(word.size());

        const size_t n = punct.size();
        size_t lead = 0;
        while (lead < n && punct[lead]) ++lead;
        if (lead == n) {
            tokens.emplace_back(word);  // all punctuation: single token
            continue;
        }
        size_t trail = n;
        while (trail > lead && punct[trail - 1]) --trail;

        if (lead > 0) tokens.emplace_back(word.substr(0, starts[lead]));
        tokens.emplace_back(word.substr(starts[lead], starts[trail] - starts[lead]));
        if (trail < n) tokens.emplace_back(word.substr(starts[trail]));
    }
    return tokens;
}

ConceptLexicon ConceptLexicon::load(std::istream& in) {
    ConceptLexicon lex;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            size_t tab = line.find('\t', pos);
            fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        if (fields.size() != 4) {
            fail("lexicon line " + std::to_string(lineno) +
                 ": expected 4 tab-separated fields (surface, concept, preferred, score)");
        }
        LexiconEntry e;
        std::istringstream surface(to_lower(fields[0]));
        std::string tok;
        while (surface >> tok) e.surface.push_back(tok);
        e.concept_id = fields[1];
        e.preferred_id = fields[2].empty() ? fields[1] : fields[2];
        try {
            e.score = std::stod(fields[3]);
        } catch (const std::exception&) {
            fail("lexicon line " + std::to_string(lineno) + ": bad score '" + fields[3] + "'");
        }
        if (e.surface.empty() || e.concept_id.empty()) {
            fail("lexicon line " + std::to_string(lineno) + ": empty surface form or concept id");
        }
        try {
            lex.add(std::move(e));
        } catch (const Error& err) {
            fail("lexicon line " + std::to_string(lineno) + ": " + err.what());
        }
    }
    return lex;
}

namespace {

std::string join_tokens(std::span<const std::string> tokens) {
    std::string key;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) key += ' ';
        key += tokens[i];
    }
    return key;
}

}  // namespace

void ConceptLexicon::add(LexiconEntry entry) {
    if (entry.surface.empty()) fail("lexicon entry with empty surface form");
    for (const auto& t : entry.surface) {
        if (t.empty()) fail("lexicon surface form with empty token");
    }
    if (entry.preferred_id.empty()) entry.preferred_id = entry.concept_id;
    const std::string key = join_tokens(entry.surface);
    auto& bucket = by_surface_[key];
    for (const auto& e : bucket) {
        if (e.concept_id == entry.concept_id) {
            fail("duplicate lexicon entry for ('" + key + "', '" + entry.concept_id + "')");
        }
    }
    max_tokens_ = std::max(max_tokens_, entry.surface.size());
    ++count_;
    bucket.push_back(std::move(entry));
}

const std::vector<LexiconEntry>* ConceptLexicon::find(const std::string& key) const {
    auto it = by_surface_.find(key);
    return it == by_surface_.end() ? nullptr : &it->second;
}

std::vector<ConceptAnnotation> match_concepts(std::span<const std::string> tokens,
                                              const ConceptLexicon& lexicon) {
    std::vector<ConceptAnnotation> out;
    if (lexicon.size() == 0 || tokens.empty()) return out;

    std::vector<std::string> lower;
    lower.reserve(tokens.size());
    for (const auto& t : tokens) lower.push_back(to_lower(t));

    size_t pos = 0;
    while (pos < tokens.size()) {
        const size_t max_len = std::min(lexicon.max_surface_tokens(), tokens.size() - pos);
        bool matched = false;
        for (size_t len = max_len; len >= 1 && !matched; --len) {
            const std::string key =
                join_tokens(std::span<const std::string>(lower).subspan(pos, len));
            const auto* bucket = lexicon.find(key);
            if (!bucket) continue;
            // equal length: highest score, then smallest concept id
            const LexiconEntry* best = &(*bucket)[0];
            for (const auto& e : *bucket) {
                if (e.score > best->score ||
                    (e.score == best->score && e.concept_id < best->concept_id)) {
                    best = &e;
                }
            }
            out.push_back({pos, pos + len, best->preferred_id, false, best->score});
            pos += len;
            matched = true;
        }
        if (!matched) ++pos;
    }
    return out;
}

TriggerList TriggerList::defaults() {
    TriggerList t;
    for (const char* p : {"no", "not", "without", "denies", "denied", "negative", "ruled out"}) {
        t.add(p);
    }
    return t;
}

TriggerList TriggerList::load(std::istream& in) {
    TriggerList t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        t.add(line);
    }
    return t;
}

void TriggerList::add(std::string_view phrase) {
    std::istringstream ss{to_lower(phrase)};
    std::vector<std::string> toks;
    std::string tok;
    while (ss >> tok) toks.push_back(tok);
    if (!toks.empty()) triggers_.push_back(std::move(toks));
}

namespace {

bool is_sentence_end(const std::string& token) {
    return token == "." || token == "!" || token == "?";
}

}  // namespace

void detect_negation(std::span<const std::string> tokens,
                     std::vector<ConceptAnnotation>& annotations, const TriggerList& triggers,
                     size_t window) {
    std::vector<std::string> lower;
    lower.reserve(tokens.size());
    for (const auto& t : tokens) lower.push_back(to_lower(t));

    for (auto& ann : annotations) {
        ann.negated = false;
        const size_t lo = ann.start > window ? ann.start - window : 0;
        for (const auto& trig : triggers.triggers()) {
            const size_t len = trig.size();
            if (len > ann.start) continue;
            for (size_t p = lo; p + len <= ann.start && !ann.negated; ++p) {
                bool hit = true;
                for (size_t k = 0; k < len && hit; ++k) hit = lower[p + k] == trig[k];
                if (!hit) continue;
                bool blocked = false;
                for (size_t q = p + len; q < ann.start && !blocked; ++q) {
                    blocked = is_sentence_end(lower[q]);
                }
                if (!blocked) ann.negated = true;
            }
            if (ann.negated) break;
        }
    }
}

std::vector<AlignedToken> align(std::span<const std::string> tokens,
                                std::span<const ConceptAnnotation> annotations) {
    std::vector<const ConceptAnnotation*> sorted;
    sorted.reserve(annotations.size());
    for (const auto& a : annotations) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(),
              [](const ConceptAnnotation* a, const ConceptAnnotation* b) {
                  return a->start < b->start;
              });
    size_t prev_end = 0;
    for (const auto* a : sorted) {
        if (a->start >= a->end || a->end > tokens.size()) {
            fail_config("align: annotation span out of range");
        }
        if (a->start < prev_end) fail_config("align: overlapping annotation spans");
        prev_end = a->end;
    }

    std::vector<AlignedToken> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back({t, std::nullopt, 0});
    for (const auto* a : sorted) {
        for (size_t i = a->start; i < a->end; ++i) {
            out[i].concept_id = a->concept_id;
            out[i].sentiment = a->negated ? 1 : 0;
        }
    }
    return out;
}

std::string sentence_json(std::span<const std::string> tokens,
                          std::span<const ConceptAnnotation> annotations) {
    nlohmann::ordered_json j;
    j["tokens"] = std::vector<std::string>(tokens.begin(), tokens.end());
    auto& anns = j["annotations"] = nlohmann::ordered_json::array();
    for (const auto& a : annotations) {
        anns.push_back({{"start", a.start},
                        {"end", a.end},
                        {"concept", a.concept_id},
                        {"negated", a.negated},
                        {"score", a.score}});
    }
    return j.dump();
}

}  // namespace kgfuse::annotate
