#include "kgfuse/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kgfuse/hash.hpp"
#include "kgfuse/io.hpp"
#include "kgfuse/rng.hpp"

namespace kgfuse::harness {

std::vector<NLIExample> load_jsonl(std::istream& in) {
    std::vector<NLIExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail("dataset line " + std::to_string(lineno) + ": malformed JSON");
        }
        if (!j.contains("sentence1") || !j.contains("sentence2") || !j.contains("gold_label")) {
            fail("dataset line " + std::to_string(lineno) +
                 ": need sentence1, sentence2, gold_label");
        }
        NLIExample ex;
        try {
            ex.premise = j.at("sentence1").get<std::string>();
            ex.hypothesis = j.at("sentence2").get<std::string>();
            ex.label = esim::label_from_name(j.at("gold_label").get<std::string>());
        } catch (const Error& e) {
            fail("dataset line " + std::to_string(lineno) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            fail("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        if (j.contains("flipped") && j.at("flipped").is_boolean()) {
            ex.flipped = j.at("flipped").get<bool>();
        }
        if (ex.premise.empty() || ex.hypothesis.empty()) {
            fail("dataset line " + std::to_string(lineno) + ": empty sentence");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

void write_jsonl(std::ostream& out, std::span<const NLIExample> examples) {
    for (const auto& ex : examples) {
        nlohmann::ordered_json j;
        j["sentence1"] = ex.premise;
        j["sentence2"] = ex.hypothesis;
        j["gold_label"] = std::string(esim::label_name(ex.label));
        if (ex.flipped) j["flipped"] = true;
        out << j.dump() << '\n';
    }
}

double accuracy(std::span<const esim::Label> predictions, std::span<const esim::Label> golds) {
    if (predictions.size() != golds.size()) fail_config("accuracy: length mismatch");
    if (predictions.empty()) fail_config("accuracy: empty inputs");
    size_t hits = 0;
    for (size_t i = 0; i < golds.size(); ++i) hits += predictions[i] == golds[i];
    return static_cast<double>(hits) / static_cast<double>(golds.size());
}

namespace {

std::string padded_number(size_t v, size_t width) {
    std::string s = std::to_string(v);
    while (s.size() < width) s.insert(s.begin(), '0');
    return s;
}

size_t id_width(size_t count) {
    size_t width = 1, limit = 10;
    while (count > limit) {
        ++width;
        limit *= 10;
    }
    return width;
}

const char* kDefaultFillers[] = {
    "today",   "overnight", "currently", "recently", "briefly", "again",
    "earlier", "tonight",   "urgently",  "slightly", "still",   "somewhat",
    "clearly", "possibly",  "often",     "rarely",   "now",     "persistently",
    "mildly",  "severely",
};

}  // namespace

ClusterGraph make_cluster_graph(size_t concepts, size_t clusters, size_t isa_edges,
                                size_t opposite_edges, size_t distractor_relations,
                                uint64_t seed) {
    if (concepts < 4) fail_config("make_cluster_graph: need at least 4 concepts");
    if (clusters == 0) clusters = std::max<size_t>(2, concepts / 6);
    if (clusters % 2) ++clusters;  // opposite-of pairs clusters up
    if (clusters > concepts) fail_config("make_cluster_graph: more clusters than concepts");

    ClusterGraph g;
    g.clusters = clusters;
    const size_t width = id_width(concepts);
    for (size_t i = 0; i < concepts; ++i) {
        g.entity_ids.push_back("c" + padded_number(i, width));
        g.cluster_of.push_back(i % clusters);
    }

    Rng rng(derive_seed(seed, "synth-graph"));

    // all intra-cluster ordered pairs, deterministic order, then shuffled
    std::vector<std::pair<size_t, size_t>> isa_pool;
    for (size_t a = 0; a < concepts; ++a) {
        for (size_t b = 0; b < concepts; ++b) {
            if (a != b && g.cluster_of[a] == g.cluster_of[b]) isa_pool.emplace_back(a, b);
        }
    }
    rng.shuffle(isa_pool);
    const size_t n_isa = std::min(isa_edges, isa_pool.size());

    // opposite-of between paired clusters (2k, 2k+1), both directions listed
    std::vector<std::pair<size_t, size_t>> opp_pool;
    for (size_t a = 0; a < concepts; ++a) {
        for (size_t b = 0; b < concepts; ++b) {
            if (a == b) continue;
            const size_t ca = g.cluster_of[a], cb = g.cluster_of[b];
            if (ca / 2 == cb / 2 && ca != cb) opp_pool.emplace_back(a, b);
        }
    }
    rng.shuffle(opp_pool);
    const size_t n_opp = std::min(opposite_edges, opp_pool.size());

    auto add = [&](size_t a, size_t b, const std::string& rel, kg::Source src) {
        g.triples.triples.push_back({g.entity_ids[a], rel, g.entity_ids[b], src});
    };
    for (size_t k = 0; k < n_isa; ++k) {
        add(isa_pool[k].first, isa_pool[k].second, "isa", kg::Source::Metathesaurus);
    }
    for (size_t k = 0; k < n_opp; ++k) {
        add(opp_pool[k].first, opp_pool[k].second, "opposite-of", kg::Source::Metathesaurus);
    }
    // distractor relations carry no label signal; `concepts` random edges each
    for (size_t r = 0; r < distractor_relations; ++r) {
        const std::string rel = "rel-d" + padded_number(r, 2);
        for (size_t k = 0; k < concepts; ++k) {
            const size_t a = rng.below(concepts);
            size_t b = rng.below(concepts - 1);
            if (b >= a) ++b;
            add(a, b, rel, kg::Source::SemanticNetwork);
        }
    }
    g.triples = kg::dedup(g.triples);
    return g;
}

namespace {

struct PairClass {
    std::vector<std::pair<size_t, size_t>> entail, contradict, neutral;
};

// Ordered pairs drawn from an unordered-pair pool, bucketed by label.
PairClass classify_pairs(const std::set<std::pair<size_t, size_t>>& unordered_pool,
                         const std::set<std::pair<size_t, size_t>>& isa,
                         const std::set<std::pair<size_t, size_t>>& opp) {
    PairClass out;
    for (const auto& [a, b] : unordered_pool) {
        for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
            if (isa.count({x, y})) {
                out.entail.emplace_back(x, y);
            } else if (opp.count({x, y})) {
                out.contradict.emplace_back(x, y);
            } else {
                out.neutral.emplace_back(x, y);
            }
        }
    }
    return out;
}

}  // namespace

SyntheticBundle generate_synthetic(const SyntheticSpec& spec) {
    if (spec.flip_fraction < 0 || spec.flip_fraction > 1) {
        fail_config("generate_synthetic: flip fraction must be in [0, 1]");
    }
    if (spec.ctx_dim == 0) fail_config("generate_synthetic: ctx_dim must be >= 1");

    // at least 4 clusters, else no non-opposite cluster pairs exist and the
    // neutral label has no eligible concept pairs
    size_t clusters = spec.clusters;
    if (clusters == 0) clusters = std::max<size_t>(4, spec.concepts / 6);

    SyntheticBundle bundle;
    bundle.graph = make_cluster_graph(spec.concepts, clusters, spec.isa_edges,
                                      spec.opposite_edges, spec.distractor_relations, spec.seed);
    const ClusterGraph& g = bundle.graph;
    const size_t n = g.entity_ids.size();

    // edge sets for label derivation
    std::set<std::pair<size_t, size_t>> isa, opp;
    std::unordered_map<std::string, size_t> ent_index;
    for (size_t i = 0; i < n; ++i) ent_index[g.entity_ids[i]] = i;
    for (const auto& t : g.triples.triples) {
        if (t.relation == "isa") isa.insert({ent_index[t.head], ent_index[t.tail]});
        if (t.relation == "opposite-of") opp.insert({ent_index[t.head], ent_index[t.tail]});
    }

    // two surface forms per concept; both canonicalize to the concept id
    const size_t width = id_width(n);
    std::vector<std::array<std::string, 2>> surfaces(n);
    for (size_t i = 0; i < n; ++i) {
        surfaces[i] = {"cond" + padded_number(i, width), "alt" + padded_number(i, width)};
    }

    // negation trigger pools: train and eval never share surfaces. Neutral
    // modifier words fill the same sentence slot in unflipped examples so
    // sentence shape carries no negation signal; only the trigger list (and
    // therefore the sentiment bit) separates the two.
    std::vector<std::string> train_triggers, eval_triggers, train_mods, eval_mods;
    for (size_t k = 0; k < 16; ++k) train_triggers.push_back("negtra" + padded_number(k, 2));
    for (size_t k = 0; k < 8; ++k) eval_triggers.push_back("negtev" + padded_number(k, 2));
    for (size_t k = 0; k < 16; ++k) train_mods.push_back("moda" + padded_number(k, 2));
    for (size_t k = 0; k < 8; ++k) eval_mods.push_back("modb" + padded_number(k, 2));

    const std::vector<std::string> fillers =
        spec.filler_words.empty()
            ? std::vector<std::string>(std::begin(kDefaultFillers), std::end(kDefaultFillers))
            : spec.filler_words;

    // unordered concept-pair holdout: ~70% train, 15% dev, 15% test
    std::vector<std::pair<size_t, size_t>> all_pairs;
    for (size_t a = 0; a < n; ++a) {
        for (size_t b = a + 1; b < n; ++b) all_pairs.emplace_back(a, b);
    }
    Rng pair_rng(derive_seed(spec.seed, "synth-pairs"));
    pair_rng.shuffle(all_pairs);
    std::set<std::pair<size_t, size_t>> train_pool, dev_pool, test_pool;
    for (size_t k = 0; k < all_pairs.size(); ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(all_pairs.size());
        if (u < 0.70) {
            train_pool.insert(all_pairs[k]);
        } else if (u < 0.85) {
            dev_pool.insert(all_pairs[k]);
        } else {
            test_pool.insert(all_pairs[k]);
        }
    }

    Rng ex_rng(derive_seed(spec.seed, "synth-examples"));

    auto make_split = [&](const std::set<std::pair<size_t, size_t>>& pool, size_t count,
                          const std::vector<std::string>& trigger_pool,
                          const std::vector<std::string>& mod_pool) {
        std::vector<NLIExample> out;
        if (count == 0) return out;
        PairClass pairs = classify_pairs(pool, isa, opp);
        const size_t base = count / 3;
        const size_t n_e = base + (count % 3 > 0);
        const size_t n_c = base + (count % 3 > 1);
        const size_t n_n = base;
        struct Want {
            const std::vector<std::pair<size_t, size_t>>* pool;
            size_t count;
            esim::Label label;
        };
        const Want wants[] = {{&pairs.entail, n_e, esim::Label::Entailment},
                              {&pairs.contradict, n_c, esim::Label::Contradiction},
                              {&pairs.neutral, n_n, esim::Label::Neutral}};
        for (const auto& want : wants) {
            if (want.count > 0 && want.pool->empty()) {
                fail(std::string("generate_synthetic: no eligible concept pairs for label ") +
                     std::string(esim::label_name(want.label)));
            }
            for (size_t k = 0; k < want.count; ++k) {
                const auto& [a, b] = (*want.pool)[ex_rng.below(want.pool->size())];
                NLIExample ex;
                esim::Label label = want.label;
                const std::string& surf_a = surfaces[a][ex_rng.below(2)];
                const std::string& surf_b = surfaces[b][ex_rng.below(2)];
                // every sentence carries a slot token before the concept:
                // a trigger when flipped, a neutral modifier otherwise
                std::string slot_p = mod_pool[ex_rng.below(mod_pool.size())];
                std::string slot_h = mod_pool[ex_rng.below(mod_pool.size())];
                if (spec.flip_fraction > 0 && ex_rng.next_unit() < spec.flip_fraction) {
                    const std::string& trig = trigger_pool[ex_rng.below(trigger_pool.size())];
                    (ex_rng.coin() ? slot_p : slot_h) = trig;
                    if (label == esim::Label::Entailment) {
                        label = esim::Label::Contradiction;
                    } else if (label == esim::Label::Contradiction) {
                        label = esim::Label::Entailment;
                    }
                    ex.flipped = true;
                }
                ex.premise = "patient has " + slot_p + " " + surf_a;
                ex.hypothesis = "patient has " + slot_h + " " + surf_b;
                if (spec.append_filler) {
                    ex.premise += " " + fillers[ex_rng.below(fillers.size())];
                    ex.hypothesis += " " + fillers[ex_rng.below(fillers.size())];
                }
                ex.label = label;
                out.push_back(std::move(ex));
            }
        }
        ex_rng.shuffle(out);
        return out;
    };

    bundle.splits.train =
        make_split(train_pool, spec.train_examples, train_triggers, train_mods);
    bundle.splits.dev = make_split(dev_pool, spec.dev_examples, eval_triggers, eval_mods);
    bundle.splits.test = make_split(test_pool, spec.test_examples, eval_triggers, eval_mods);

    // emitted files
    {
        std::ostringstream meta, sem;
        for (const auto& t : g.triples.triples) {
            auto& out = t.source == kg::Source::SemanticNetwork ? sem : meta;
            out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
        }
        bundle.metathesaurus_tsv = meta.str();
        bundle.semantic_network_tsv = sem.str();
    }
    {
        std::ostringstream lex;
        for (size_t i = 0; i < n; ++i) {
            lex << surfaces[i][0] << '\t' << "s-" << g.entity_ids[i] << '\t' << g.entity_ids[i]
                << "\t5\n";
            lex << surfaces[i][1] << '\t' << "a-" << g.entity_ids[i] << '\t' << g.entity_ids[i]
                << "\t3\n";
        }
        bundle.lexicon_tsv = lex.str();
    }
    {
        std::ostringstream trig;
        for (const auto& t : train_triggers) trig << t << '\n';
        for (const auto& t : eval_triggers) trig << t << '\n';
        bundle.triggers_txt = trig.str();
    }
    {
        // Random vectors, uncorrelated with the graph. Slot tokens (triggers
        // and modifiers) are deliberately left out: with the zero OOV policy
        // they all look alike to the contextual stream, so the negation bit
        // is the only channel that can carry the flip.
        Rng vec_rng(derive_seed(spec.seed, "synth-vectors"));
        std::vector<std::string> vocab = {"patient", "has"};
        for (size_t i = 0; i < n; ++i) {
            vocab.push_back(surfaces[i][0]);
            vocab.push_back(surfaces[i][1]);
        }
        vocab.insert(vocab.end(), fillers.begin(), fillers.end());
        std::ostringstream vec;
        char buf[32];
        for (const auto& tok : vocab) {
            vec << tok;
            for (size_t k = 0; k < spec.ctx_dim; ++k) {
                std::snprintf(buf, sizeof(buf), " %.6g", vec_rng.uniform(-0.5, 0.5));
                vec << buf;
            }
            vec << '\n';
        }
        bundle.vectors_txt = vec.str();
    }
    return bundle;
}

void write_bundle(const SyntheticBundle& bundle, const std::string& dir) {
    write_file(dir + "/kg_metathesaurus.tsv", bundle.metathesaurus_tsv);
    write_file(dir + "/kg_semantic_network.tsv", bundle.semantic_network_tsv);
    write_file(dir + "/lexicon.tsv", bundle.lexicon_tsv);
    write_file(dir + "/triggers.txt", bundle.triggers_txt);
    write_file(dir + "/vectors.txt", bundle.vectors_txt);
    for (const auto& [name, split] :
         {std::pair{"train", &bundle.splits.train}, std::pair{"dev", &bundle.splits.dev},
          std::pair{"test", &bundle.splits.test}}) {
        auto out = open_output(dir + "/" + name + ".jsonl");
        write_jsonl(out, *split);
    }
}

esim::Example fuse_example(const NLIExample& ex, const annotate::ConceptLexicon& lexicon,
                           const annotate::TriggerList& triggers,
                           const embed::StaticEmbeddingTable& ctx,
                           const kge::EmbeddingTable* kg_table, const kg::Vocab* entity_vocab,
                           const embed::FusionConfig& fusion, size_t negation_window) {
    auto one_side = [&](const std::string& text) {
        auto tokens = annotate::tokenize(text);
        auto annotations = annotate::match_concepts(tokens, lexicon);
        annotate::detect_negation(tokens, annotations, triggers, negation_window);
        auto aligned = annotate::align(tokens, annotations);
        return embed::fuse(aligned, ctx, kg_table, entity_vocab, fusion).matrix;
    };
    esim::Example out;
    out.premise = one_side(ex.premise);
    out.hypothesis = one_side(ex.hypothesis);
    out.label = ex.label;
    return out;
}

AblationReport run_ablation(const DatasetSplits& splits, const kg::TripleSet& graph,
                            const annotate::ConceptLexicon& lexicon,
                            const annotate::TriggerList& triggers,
                            const embed::StaticEmbeddingTable& ctx,
                            const AblationConfig& config) {
    if (splits.train.empty() || splits.dev.empty() || splits.test.empty()) {
        fail_config("run_ablation: empty split");
    }
    auto [ent_vocab, rel_vocab] = kg::build_vocabs(graph);
    auto indexed = kg::index_triples(graph, ent_vocab, rel_vocab);
    kge::TrainResult kg_result =
        kge::train(indexed, ent_vocab.size(), rel_vocab.size(), config.kge);

    struct Variant {
        const char* name;
        embed::FusionConfig fusion;
    };
    const Variant variants[] = {
        {"base", {false, false}},
        {"w_kg", {true, false}},
        {"w_kg_sentiment", {true, true}},
    };

    AblationReport report;
    for (const auto& variant : variants) {
        const kge::EmbeddingTable* table = variant.fusion.use_kg ? &kg_result.table : nullptr;
        const kg::Vocab* vocab = variant.fusion.use_kg ? &ent_vocab : nullptr;
        auto fuse_split = [&](const std::vector<NLIExample>& split) {
            std::vector<esim::Example> out;
            out.reserve(split.size());
            for (const auto& ex : split) {
                out.push_back(fuse_example(ex, lexicon, triggers, ctx, table, vocab,
                                           variant.fusion, config.negation_window));
            }
            return out;
        };
        auto train_fused = fuse_split(splits.train);
        auto dev_fused = fuse_split(splits.dev);
        auto test_fused = fuse_split(splits.test);

        esim::Config esim_config = config.esim;
        esim_config.input_dim = 0;  // adopt per-variant width
        esim::TrainOutput trained = esim::train_nli(train_fused, dev_fused, esim_config);
        esim_config.input_dim = trained.params.input_dim;

        AblationRow row;
        row.name = variant.name;
        std::vector<esim::Label> golds;
        for (const auto& ex : test_fused) {
            row.predictions.push_back(
                esim::predict(ex.premise, ex.hypothesis, trained.params, esim_config).label);
            golds.push_back(ex.label);
        }
        row.accuracy = accuracy(row.predictions, golds);
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_ablation_csv(std::ostream& out, const AblationReport& report) {
    out << "config,accuracy\n";
    char buf[64];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6g\n", row.name.c_str(), row.accuracy);
        out << buf;
    }
}

void print_ablation_table(std::ostream& out, const AblationReport& report) {
    out << "configuration     test accuracy\n";
    out << "----------------  -------------\n";
    char buf[64];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-16s  %8.4f\n", row.name.c_str(), row.accuracy);
        out << buf;
    }
}

}  // namespace kgfuse::harness
