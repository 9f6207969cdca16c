// kgfuse: command-line driver for the KG-augmented NLI pipeline.
// Subcommands: build-kg, train-kge, eval-kge, annotate, train-nli, eval-nli,
// predict, synth, ablate. Exit codes: 0 ok, 1 runtime failure, 2 usage/config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "kgfuse/annotate.hpp"
#include "kgfuse/embed.hpp"
#include "kgfuse/esim.hpp"
#include "kgfuse/harness.hpp"
#include "kgfuse/hash.hpp"
#include "kgfuse/io.hpp"
#include "kgfuse/kge.hpp"
#include "kgfuse/kg_store.hpp"
#include "kgfuse/manifest.hpp"

namespace {

using namespace kgfuse;

std::function<int()> g_action;

std::string env_name(const std::string& option) {
    std::string out = "KGFUSE_";
    for (char c : option) {
        if (c == '-' || c == '.') {
            out += '_';
        } else {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

// --- shared option bundles ---

struct KgeOptions {
    size_t dim = 100;
    double lr = 1e-4;
    size_t batch_size = 100;
    size_t epochs = 50;
    size_t negatives = 1;
    bool renormalize = false;
    double init_scale = 1.0;
    bool parallel = false;
    size_t threads = 0;

    void attach(CLI::App* cmd, const std::string& prefix = "") {
        auto opt = [&](const char* n, auto& field, const char* help) {
            return cmd->add_option("--" + prefix + n, field, help)
                ->capture_default_str()
                ->envname(env_name("kge-" + std::string(n)));
        };
        opt("dim", dim, "embedding dimension");
        opt("lr", lr, "SGD learning rate");
        opt("batch-size", batch_size, "positives per batch");
        opt("epochs", epochs, "training epochs");
        opt("negatives", negatives, "negatives per positive");
        cmd->add_flag("--" + prefix + "renormalize", renormalize,
                      "unit-L2 entity rows after updates");
        opt("init-scale", init_scale, "init range scale");
        cmd->add_flag("--" + prefix + "parallel", parallel,
                      "parallel batch gradients (not bit-reproducible)");
        opt("threads", threads, "threads for --parallel (0 = auto)");
    }

    kge::TrainConfig to_config(uint64_t seed) const {
        kge::TrainConfig c;
        c.dim = dim;
        c.learning_rate = lr;
        c.batch_size = batch_size;
        c.epochs = epochs;
        c.negatives = negatives;
        c.renormalize = renormalize;
        c.init_scale = init_scale;
        c.parallel = parallel;
        c.threads = threads;
        c.seed = derive_seed(seed, "kge");
        return c;
    }

    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json j;
        j["dim"] = dim;
        j["learning_rate"] = lr;
        j["batch_size"] = batch_size;
        j["epochs"] = epochs;
        j["negatives"] = negatives;
        j["renormalize"] = renormalize;
        j["init_scale"] = init_scale;
        return j;
    }
};

struct EsimOptions {
    size_t hidden = 500;
    double dropout = 0.5;
    double lr = 1e-3;
    size_t batch_size = 32;
    size_t max_epochs = 64;
    size_t patience = 5;
    double clip = 5.0;
    double init_scale = 3.0;
    size_t max_premise_len = 202;
    size_t max_hyp_len = 20;
    size_t threads = 1;

    void attach(CLI::App* cmd, const std::string& prefix = "") {
        auto opt = [&](const char* n, auto& field, const char* help) {
            return cmd->add_option("--" + prefix + n, field, help)
                ->capture_default_str()
                ->envname(env_name("esim-" + std::string(n)));
        };
        opt("hidden", hidden, "BiLSTM hidden size");
        opt("dropout", dropout, "dropout rate");
        opt("lr", lr, "SGD learning rate");
        opt("batch-size", batch_size, "examples per batch");
        opt("max-epochs", max_epochs, "epoch cap");
        opt("patience", patience, "early-stopping patience");
        opt("clip", clip, "gradient-norm clip");
        opt("init-scale", init_scale, "weight init scale");
        opt("max-premise-len", max_premise_len, "premise token cap");
        opt("max-hyp-len", max_hyp_len, "hypothesis token cap");
        opt("threads", threads, "intra-batch gradient threads (>1 not bit-reproducible)");
    }

    esim::Config to_config(uint64_t seed) const {
        esim::Config c;
        c.hidden = hidden;
        c.dropout = dropout;
        c.learning_rate = lr;
        c.batch_size = batch_size;
        c.max_epochs = max_epochs;
        c.patience = patience;
        c.clip_norm = clip;
        c.init_scale = init_scale;
        c.max_premise_len = max_premise_len;
        c.max_hyp_len = max_hyp_len;
        c.threads = threads;
        c.seed = derive_seed(seed, "esim");
        return c;
    }

    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json j;
        j["hidden"] = hidden;
        j["dropout"] = dropout;
        j["learning_rate"] = lr;
        j["batch_size"] = batch_size;
        j["max_epochs"] = max_epochs;
        j["patience"] = patience;
        j["clip_norm"] = clip;
        j["init_scale"] = init_scale;
        j["max_premise_len"] = max_premise_len;
        j["max_hyp_len"] = max_hyp_len;
        return j;
    }
};

// artifact paths shared by the NLI-side commands
struct NliArtifactOptions {
    std::string vectors_path;
    std::string lexicon_path;
    std::string triggers_path;
    std::string kge_path;
    bool use_kg = false;
    bool use_sentiment = false;
    std::string oov = "zero";
    size_t window = 5;

    void attach(CLI::App* cmd) {
        cmd->add_option("--vectors", vectors_path, "word-vector file (token v1 ... vd)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--lexicon", lexicon_path, "concept lexicon TSV")
            ->check(CLI::ExistingFile);
        cmd->add_option("--triggers", triggers_path, "negation trigger list")
            ->check(CLI::ExistingFile);
        cmd->add_option("--kge", kge_path, "DistMult checkpoint")->check(CLI::ExistingFile);
        cmd->add_flag("--use-kg", use_kg, "concatenate KG embedding slices");
        cmd->add_flag("--use-sentiment", use_sentiment, "concatenate the negation bit");
        cmd->add_option("--oov", oov, "OOV policy: zero|hashed")
            ->check(CLI::IsMember({"zero", "hashed"}))
            ->capture_default_str();
        cmd->add_option("--window", window, "negation trigger window")->capture_default_str();
    }

    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json j;
        j["use_kg"] = use_kg;
        j["use_sentiment"] = use_sentiment;
        j["oov"] = oov;
        j["negation_window"] = window;
        return j;
    }
};

struct NliArtifacts {
    annotate::ConceptLexicon lexicon;
    annotate::TriggerList triggers;
    embed::StaticEmbeddingTable vectors;
    std::optional<kge::Checkpoint> kg;
    embed::FusionConfig fusion;
    size_t window = 5;

    const kge::EmbeddingTable* table() const { return kg ? &kg->table : nullptr; }
    const kg::Vocab* vocab() const { return kg ? &kg->entities : nullptr; }
};

NliArtifacts load_artifacts(const NliArtifactOptions& opt, uint64_t seed, Manifest& manifest) {
    NliArtifacts a;
    a.fusion.use_kg = opt.use_kg;
    a.fusion.use_sentiment = opt.use_sentiment;
    a.window = opt.window;
    if (opt.use_kg && opt.kge_path.empty()) {
        fail_config("--use-kg requires --kge <checkpoint>");
    }
    const auto policy =
        opt.oov == "hashed" ? embed::OovPolicy::Hashed : embed::OovPolicy::Zero;
    {
        auto in = open_input(opt.vectors_path);
        a.vectors = embed::StaticEmbeddingTable::load(in, policy, derive_seed(seed, "oov"));
        manifest.add_input(opt.vectors_path);
    }
    if (!opt.lexicon_path.empty()) {
        auto in = open_input(opt.lexicon_path);
        a.lexicon = annotate::ConceptLexicon::load(in);
        manifest.add_input(opt.lexicon_path);
    }
    if (!opt.triggers_path.empty()) {
        auto in = open_input(opt.triggers_path);
        a.triggers = annotate::TriggerList::load(in);
        manifest.add_input(opt.triggers_path);
    } else {
        a.triggers = annotate::TriggerList::defaults();
    }
    if (!opt.kge_path.empty()) {
        auto in = open_input(opt.kge_path);
        a.kg = kge::load_checkpoint(in);
        manifest.add_input(opt.kge_path);
    }
    return a;
}

std::vector<esim::Example> fuse_split(const std::vector<harness::NLIExample>& split,
                                      const NliArtifacts& a) {
    std::vector<esim::Example> out;
    out.reserve(split.size());
    for (const auto& ex : split) {
        out.push_back(harness::fuse_example(ex, a.lexicon, a.triggers, a.vectors, a.table(),
                                            a.vocab(), a.fusion, a.window));
    }
    return out;
}

std::vector<harness::NLIExample> load_jsonl_file(const std::string& path, Manifest& manifest) {
    auto in = open_input(path);
    manifest.add_input(path);
    return harness::load_jsonl(in);
}

kg::TripleSet load_edgelists(const std::vector<std::string>& paths, kg::Source source,
                             Manifest& manifest) {
    kg::TripleSet merged;
    for (const auto& path : paths) {
        auto in = open_input(path);
        manifest.add_input(path);
        merged = kg::merge(merged, kg::load_edgelist(in, source));
    }
    return merged;
}

// --- subcommands ---

struct BuildKgOptions {
    std::vector<std::string> meta, sem, other;
    std::string concepts, out, stats, manifest;
};

void register_build_kg(CLI::App& app) {
    auto cmd = app.add_subcommand("build-kg", "merge edgelists and extract the subgraph");
    auto opt = std::make_shared<BuildKgOptions>();
    cmd->add_option("--metathesaurus", opt->meta, "metathesaurus-like edgelist(s)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--semantic-network", opt->sem, "semantic-network-like edgelist(s)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--other", opt->other, "untagged edgelist(s)")->check(CLI::ExistingFile);
    cmd->add_option("--concepts", opt->concepts, "keep only triples between these concepts")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt->out, "merged deduplicated TSV")->required();
    cmd->add_option("--stats", opt->stats, "stats JSON path");
    cmd->add_option("--manifest", opt->manifest, "manifest path (default <out>.manifest.json)");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "build-kg";
            kg::TripleSet merged;
            merged = kg::merge(merged, load_edgelists(opt->meta, kg::Source::Metathesaurus,
                                                      manifest));
            merged = kg::merge(merged, load_edgelists(opt->sem, kg::Source::SemanticNetwork,
                                                      manifest));
            merged = kg::merge(merged, load_edgelists(opt->other, kg::Source::Other, manifest));
            if (manifest.input_digests.empty()) {
                fail_config("build-kg: no input edgelists given");
            }
            if (!opt->concepts.empty()) {
                auto in = open_input(opt->concepts);
                manifest.add_input(opt->concepts);
                merged = kg::extract_subgraph(merged, kg::load_concepts(in));
            }
            {
                auto out = open_output(opt->out);
                kg::write_tsv_sorted(out, merged);
            }
            manifest.outputs.push_back(opt->out);
            const auto s = kg::stats(merged);
            if (!opt->stats.empty()) {
                write_file(opt->stats, kg::stats_json(s));
                manifest.outputs.push_back(opt->stats);
            }
            manifest.config["concepts_filter"] = !opt->concepts.empty();
            manifest.config["triples"] = s.triple_count;
            manifest.config["entities"] = s.entity_count;
            manifest.write(opt->manifest.empty() ? opt->out + ".manifest.json" : opt->manifest);
            std::cout << "wrote " << opt->out << " (" << s.triple_count << " triples, "
                      << s.entity_count << " entities)\n";
            return 0;
        };
    });
}

struct TrainKgeOptions {
    std::vector<std::string> edgelists;
    KgeOptions kge;
    uint64_t seed = 0;
    std::string out, loss_log, manifest;
    bool dry_run = false;
};

void register_train_kge(CLI::App& app) {
    auto cmd = app.add_subcommand("train-kge", "train DistMult embeddings");
    auto opt = std::make_shared<TrainKgeOptions>();
    cmd->add_option("--edgelist", opt->edgelists, "training edgelist(s)")
        ->required()
        ->check(CLI::ExistingFile);
    opt->kge.attach(cmd);
    cmd->add_option("--seed", opt->seed, "global seed")->capture_default_str()
        ->envname("KGFUSE_SEED");
    cmd->add_option("--out", opt->out, "checkpoint path")->required();
    cmd->add_option("--loss-log", opt->loss_log, "loss CSV path (default <out>.loss.csv)");
    cmd->add_option("--manifest", opt->manifest, "manifest path (default <out>.manifest.json)");
    cmd->add_flag("--dry-run", opt->dry_run, "resolve config and write the manifest only");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "train-kge";
            manifest.seed = opt->seed;
            manifest.config = opt->kge.echo();
            const std::string manifest_path =
                opt->manifest.empty() ? opt->out + ".manifest.json" : opt->manifest;
            if (opt->dry_run) {
                manifest.write(manifest_path);
                std::cout << "dry run; wrote " << manifest_path << "\n";
                return 0;
            }
            kg::TripleSet graph = load_edgelists(opt->edgelists, kg::Source::Other, manifest);
            auto [ents, rels] = kg::build_vocabs(graph);
            auto indexed = kg::index_triples(graph, ents, rels);
            auto result = kge::train(indexed, ents.size(), rels.size(),
                                     opt->kge.to_config(opt->seed));
            {
                auto out = open_output(opt->out);
                kge::save_checkpoint(out, result.table, ents, rels);
            }
            manifest.outputs.push_back(opt->out);
            const std::string loss_path =
                opt->loss_log.empty() ? opt->out + ".loss.csv" : opt->loss_log;
            {
                auto out = open_output(loss_path);
                kge::write_loss_csv(out, result.epoch_loss);
            }
            manifest.outputs.push_back(loss_path);
            manifest.write(manifest_path);
            std::cout << "trained " << ents.size() << " entities, " << rels.size()
                      << " relations; final mean loss "
                      << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << "\n";
            return 0;
        };
    });
}

struct EvalKgeOptions {
    std::string checkpoint, test, out;
    std::vector<std::string> filters;
};

void register_eval_kge(CLI::App& app) {
    auto cmd = app.add_subcommand("eval-kge", "filtered link-prediction metrics");
    auto opt = std::make_shared<EvalKgeOptions>();
    cmd->add_option("--checkpoint", opt->checkpoint, "DistMult checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--test", opt->test, "test edgelist")->required()->check(CLI::ExistingFile);
    cmd->add_option("--filter", opt->filters, "extra known-true edgelist(s) to filter")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt->out, "metrics JSON path");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "eval-kge";
            kge::Checkpoint cp;
            {
                auto in = open_input(opt->checkpoint);
                manifest.add_input(opt->checkpoint);
                cp = kge::load_checkpoint(in);
            }
            kg::TripleSet test_set;
            {
                auto in = open_input(opt->test);
                manifest.add_input(opt->test);
                test_set = kg::load_edgelist(in, kg::Source::Other);
            }
            auto test = kg::index_triples(test_set, cp.entities, cp.relations);
            auto known = test;
            for (const auto& path : opt->filters) {
                auto in = open_input(path);
                manifest.add_input(path);
                auto extra = kg::index_triples(kg::load_edgelist(in, kg::Source::Other),
                                               cp.entities, cp.relations);
                known.insert(known.end(), extra.begin(), extra.end());
            }
            const auto metrics = kge::evaluate_link_prediction(cp.table, test, known);
            nlohmann::ordered_json j;
            j["mrr"] = metrics.mrr;
            j["hits1"] = metrics.hits1;
            j["hits3"] = metrics.hits3;
            j["hits10"] = metrics.hits10;
            j["queries"] = metrics.queries;
            const std::string text = j.dump(2) + "\n";
            std::cout << text;
            if (!opt->out.empty()) {
                write_file(opt->out, text);
                manifest.outputs.push_back(opt->out);
                manifest.write(opt->out + ".manifest.json");
            }
            return 0;
        };
    });
}

struct AnnotateOptions {
    std::string lexicon, triggers, input, out;
    size_t window = 5;
};

void register_annotate(CLI::App& app) {
    auto cmd = app.add_subcommand("annotate", "concept + negation annotation to JSONL");
    auto opt = std::make_shared<AnnotateOptions>();
    cmd->add_option("--lexicon", opt->lexicon, "concept lexicon TSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--triggers", opt->triggers, "negation trigger list")
        ->check(CLI::ExistingFile);
    cmd->add_option("--window", opt->window, "negation trigger window")->capture_default_str();
    cmd->add_option("--input", opt->input, "sentences, one per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt->out, "JSONL output path")->required();
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "annotate";
            annotate::ConceptLexicon lexicon;
            {
                auto in = open_input(opt->lexicon);
                manifest.add_input(opt->lexicon);
                lexicon = annotate::ConceptLexicon::load(in);
            }
            annotate::TriggerList triggers = annotate::TriggerList::defaults();
            if (!opt->triggers.empty()) {
                auto in = open_input(opt->triggers);
                manifest.add_input(opt->triggers);
                triggers = annotate::TriggerList::load(in);
            }
            auto in = open_input(opt->input);
            manifest.add_input(opt->input);
            auto out = open_output(opt->out);
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                auto tokens = annotate::tokenize(line);
                auto anns = annotate::match_concepts(tokens, lexicon);
                annotate::detect_negation(tokens, anns, triggers, opt->window);
                out << annotate::sentence_json(tokens, anns) << '\n';
            }
            manifest.outputs.push_back(opt->out);
            manifest.config["window"] = opt->window;
            manifest.write(opt->out + ".manifest.json");
            return 0;
        };
    });
}

struct TrainNliOptions {
    std::string train, dev, out, report, manifest, fused_debug;
    NliArtifactOptions art;
    EsimOptions esim;
    uint64_t seed = 0;
    bool dry_run = false;
};

void register_train_nli(CLI::App& app) {
    auto cmd = app.add_subcommand("train-nli", "train the ESIM classifier on fused inputs");
    auto opt = std::make_shared<TrainNliOptions>();
    cmd->add_option("--train", opt->train, "training JSONL")->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--dev", opt->dev, "development JSONL")->required()
        ->check(CLI::ExistingFile);
    opt->art.attach(cmd);
    opt->esim.attach(cmd);
    cmd->add_option("--seed", opt->seed, "global seed")->capture_default_str()
        ->envname("KGFUSE_SEED");
    cmd->add_option("--out", opt->out, "model checkpoint path")->required();
    cmd->add_option("--report", opt->report, "TrainReport CSV (default <out>.report.csv)");
    cmd->add_option("--manifest", opt->manifest, "manifest path (default <out>.manifest.json)");
    cmd->add_option("--fused-debug", opt->fused_debug,
                    "dump fused row widths/provenance JSONL here");
    cmd->add_flag("--dry-run", opt->dry_run, "resolve config and write the manifest only");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "train-nli";
            manifest.seed = opt->seed;
            manifest.config = opt->esim.echo();
            const auto art_echo = opt->art.echo();
            for (const auto& [k, v] : art_echo.items()) manifest.config[k] = v;
            const std::string manifest_path =
                opt->manifest.empty() ? opt->out + ".manifest.json" : opt->manifest;
            if (opt->dry_run) {
                manifest.write(manifest_path);
                std::cout << "dry run; wrote " << manifest_path << "\n";
                return 0;
            }
            auto artifacts = load_artifacts(opt->art, opt->seed, manifest);
            auto train_raw = load_jsonl_file(opt->train, manifest);
            auto dev_raw = load_jsonl_file(opt->dev, manifest);
            auto train_fused = fuse_split(train_raw, artifacts);
            auto dev_fused = fuse_split(dev_raw, artifacts);
            if (!opt->fused_debug.empty()) {
                auto dbg = open_output(opt->fused_debug);
                for (const auto& raw : {&train_raw, &dev_raw}) {
                    for (const auto& ex : *raw) {
                        auto one = [&](const std::string& text) {
                            auto tokens = annotate::tokenize(text);
                            auto anns = annotate::match_concepts(tokens, artifacts.lexicon);
                            annotate::detect_negation(tokens, anns, artifacts.triggers,
                                                      artifacts.window);
                            auto aligned = annotate::align(tokens, anns);
                            dbg << embed::debug_json(embed::fuse(aligned, artifacts.vectors,
                                                                 artifacts.table(),
                                                                 artifacts.vocab(),
                                                                 artifacts.fusion))
                                << '\n';
                        };
                        one(ex.premise);
                        one(ex.hypothesis);
                    }
                }
                manifest.outputs.push_back(opt->fused_debug);
            }
            auto trained =
                esim::train_nli(train_fused, dev_fused, opt->esim.to_config(opt->seed));
            esim::Config cfg_echo = opt->esim.to_config(opt->seed);
            cfg_echo.input_dim = trained.params.input_dim;
            {
                auto out = open_output(opt->out);
                esim::save_checkpoint(out, trained.params, cfg_echo);
            }
            manifest.outputs.push_back(opt->out);
            const std::string report_path =
                opt->report.empty() ? opt->out + ".report.csv" : opt->report;
            {
                auto out = open_output(report_path);
                esim::write_report_csv(out, trained.report);
            }
            manifest.outputs.push_back(report_path);
            manifest.config["input_dim"] = trained.params.input_dim;
            manifest.config["stopped_at"] = trained.report.stopped_at;
            manifest.config["best_epoch"] = trained.report.best_epoch;
            manifest.write(manifest_path);
            if (trained.report.truncated > 0) {
                std::cerr << "warning: " << trained.report.truncated
                          << " sequences truncated to the length caps\n";
            }
            std::cout << "stopped at epoch " << trained.report.stopped_at << ", best epoch "
                      << trained.report.best_epoch << ", dev accuracy "
                      << trained.report.dev_accuracy[trained.report.best_epoch - 1] << "\n";
            return 0;
        };
    });
}

// shared by eval-nli and predict
esim::CheckpointData load_model(const std::string& path, Manifest& manifest) {
    auto in = open_input(path);
    manifest.add_input(path);
    return esim::load_checkpoint(in);
}

struct EvalNliOptions {
    std::string model, test, out, predictions;
    NliArtifactOptions art;
    uint64_t seed = 0;
};

void register_eval_nli(CLI::App& app) {
    auto cmd = app.add_subcommand("eval-nli", "evaluate a trained model on a JSONL split");
    auto opt = std::make_shared<EvalNliOptions>();
    cmd->add_option("--model", opt->model, "ESIM checkpoint")->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--test", opt->test, "test JSONL")->required()->check(CLI::ExistingFile);
    opt->art.attach(cmd);
    cmd->add_option("--seed", opt->seed, "global seed (hashed-OOV substream)")
        ->capture_default_str()
        ->envname("KGFUSE_SEED");
    cmd->add_option("--out", opt->out, "accuracy JSON path");
    cmd->add_option("--predictions", opt->predictions, "per-pair predictions JSONL");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "eval-nli";
            manifest.seed = opt->seed;
            auto model = load_model(opt->model, manifest);
            auto artifacts = load_artifacts(opt->art, opt->seed, manifest);
            auto test_raw = load_jsonl_file(opt->test, manifest);
            if (test_raw.empty()) fail("eval-nli: empty test split");

            std::vector<esim::Label> predictions, golds;
            std::vector<std::array<double, 3>> probs;
            for (const auto& ex : test_raw) {
                auto fused =
                    harness::fuse_example(ex, artifacts.lexicon, artifacts.triggers,
                                          artifacts.vectors, artifacts.table(), artifacts.vocab(),
                                          artifacts.fusion, artifacts.window);
                auto pred =
                    esim::predict(fused.premise, fused.hypothesis, model.params, model.config);
                predictions.push_back(pred.label);
                probs.push_back(pred.probabilities);
                golds.push_back(ex.label);
            }
            nlohmann::ordered_json j;
            j["accuracy"] = harness::accuracy(predictions, golds);
            j["count"] = golds.size();
            std::vector<esim::Label> fp, fg, up, ug;
            for (size_t i = 0; i < test_raw.size(); ++i) {
                (test_raw[i].flipped ? fp : up).push_back(predictions[i]);
                (test_raw[i].flipped ? fg : ug).push_back(golds[i]);
            }
            if (!fg.empty()) {
                j["flipped"] = {{"accuracy", harness::accuracy(fp, fg)}, {"count", fg.size()}};
                if (!ug.empty()) {
                    j["unflipped"] = {{"accuracy", harness::accuracy(up, ug)},
                                      {"count", ug.size()}};
                }
            }
            const std::string text = j.dump(2) + "\n";
            std::cout << text;
            if (!opt->predictions.empty()) {
                auto out = open_output(opt->predictions);
                for (size_t i = 0; i < predictions.size(); ++i) {
                    nlohmann::ordered_json line;
                    line["predicted"] = std::string(esim::label_name(predictions[i]));
                    line["gold"] = std::string(esim::label_name(golds[i]));
                    line["probabilities"] = probs[i];
                    if (test_raw[i].flipped) line["flipped"] = true;
                    out << line.dump() << '\n';
                }
                manifest.outputs.push_back(opt->predictions);
            }
            if (!opt->out.empty()) {
                write_file(opt->out, text);
                manifest.outputs.push_back(opt->out);
                manifest.write(opt->out + ".manifest.json");
            }
            return 0;
        };
    });
}

struct PredictOptions {
    std::string model, premise, hypothesis, out;
    NliArtifactOptions art;
    uint64_t seed = 0;
};

void register_predict(CLI::App& app) {
    auto cmd = app.add_subcommand("predict", "classify one premise/hypothesis pair");
    auto opt = std::make_shared<PredictOptions>();
    cmd->add_option("--model", opt->model, "ESIM checkpoint")->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--premise", opt->premise, "premise sentence")->required();
    cmd->add_option("--hypothesis", opt->hypothesis, "hypothesis sentence")->required();
    opt->art.attach(cmd);
    cmd->add_option("--seed", opt->seed, "global seed (hashed-OOV substream)")
        ->capture_default_str()
        ->envname("KGFUSE_SEED");
    cmd->add_option("--out", opt->out, "also write the prediction JSON here");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "predict";
            manifest.seed = opt->seed;
            auto model = load_model(opt->model, manifest);
            auto artifacts = load_artifacts(opt->art, opt->seed, manifest);
            harness::NLIExample ex{opt->premise, opt->hypothesis, esim::Label::Neutral, false};
            auto fused = harness::fuse_example(ex, artifacts.lexicon, artifacts.triggers,
                                               artifacts.vectors, artifacts.table(),
                                               artifacts.vocab(), artifacts.fusion,
                                               artifacts.window);
            auto pred =
                esim::predict(fused.premise, fused.hypothesis, model.params, model.config);
            nlohmann::ordered_json j;
            j["label"] = std::string(esim::label_name(pred.label));
            j["probabilities"] = pred.probabilities;
            const std::string text = j.dump() + "\n";
            std::cout << text;
            if (!opt->out.empty()) {
                write_file(opt->out, text);
                manifest.outputs.push_back(opt->out);
                manifest.write(opt->out + ".manifest.json");
            }
            return 0;
        };
    });
}

struct SynthOptions {
    harness::SyntheticSpec spec;
    std::string outdir;
};

void register_synth(CLI::App& app) {
    auto cmd = app.add_subcommand("synth", "generate a synthetic corpus bundle");
    auto opt = std::make_shared<SynthOptions>();
    cmd->add_option("--concepts", opt->spec.concepts)->capture_default_str();
    cmd->add_option("--clusters", opt->spec.clusters, "0 = derive from concept count")
        ->capture_default_str();
    cmd->add_option("--isa", opt->spec.isa_edges, "isa edge count (default: all in-cluster)");
    cmd->add_option("--opposite", opt->spec.opposite_edges,
                    "opposite-of edge count (default: all cross-pair)");
    cmd->add_option("--distractor-relations", opt->spec.distractor_relations)
        ->capture_default_str();
    cmd->add_option("--train", opt->spec.train_examples)->capture_default_str();
    cmd->add_option("--dev", opt->spec.dev_examples)->capture_default_str();
    cmd->add_option("--test", opt->spec.test_examples)->capture_default_str();
    cmd->add_option("--flip", opt->spec.flip_fraction, "negation-wrap fraction")
        ->capture_default_str();
    cmd->add_option("--ctx-dim", opt->spec.ctx_dim)->capture_default_str();
    cmd->add_option("--seed", opt->spec.seed)->capture_default_str()->envname("KGFUSE_SEED");
    cmd->add_option("--outdir", opt->outdir, "bundle directory")->required();
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "synth";
            manifest.seed = opt->spec.seed;
            manifest.config["concepts"] = opt->spec.concepts;
            manifest.config["clusters"] = opt->spec.clusters;
            manifest.config["distractor_relations"] = opt->spec.distractor_relations;
            manifest.config["train"] = opt->spec.train_examples;
            manifest.config["dev"] = opt->spec.dev_examples;
            manifest.config["test"] = opt->spec.test_examples;
            manifest.config["flip_fraction"] = opt->spec.flip_fraction;
            manifest.config["ctx_dim"] = opt->spec.ctx_dim;
            auto bundle = harness::generate_synthetic(opt->spec);
            harness::write_bundle(bundle, opt->outdir);
            for (const char* f :
                 {"kg_metathesaurus.tsv", "kg_semantic_network.tsv", "lexicon.tsv",
                  "triggers.txt", "vectors.txt", "train.jsonl", "dev.jsonl", "test.jsonl"}) {
                manifest.outputs.push_back(opt->outdir + "/" + f);
            }
            manifest.write(opt->outdir + "/synth.manifest.json");
            std::cout << "bundle written to " << opt->outdir << "\n";
            return 0;
        };
    });
}

struct AblateOptions {
    std::string bundle, outdir;
    KgeOptions kge;
    EsimOptions esim;
    std::string oov = "zero";
    uint64_t seed = 0;
};

void register_ablate(CLI::App& app) {
    auto cmd = app.add_subcommand("ablate", "train/evaluate base, w_kg, w_kg_sentiment");
    auto opt = std::make_shared<AblateOptions>();
    cmd->add_option("--bundle", opt->bundle, "bundle directory from `synth`")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--outdir", opt->outdir, "report directory")->required();
    opt->kge.attach(cmd, "kge-");
    opt->esim.attach(cmd, "esim-");
    cmd->add_option("--oov", opt->oov)->check(CLI::IsMember({"zero", "hashed"}))
        ->capture_default_str();
    cmd->add_option("--seed", opt->seed)->capture_default_str()->envname("KGFUSE_SEED");
    cmd->callback([opt] {
        g_action = [opt]() -> int {
            Manifest manifest;
            manifest.command = "ablate";
            manifest.seed = opt->seed;
            manifest.config["kge"] = opt->kge.echo();
            manifest.config["esim"] = opt->esim.echo();
            manifest.config["oov"] = opt->oov;

            const std::string b = opt->bundle;
            kg::TripleSet graph;
            {
                auto meta_in = open_input(b + "/kg_metathesaurus.tsv");
                manifest.add_input(b + "/kg_metathesaurus.tsv");
                auto sem_in = open_input(b + "/kg_semantic_network.tsv");
                manifest.add_input(b + "/kg_semantic_network.tsv");
                graph = kg::merge(kg::load_edgelist(meta_in, kg::Source::Metathesaurus),
                                  kg::load_edgelist(sem_in, kg::Source::SemanticNetwork));
            }
            annotate::ConceptLexicon lexicon;
            {
                auto in = open_input(b + "/lexicon.tsv");
                manifest.add_input(b + "/lexicon.tsv");
                lexicon = annotate::ConceptLexicon::load(in);
            }
            annotate::TriggerList triggers;
            {
                auto in = open_input(b + "/triggers.txt");
                manifest.add_input(b + "/triggers.txt");
                triggers = annotate::TriggerList::load(in);
            }
            embed::StaticEmbeddingTable vectors;
            {
                auto in = open_input(b + "/vectors.txt");
                manifest.add_input(b + "/vectors.txt");
                const auto policy = opt->oov == "hashed" ? embed::OovPolicy::Hashed
                                                         : embed::OovPolicy::Zero;
                vectors = embed::StaticEmbeddingTable::load(in, policy,
                                                            derive_seed(opt->seed, "oov"));
            }
            harness::DatasetSplits splits;
            splits.train = load_jsonl_file(b + "/train.jsonl", manifest);
            splits.dev = load_jsonl_file(b + "/dev.jsonl", manifest);
            splits.test = load_jsonl_file(b + "/test.jsonl", manifest);

            harness::AblationConfig config;
            config.kge = opt->kge.to_config(opt->seed);
            config.esim = opt->esim.to_config(opt->seed);
            config.oov = opt->oov == "hashed" ? embed::OovPolicy::Hashed
                                              : embed::OovPolicy::Zero;
            auto report = harness::run_ablation(splits, graph, lexicon, triggers, vectors,
                                                config);
            {
                auto out = open_output(opt->outdir + "/ablation.csv");
                harness::write_ablation_csv(out, report);
            }
            manifest.outputs.push_back(opt->outdir + "/ablation.csv");
            for (const auto& row : report.rows) {
                const std::string path = opt->outdir + "/predictions_" + row.name + ".jsonl";
                auto out = open_output(path);
                for (size_t i = 0; i < row.predictions.size(); ++i) {
                    nlohmann::ordered_json j;
                    j["predicted"] = std::string(esim::label_name(row.predictions[i]));
                    j["gold"] = std::string(esim::label_name(splits.test[i].label));
                    if (splits.test[i].flipped) j["flipped"] = true;
                    out << j.dump() << '\n';
                }
                manifest.outputs.push_back(path);
            }
            manifest.write(opt->outdir + "/ablate.manifest.json");
            harness::print_ablation_table(std::cout, report);
            return 0;
        };
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph augmented NLI toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file ([subcommand] sections)");

    register_build_kg(app);
    register_train_kge(app);
    register_eval_kge(app);
    register_annotate(app);
    register_train_nli(app);
    register_eval_nli(app);
    register_predict(app);
    register_synth(app);
    register_ablate(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version are fine; usage errors exit 2
    }

    try {
        return g_action ? g_action() : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
