// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Heavy stages run in-process against the library; the manifest checks
// drive the real CLI binary.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgfuse/annotate.hpp"
#include "kgfuse/embed.hpp"
#include "kgfuse/esim.hpp"
#include "kgfuse/harness.hpp"
#include "kgfuse/hash.hpp"
#include "kgfuse/io.hpp"
#include "kgfuse/kge.hpp"
#include "kgfuse/kg_store.hpp"
#include "kgfuse/rng.hpp"

namespace fs = std::filesystem;
using namespace kgfuse;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

struct Criterion {
    int id;
    const char* name;
    double time_limit_s;
};

void report(const Criterion& c, bool ok, double elapsed, const std::string& detail) {
    if (elapsed > c.time_limit_s) ok = false;
    std::printf("%s criterion %d: %-34s [%6.2fs / %.0fs] %s\n", ok ? "PASS" : "FAIL", c.id,
                c.name, elapsed, c.time_limit_s, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void run(const Criterion& c, const std::function<bool(std::string&)>& body) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    report(c, ok, std::chrono::duration<double>(Clock::now() - t0).count(), detail);
}

bool rel_ok(double analytic, double numeric, double tol) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= 1e-8) return true;
    return diff <= tol * std::max(std::abs(analytic), std::abs(numeric));
}

// ---- criterion 3 / 8 shared pieces ----

struct LinkPredRun {
    kge::LinkPredMetrics trained;
    kge::LinkPredMetrics random_baseline;
    double mc_mean = 0.0;
    double mc_sd = 0.0;
    std::string checkpoint;  // serialized table, for the determinism check
};

LinkPredRun run_link_prediction() {
    auto g = harness::make_cluster_graph(50, 0, 210, 40, 0, 31415);
    auto [ents, rels] = kg::build_vocabs(g.triples);
    auto indexed = kg::index_triples(g.triples, ents, rels);
    Rng split_rng(derive_seed(31415, "linkpred-split"));
    split_rng.shuffle(indexed);
    std::vector<kg::IndexedTriple> held(indexed.begin(), indexed.begin() + 50);
    std::vector<kg::IndexedTriple> train(indexed.begin() + 50, indexed.end());

    kge::TrainConfig config;
    config.dim = 16;
    config.learning_rate = 5.0;
    config.epochs = 600;  // >= 300 per the gate
    config.batch_size = 50;
    config.renormalize = true;
    config.seed = derive_seed(31415, "kge");

    LinkPredRun out;
    auto result = kge::train(train, ents.size(), rels.size(), config);
    out.trained = kge::evaluate_link_prediction(result.table, held, indexed);

    auto random_table = kge::init_embeddings(ents.size(), rels.size(), config);
    out.random_baseline = kge::evaluate_link_prediction(random_table, held, indexed);

    // Monte-Carlo band for the structure-free baseline: uniform ranks over
    // the exact filtered candidate counts
    std::set<std::tuple<uint32_t, uint32_t, uint32_t>> known;
    for (const auto& t : indexed) known.insert({t.head, t.relation, t.tail});
    std::vector<size_t> candidates;
    for (const auto& t : held) {
        size_t tails = 0, heads = 0;
        for (uint32_t e = 0; e < ents.size(); ++e) {
            if (e != t.tail && known.count({t.head, t.relation, e})) ++tails;
            if (e != t.head && known.count({e, t.relation, t.tail})) ++heads;
        }
        candidates.push_back(ents.size() - tails);
        candidates.push_back(ents.size() - heads);
    }
    Rng mc(777);
    const int reps = 4000;
    double mean = 0.0, m2 = 0.0;
    for (int rep = 1; rep <= reps; ++rep) {
        double mrr = 0.0;
        for (size_t cand : candidates) mrr += 1.0 / static_cast<double>(1 + mc.below(cand));
        mrr /= static_cast<double>(candidates.size());
        const double delta = mrr - mean;
        mean += delta / rep;
        m2 += delta * (mrr - mean);
    }
    out.mc_mean = mean;
    out.mc_sd = std::sqrt(m2 / (reps - 1));

    std::ostringstream cp;
    kge::save_checkpoint(cp, result.table, ents, rels);
    out.checkpoint = cp.str();
    return out;
}

// ---- criterion 5 / 6 / 8 shared pieces ----

harness::SyntheticSpec ablation_spec(double flip) {
    harness::SyntheticSpec spec;
    spec.concepts = 60;
    spec.train_examples = 2000;
    spec.dev_examples = 300;
    spec.test_examples = 300;
    spec.flip_fraction = flip;
    spec.append_filler = false;
    spec.ctx_dim = 16;
    spec.seed = 20240801;
    return spec;
}

harness::AblationConfig ablation_config() {
    harness::AblationConfig config;
    config.kge.dim = 16;
    config.kge.learning_rate = 5.0;
    config.kge.epochs = 300;
    config.kge.batch_size = 100;
    config.kge.renormalize = true;
    config.kge.seed = derive_seed(20240801, "kge");
    config.esim.hidden = 32;
    config.esim.dropout = 0.1;
    config.esim.learning_rate = 0.3;
    config.esim.batch_size = 32;
    // the sentiment run needs ~30 epochs to leave the bit-blind plateau;
    // patience must ride that out (see notes/ledger for the calibration)
    config.esim.max_epochs = 100;
    config.esim.patience = 30;
    config.esim.seed = derive_seed(20240801, "esim");
    return config;
}

struct AblationRun {
    harness::AblationReport report;
    harness::SyntheticBundle bundle;
    std::string report_csv;
};

AblationRun run_ablation_bundle(double flip) {
    AblationRun out;
    out.bundle = harness::generate_synthetic(ablation_spec(flip));
    std::istringstream lex_in(out.bundle.lexicon_tsv), trig_in(out.bundle.triggers_txt),
        vec_in(out.bundle.vectors_txt);
    auto lexicon = annotate::ConceptLexicon::load(lex_in);
    auto triggers = annotate::TriggerList::load(trig_in);
    auto vectors = embed::StaticEmbeddingTable::load(vec_in);
    out.report = harness::run_ablation(out.bundle.splits, out.bundle.graph.triples, lexicon,
                                       triggers, vectors, ablation_config());
    std::ostringstream csv;
    harness::write_ablation_csv(csv, out.report);
    out.report_csv = csv.str();
    return out;
}

double row_accuracy(const harness::AblationReport& r, const std::string& name) {
    for (const auto& row : r.rows) {
        if (row.name == name) return row.accuracy;
    }
    fail("missing ablation row " + name);
}

double flipped_subset_accuracy(const AblationRun& run, const std::string& name) {
    for (const auto& row : run.report.rows) {
        if (row.name != name) continue;
        size_t total = 0, hit = 0;
        for (size_t i = 0; i < row.predictions.size(); ++i) {
            if (!run.bundle.splits.test[i].flipped) continue;
            ++total;
            hit += row.predictions[i] == run.bundle.splits.test[i].label;
        }
        if (total == 0) fail("no flipped test examples");
        return static_cast<double>(hit) / static_cast<double>(total);
    }
    fail("missing ablation row " + name);
}

std::string predictions_line(const AblationRun& run) {
    std::string s;
    for (const auto& row : run.report.rows) {
        for (auto label : row.predictions) s += char('0' + int(label));
        s += '|';
    }
    return s;
}

// ---- CLI helper for criterion 9 ----

const std::string kCli = KGFUSE_CLI_PATH;
const fs::path kTmp = KGFUSE_TEST_TMPDIR;

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
    fs::create_directories(kTmp);
    std::printf("kernel variant: %s\n",
                std::string(kernels::variant_name(kernels::active())).c_str());

    // shared state across criteria
    LinkPredRun linkpred_first;
    AblationRun ablation_first;

    run({1, "DistMult gradient check", 5.0}, [](std::string& detail) {
        Rng rng(2718);
        size_t checked = 0, bad = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const size_t d = 1 + rng.below(8);
            const size_t ne = 2 + rng.below(5);
            Mat<double> ents(ne, d), rels(2, d);
            for (auto& v : ents.data) v = rng.uniform(-1, 1);
            for (auto& v : rels.data) v = rng.uniform(-1, 1);
            const auto h = static_cast<uint32_t>(rng.below(ne));
            const auto t = static_cast<uint32_t>(rng.below(ne));
            const auto r = static_cast<uint32_t>(rng.below(2));
            const int label = rng.coin() ? 1 : -1;

            auto grads = kge::triple_gradients<double>(h, r, t, label, ents, rels);
            auto loss_at = [&]() {
                return kge::logistic_loss(
                    kge::score<double>(ents.row(h), rels.row(r), ents.row(t)), label);
            };
            const double eps = 1e-5;
            for (const auto& g : grads) {
                for (size_t col = 0; col < d; ++col) {
                    double& slot = g.is_relation ? rels.at(g.row, col) : ents.at(g.row, col);
                    const double saved = slot;
                    slot = saved + eps;
                    const double up = loss_at();
                    slot = saved - eps;
                    const double down = loss_at();
                    slot = saved;
                    const double numeric = (up - down) / (2 * eps);
                    ++checked;
                    if (!rel_ok(g.grad[col], numeric, 1e-4)) ++bad;
                }
            }
        }
        detail = std::to_string(checked) + " entries, " + std::to_string(bad) + " outside 1e-4";
        return bad == 0 && checked > 0;
    });

    run({2, "DistMult symmetry + score oracle", 1.0}, [](std::string& detail) {
        Rng rng(628);
        size_t asym = 0, off = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const size_t d = 1 + rng.below(16);
            std::vector<float> h(d), r(d), t(d);
            std::vector<double> hd(d), rd(d), td(d);
            for (size_t i = 0; i < d; ++i) {
                h[i] = static_cast<float>(rng.uniform(-2, 2));
                r[i] = static_cast<float>(rng.uniform(-2, 2));
                t[i] = static_cast<float>(rng.uniform(-2, 2));
                hd[i] = h[i];
                rd[i] = r[i];
                td[i] = t[i];
            }
            // exact endpoint symmetry, in both precisions
            const float fwd = kge::score<float>(std::span<const float>(h),
                                                std::span<const float>(r),
                                                std::span<const float>(t));
            const float rev = kge::score<float>(std::span<const float>(t),
                                                std::span<const float>(r),
                                                std::span<const float>(h));
            const double dfwd = kge::score<double>(std::span<const double>(hd),
                                                   std::span<const double>(rd),
                                                   std::span<const double>(td));
            const double drev = kge::score<double>(std::span<const double>(td),
                                                   std::span<const double>(rd),
                                                   std::span<const double>(hd));
            if (fwd != rev || dfwd != drev) ++asym;
            // brute-force elementwise oracle, both routes at 64-bit
            double want = 0;
            for (size_t i = 0; i < d; ++i) want += rd[i] * hd[i] * td[i];
            if (!rel_ok(dfwd, want, 1e-6)) ++off;
        }
        detail = std::to_string(asym) + " asymmetric, " + std::to_string(off) + " off-oracle";
        return asym == 0 && off == 0;
    });

    run({3, "synthetic link prediction", 60.0}, [&](std::string& detail) {
        linkpred_first = run_link_prediction();
        const auto& m = linkpred_first.trained;
        const auto& b = linkpred_first.random_baseline;
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "MRR %.3f (need >= 0.30), hits@10 %.3f (need >= 0.60); random MRR %.3f "
                      "vs MC %.3f+-%.3f",
                      m.mrr, m.hits10, b.mrr, linkpred_first.mc_mean, linkpred_first.mc_sd);
        detail = buf;
        const bool baseline_in_band =
            std::abs(b.mrr - linkpred_first.mc_mean) <= 4 * linkpred_first.mc_sd;
        return m.mrr >= 0.30 && m.hits10 >= 0.60 && baseline_in_band &&
               m.mrr > linkpred_first.mc_mean + 4 * linkpred_first.mc_sd;
    });

    run({4, "ESIM gradient + structure suite", 120.0}, [](std::string& detail) {
        using namespace esim;
        Rng rng(9001);
        std::string why;

        // finite differences, tiny dims, dropout off
        size_t checked = 0, bad = 0;
        for (int trial = 0; trial < 12; ++trial) {
            const size_t d = 2 + rng.below(2);
            Config config;
            config.input_dim = d;
            config.hidden = 2 + rng.below(2);
            config.dropout = 0.0;
            config.seed = 4000 + trial;
            Params params = init_params(config);
            std::vector<Example> exs;
            for (size_t i = 0; i < 1 + rng.below(2); ++i) {
                Example ex;
                ex.premise = Mat<float>(1 + rng.below(4), d);
                ex.hypothesis = Mat<float>(1 + rng.below(3), d);
                for (auto& v : ex.premise.data) v = static_cast<float>(rng.uniform(-1, 1));
                for (auto& v : ex.hypothesis.data) v = static_cast<float>(rng.uniform(-1, 1));
                ex.label = static_cast<Label>(rng.below(3));
                exs.push_back(std::move(ex));
            }
            auto batch = PaddedBatch::make(exs, 202, 20, 0);
            auto analytic = loss_and_backward(batch, params, config, true, 0);
            std::vector<std::span<double>> ps, gs;
            params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
                ps.push_back(s);
            });
            analytic.grads.for_each(
                [&](const std::string&, std::span<double> s, size_t, size_t) {
                    gs.push_back(s);
                });
            const double eps = 1e-5;
            for (size_t m = 0; m < ps.size(); ++m) {
                for (size_t i = 0; i < ps[m].size(); ++i) {
                    double& slot = ps[m][i];
                    const double saved = slot;
                    slot = saved + eps;
                    const double up = loss_and_backward(batch, params, config, false, 0).loss;
                    slot = saved - eps;
                    const double down = loss_and_backward(batch, params, config, false, 0).loss;
                    slot = saved;
                    ++checked;
                    if (!rel_ok(gs[m][i], (up - down) / (2 * eps), 1e-4)) ++bad;
                }
            }
        }
        if (bad) why += "fd:" + std::to_string(bad) + "/" + std::to_string(checked) + " ";

        // attention rows sum to 1 +- 1e-6 over unmasked entries
        {
            Mat<double> p(4, 6), h(3, 6);
            for (auto& v : p.data) v = rng.uniform(-2, 2);
            for (auto& v : h.data) v = rng.uniform(-2, 2);
            auto res = attend(p, 4, h, 3);
            // reconstruct weights from scores and check normalization
            for (size_t i = 0; i < 4; ++i) {
                double m = res.scores.at(i, 0);
                for (size_t j = 0; j < 3; ++j) m = std::max(m, res.scores.at(i, j));
                double z = 0;
                for (size_t j = 0; j < 3; ++j) z += std::exp(res.scores.at(i, j) - m);
                double sum = 0;
                for (size_t j = 0; j < 3; ++j) sum += std::exp(res.scores.at(i, j) - m) / z;
                if (std::abs(sum - 1.0) > 1e-6) why += "attn-row ";
            }
        }

        // padding invariance <= 1e-6
        {
            Config config;
            config.input_dim = 4;
            config.hidden = 3;
            config.dropout = 0.0;
            config.seed = 5;
            Params params = init_params(config);
            Example ex;
            ex.premise = Mat<float>(3, 4);
            ex.hypothesis = Mat<float>(2, 4);
            for (auto& v : ex.premise.data) v = static_cast<float>(rng.uniform(-1, 1));
            for (auto& v : ex.hypothesis.data) v = static_cast<float>(rng.uniform(-1, 1));
            std::vector<Example> exs = {ex};
            auto batch = PaddedBatch::make(exs, 202, 20, 0);
            auto base = loss_and_backward(batch, params, config, false, 0);
            PaddedBatch padded = batch;
            padded.t_premise += 3;
            padded.t_hyp += 2;
            padded.premise.assign(padded.t_premise * 4, 0.0);
            padded.hypothesis.assign(padded.t_hyp * 4, 0.0);
            for (size_t t = 0; t < 3; ++t) {
                for (size_t k = 0; k < 4; ++k) {
                    padded.premise[t * 4 + k] = batch.premise[t * 4 + k];
                }
            }
            for (size_t t = 0; t < 2; ++t) {
                for (size_t k = 0; k < 4; ++k) {
                    padded.hypothesis[t * 4 + k] = batch.hypothesis[t * 4 + k];
                }
            }
            auto inflated = loss_and_backward(padded, params, config, false, 0);
            if (std::abs(base.loss - inflated.loss) > 1e-6) why += "padding ";
        }

        // uniform predictor loss = ln 3 +- 1e-9
        {
            Config config;
            config.input_dim = 3;
            config.hidden = 2;
            config.dropout = 0.0;
            config.seed = 6;
            Params params = init_params(config);
            params.cls_w2.zero();
            params.cls_b2.assign(3, 0.0);
            Example ex;
            ex.premise = Mat<float>(2, 3);
            ex.hypothesis = Mat<float>(2, 3);
            for (auto& v : ex.premise.data) v = static_cast<float>(rng.uniform(-1, 1));
            for (auto& v : ex.hypothesis.data) v = static_cast<float>(rng.uniform(-1, 1));
            std::vector<Example> exs = {ex};
            auto batch = PaddedBatch::make(exs, 202, 20, 0);
            const double loss = loss_and_backward(batch, params, config, false, 0).loss;
            if (std::abs(loss - std::log(3.0)) > 1e-9) why += "ln3 ";
        }

        // overfit 8 fixed examples: loss < 0.05 within 500 steps, H = 16
        {
            Config config;
            config.input_dim = 6;
            config.hidden = 16;
            config.dropout = 0.0;
            config.learning_rate = 0.5;
            config.seed = 7;
            Params params = init_params(config);
            std::vector<Example> exs;
            Rng data_rng(88);
            for (int i = 0; i < 8; ++i) {
                Example ex;
                ex.premise = Mat<float>(3, 6);
                ex.hypothesis = Mat<float>(2, 6);
                for (auto& v : ex.premise.data) v = static_cast<float>(data_rng.uniform(-1, 1));
                for (auto& v : ex.hypothesis.data) {
                    v = static_cast<float>(data_rng.uniform(-1, 1));
                }
                ex.label = static_cast<Label>(data_rng.below(3));
                exs.push_back(std::move(ex));
            }
            auto batch = PaddedBatch::make(exs, 202, 20, 0);
            double loss = 1e9;
            int steps = 0;
            for (steps = 1; steps <= 500; ++steps) {
                auto r = loss_and_backward(batch, params, config, true, 0);
                loss = r.loss;
                if (loss < 0.05) break;
                double norm_sq = 0;
                r.grads.for_each([&](const std::string&, std::span<double> g, size_t, size_t) {
                    for (double v : g) norm_sq += v * v;
                });
                const double norm = std::sqrt(norm_sq);
                const double scale =
                    norm > config.clip_norm ? config.clip_norm / norm : 1.0;
                std::vector<std::span<double>> ps, gs;
                params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
                    ps.push_back(s);
                });
                r.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
                    gs.push_back(s);
                });
                for (size_t m = 0; m < ps.size(); ++m) {
                    for (size_t i = 0; i < ps[m].size(); ++i) {
                        ps[m][i] -= config.learning_rate * scale * gs[m][i];
                    }
                }
            }
            if (loss >= 0.05) {
                why += "overfit(loss " + std::to_string(loss) + ") ";
            } else {
                g_notes.push_back("overfit reached loss < 0.05 in " + std::to_string(steps) +
                                  " steps");
            }
        }

        detail = why.empty() ? std::to_string(checked) + " fd entries, all structure checks"
                             : why;
        return why.empty();
    });

    run({5, "KG-fusion ablation (flip 0)", 600.0}, [&](std::string& detail) {
        ablation_first = run_ablation_bundle(0.0);
        const double base = row_accuracy(ablation_first.report, "base");
        const double with_kg = row_accuracy(ablation_first.report, "w_kg");
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "base %.3f (need <= 0.55), w_kg %.3f (need >= base + 0.10)", base,
                      with_kg);
        detail = buf;
        return base <= 0.55 && with_kg >= base + 0.10;
    });

    run({6, "sentiment ablation (flip 0.5)", 600.0}, [](std::string& detail) {
        auto run6 = run_ablation_bundle(0.5);
        const double kg_flipped = flipped_subset_accuracy(run6, "w_kg");
        const double sent_flipped = flipped_subset_accuracy(run6, "w_kg_sentiment");
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "flipped subset: w_kg %.3f, w_kg_sentiment %.3f (need >= w_kg + 0.08)",
                      kg_flipped, sent_flipped);
        detail = buf;
        return sent_flipped >= kg_flipped + 0.08;
    });

    run({7, "annotation contract + fuzz", 30.0}, [](std::string& detail) {
        using namespace annotate;
        std::string why;
        std::istringstream lex_in(
            "blood clots\tC-BC\tC-THROMBUS\t5.2\n"
            "chest pain\tC-CP\tC-ANGINA\t7.0\n"
            "pain\tC-PAIN\tC-PAIN\t3.1\n");
        auto lexicon = ConceptLexicon::load(lex_in);
        auto triggers = TriggerList::defaults();

        {
            auto tokens = tokenize("blood clots");
            auto anns = match_concepts(tokens, lexicon);
            if (anns.size() != 1 || anns[0].concept_id != "C-THROMBUS" || anns[0].start != 0 ||
                anns[0].end != 2) {
                why += "thrombus ";
            }
        }
        {
            auto tokens = tokenize("chest pain");
            auto anns = match_concepts(tokens, lexicon);
            if (anns.size() != 1 || anns[0].concept_id != "C-ANGINA") why += "angina ";
        }
        {
            auto tokens = tokenize("The patient showed no signs of pain");
            auto anns = match_concepts(tokens, lexicon);
            detect_negation(tokens, anns, triggers);
            if (anns.size() != 1 || anns[0].concept_id != "C-PAIN" || !anns[0].negated) {
                why += "negation ";
            }
        }

        // alignment fuzz: 10,000 random sentences
        Rng rng(123456);
        const char* words[] = {"no",    "not",  "pain", "blood", "clots", "chest", "x1",
                               "y2",    "z3",   ".",    ",",     "(",     ")!",    "w/o",
                               "alpha", "beta", "the",  "and",   "q-t",   "..."};
        const size_t n_words = sizeof(words) / sizeof(words[0]);
        size_t failures = 0;
        for (int trial = 0; trial < 10000; ++trial) {
            std::string sentence;
            const size_t len = rng.below(14);
            for (size_t k = 0; k < len; ++k) {
                sentence += words[rng.below(n_words)];
                sentence += ' ';
            }
            auto tokens = tokenize(sentence);
            auto anns = match_concepts(tokens, lexicon);
            detect_negation(tokens, anns, triggers);
            auto aligned = align(tokens, anns);
            if (aligned.size() != tokens.size()) ++failures;
            size_t prev_end = 0;
            for (const auto& a : anns) {
                if (a.start < prev_end || a.end > tokens.size()) ++failures;
                prev_end = a.end;
            }
            size_t concept_tokens = 0;
            for (const auto& t : aligned) concept_tokens += t.concept_id.has_value();
            size_t span_cover = 0;
            for (const auto& a : anns) span_cover += a.end - a.start;
            if (concept_tokens != span_cover) ++failures;  // <= 1 concept per token
        }
        if (failures) why += std::to_string(failures) + " fuzz failures";
        detail = why.empty() ? "worked examples verbatim; 10,000 sentences, zero failures"
                             : why;
        return why.empty();
    });

    run({8, "determinism (repeat 3 and 5)", 900.0}, [&](std::string& detail) {
        std::string why;
        auto linkpred_again = run_link_prediction();
        if (linkpred_again.checkpoint != linkpred_first.checkpoint) why += "kge-checkpoint ";
        if (linkpred_again.trained.mrr != linkpred_first.trained.mrr) why += "kge-metrics ";

        auto ablation_again = run_ablation_bundle(0.0);
        const auto& b1 = ablation_first.bundle;
        const auto& b2 = ablation_again.bundle;
        if (b1.metathesaurus_tsv != b2.metathesaurus_tsv ||
            b1.semantic_network_tsv != b2.semantic_network_tsv ||
            b1.lexicon_tsv != b2.lexicon_tsv || b1.triggers_txt != b2.triggers_txt ||
            b1.vectors_txt != b2.vectors_txt) {
            why += "corpus-files ";
        }
        {
            std::ostringstream s1, s2;
            harness::write_jsonl(s1, b1.splits.train);
            harness::write_jsonl(s2, b2.splits.train);
            if (s1.str() != s2.str()) why += "corpus-train ";
        }
        if (ablation_first.report_csv != ablation_again.report_csv) why += "ablation-report ";
        if (predictions_line(ablation_first) != predictions_line(ablation_again)) {
            why += "ablation-predictions ";
        }
        detail = why.empty() ? "checkpoints, reports and corpora byte-identical" : why;
        return why.empty();
    });

    run({9, "hyperparameter fidelity", 60.0}, [](std::string& detail) {
        std::string why;
        const fs::path dir = kTmp / "criterion9";
        fs::remove_all(dir);
        fs::create_directories(dir);
        write_file((dir / "g.tsv").string(), "a\tr\tb\n");
        write_file((dir / "d.jsonl").string(),
                   "{\"sentence1\": \"a\", \"sentence2\": \"b\", \"gold_label\": \"neutral\"}\n");
        write_file((dir / "v.txt").string(), "a 0.1\nb 0.2\n");

        if (run_cli("train-kge --edgelist " + (dir / "g.tsv").string() + " --out " +
                    (dir / "kge.txt").string() + " --manifest " + (dir / "kge.json").string() +
                    " --dry-run") != 0) {
            why += "train-kge-exit ";
        }
        if (run_cli("train-nli --train " + (dir / "d.jsonl").string() + " --dev " +
                    (dir / "d.jsonl").string() + " --vectors " + (dir / "v.txt").string() +
                    " --out " + (dir / "m.txt").string() + " --manifest " +
                    (dir / "nli.json").string() + " --dry-run") != 0) {
            why += "train-nli-exit ";
        }
        if (why.empty()) {
            auto kge_manifest = nlohmann::json::parse(read_file((dir / "kge.json").string()));
            auto nli_manifest = nlohmann::json::parse(read_file((dir / "nli.json").string()));
            const auto& kc = kge_manifest["config"];
            if (kc["dim"] != 100 || kc["learning_rate"] != 1e-4 || kc["batch_size"] != 100) {
                why += "kge-defaults ";
            }
            const auto& nc = nli_manifest["config"];
            if (nc["hidden"] != 500 || nc["dropout"] != 0.5 || nc["learning_rate"] != 1e-3 ||
                nc["batch_size"] != 32 || nc["max_epochs"] != 64 || nc["patience"] != 5) {
                why += "esim-defaults ";
            }
        }
        detail = why.empty()
                     ? "dim 100, lr 1e-4, batch 100; H 500, dropout 0.5, lr 1e-3, batch 32, "
                       "epochs 64, patience 5"
                     : why;
        return why.empty();
    });

    for (const auto& note : g_notes) std::printf("note: %s\n", note.c_str());
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
