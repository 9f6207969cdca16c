#include "kgfuse/kge.hpp"

#include "kgfuse/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace kgfuse::kge {

EmbeddingTable init_embeddings(size_t entity_count, size_t relation_count,
                               const TrainConfig& config) {
    if (entity_count == 0 || relation_count == 0) {
        fail_config("init_embeddings: entity and relation counts must be >= 1");
    }
    if (config.dim == 0) fail_config("init_embeddings: dim must be >= 1");
    EmbeddingTable table;
    table.entities = Mat<float>(entity_count, config.dim);
    table.relations = Mat<float>(relation_count, config.dim);
    const double s = config.init_scale / std::sqrt(static_cast<double>(config.dim));
    Rng rng(config.seed);
    for (float& v : table.entities.data) v = static_cast<float>(rng.uniform(-s, s));
    for (float& v : table.relations.data) v = static_cast<float>(rng.uniform(-s, s));
    return table;
}

void negative_samples(const kg::IndexedTriple& positive, size_t entity_count, size_t k, Rng& rng,
                      std::vector<kg::IndexedTriple>& out) {
    if (entity_count < 2) fail_config("negative_samples: need at least 2 entities");
    for (size_t n = 0; n < k; ++n) {
        kg::IndexedTriple neg = positive;
        const bool corrupt_head = rng.coin();
        const uint32_t old_entity = corrupt_head ? neg.head : neg.tail;
        // uniform over the other entity_count-1 entities
        uint32_t pick = static_cast<uint32_t>(rng.below(entity_count - 1));
        if (pick >= old_entity) ++pick;
        (corrupt_head ? neg.head : neg.tail) = pick;
        out.push_back(neg);
    }
}

namespace {

// One (possibly corrupted) training sample.
struct Sample {
    kg::IndexedTriple triple;
    int label;  // +1 positive, -1 negative
};

struct BatchGrads {
    std::unordered_map<uint32_t, std::vector<float>> entity;
    std::unordered_map<uint32_t, std::vector<float>> relation;
    double loss_sum = 0.0;

    void accumulate(const kg::IndexedTriple& t, int label, const EmbeddingTable& table) {
        auto eh = table.entities.row(t.head);
        auto er = table.relations.row(t.relation);
        auto et = table.entities.row(t.tail);
        const float sigma = score<float>(eh, er, et);
        loss_sum += logistic_loss(static_cast<double>(sigma), label);
        const float s = loss_dsigma(sigma, label);
        const size_t d = table.dim();
        auto row_of = [d](std::unordered_map<uint32_t, std::vector<float>>& m,
                          uint32_t idx) -> std::span<float> {
            auto [it, _] = m.try_emplace(idx, d, 0.0f);
            return std::span<float>(it->second);
        };
        kernels::add_scaled_product(s, er, et, row_of(entity, t.head));
        kernels::add_scaled_product(s, er, eh, row_of(entity, t.tail));
        kernels::add_scaled_product(s, eh, et, row_of(relation, t.relation));
    }

    void merge(const BatchGrads& o) {
        loss_sum += o.loss_sum;
        for (const auto& [idx, g] : o.entity) {
            auto [it, fresh] = entity.try_emplace(idx, g);
            if (!fresh) kernels::add(std::span<const float>(g), std::span<float>(it->second));
        }
        for (const auto& [idx, g] : o.relation) {
            auto [it, fresh] = relation.try_emplace(idx, g);
            if (!fresh) kernels::add(std::span<const float>(g), std::span<float>(it->second));
        }
    }
};

void renormalize_rows(Mat<float>& m, const std::vector<uint32_t>& rows) {
    for (uint32_t r : rows) {
        auto row = m.row(r);
        const float norm = kernels::l2norm(std::span<const float>(row));
        if (norm > 0.0f) kernels::scale(1.0f / norm, row);
    }
}

}  // namespace

TrainResult train(const std::vector<kg::IndexedTriple>& triples, size_t entity_count,
                  size_t relation_count, const TrainConfig& config) {
    if (triples.empty()) fail("empty graph");
    if (config.learning_rate < 0) fail_config("train: learning rate must be >= 0");
    if (config.batch_size == 0 || config.negatives == 0) {
        fail_config("train: batch size and negatives must be >= 1");
    }
    for (const auto& t : triples) {
        if (t.head >= entity_count || t.tail >= entity_count || t.relation >= relation_count) {
            fail_config("train: triple index out of range");
        }
    }

    TrainResult result;
    result.table = init_embeddings(entity_count, relation_count, config);
    EmbeddingTable& table = result.table;

    if (config.renormalize) {
        std::vector<uint32_t> all(entity_count);
        std::iota(all.begin(), all.end(), 0u);
        renormalize_rows(table.entities, all);
    }

    Rng order_rng(derive_seed(config.seed, "kge-order"));
    Rng negative_rng(derive_seed(config.seed, "kge-negatives"));
    const float lr = static_cast<float>(config.learning_rate);

    std::vector<size_t> order(triples.size());
    std::iota(order.begin(), order.end(), size_t{0});

    const size_t nthreads =
        config.parallel ? std::max<size_t>(1, config.threads ? config.threads
                                                             : std::thread::hardware_concurrency())
                        : 1;

    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t epoch_samples = 0;

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);

            // negatives drawn sequentially so the sample list is identical in
            // parallel mode; only summation order differs there
            std::vector<Sample> samples;
            samples.reserve((end - start) * (1 + config.negatives));
            std::vector<kg::IndexedTriple> negs;
            for (size_t k = start; k < end; ++k) {
                const kg::IndexedTriple& pos = triples[order[k]];
                samples.push_back({pos, +1});
                negs.clear();
                negative_samples(pos, entity_count, config.negatives, negative_rng, negs);
                for (const auto& n : negs) samples.push_back({n, -1});
            }

            BatchGrads grads;
            if (nthreads <= 1 || samples.size() < 2 * nthreads) {
                for (const Sample& s : samples) grads.accumulate(s.triple, s.label, table);
            } else {
                std::vector<BatchGrads> partial(nthreads);
                std::vector<std::thread> workers;
                const size_t chunk = (samples.size() + nthreads - 1) / nthreads;
                for (size_t w = 0; w < nthreads; ++w) {
                    const size_t lo = w * chunk;
                    const size_t hi = std::min(samples.size(), lo + chunk);
                    if (lo >= hi) break;
                    workers.emplace_back([&, lo, hi, w] {
                        for (size_t k = lo; k < hi; ++k) {
                            partial[w].accumulate(samples[k].triple, samples[k].label, table);
                        }
                    });
                }
                for (auto& t : workers) t.join();
                for (const auto& p : partial) grads.merge(p);
            }

            epoch_loss += grads.loss_sum;
            epoch_samples += samples.size();

            // exclusive-write application; mean-of-batch scaling
            const float step = -lr / static_cast<float>(samples.size());
            std::vector<uint32_t> touched;
            touched.reserve(grads.entity.size());
            for (auto& [row, g] : grads.entity) {
                kernels::axpy(step, std::span<const float>(g), table.entities.row(row));
                touched.push_back(row);
            }
            for (auto& [row, g] : grads.relation) {
                kernels::axpy(step, std::span<const float>(g), table.relations.row(row));
            }
            if (config.renormalize) {
                // untouched rows are already unit norm; fix only the updated ones
                std::sort(touched.begin(), touched.end());
                renormalize_rows(table.entities, touched);
            }
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_samples));
    }
    return result;
}

namespace {

// packed (h, r, t) key; counts checked at build time
uint64_t pack_key(uint32_t h, uint32_t r, uint32_t t) {
    return (static_cast<uint64_t>(h) << 42) | (static_cast<uint64_t>(r) << 21) |
           static_cast<uint64_t>(t);
}

size_t rank_of(std::span<const float> scores, uint32_t truth,
               const std::unordered_set<uint64_t>& known, uint32_t h, uint32_t r,
               bool tail_query) {
    const float s_true = scores[truth];
    size_t rank = 1;
    for (uint32_t cand = 0; cand < scores.size(); ++cand) {
        if (cand == truth) continue;
        const uint64_t key = tail_query ? pack_key(h, r, cand) : pack_key(cand, r, h);
        if (known.count(key)) continue;  // filtered ranking
        if (scores[cand] > s_true || (scores[cand] == s_true && cand < truth)) ++rank;
    }
    return rank;
}

}  // namespace

LinkPredMetrics evaluate_link_prediction(const EmbeddingTable& table,
                                         const std::vector<kg::IndexedTriple>& test,
                                         const std::vector<kg::IndexedTriple>& known) {
    if (test.empty()) fail_config("evaluate_link_prediction: empty test set");
    const size_t num_entities = table.entities.rows;
    if (num_entities >= (1u << 21) || table.relations.rows >= (1u << 21)) {
        fail("evaluate_link_prediction: vocabulary too large for packed filter keys");
    }
    for (const auto& t : test) {
        if (t.head >= num_entities || t.tail >= num_entities || t.relation >= table.relations.rows) {
            fail_config("evaluate_link_prediction: test triple index out of range");
        }
    }

    std::unordered_set<uint64_t> known_keys;
    known_keys.reserve(known.size() * 2);
    for (const auto& t : known) known_keys.insert(pack_key(t.head, t.relation, t.tail));

    const size_t d = table.dim();
    std::vector<float> weighted(d);
    std::vector<float> scores(num_entities);
    LinkPredMetrics m;
    double mrr_sum = 0.0;
    size_t h1 = 0, h3 = 0, h10 = 0;

    auto run_query = [&](uint32_t fixed_entity, uint32_t rel, uint32_t truth, bool tail_query) {
        kernels::hadamard(std::span<const float>(table.entities.row(fixed_entity)),
                          std::span<const float>(table.relations.row(rel)),
                          std::span<float>(weighted));
        std::fill(scores.begin(), scores.end(), 0.0f);
        kernels::matvec(table.entities.flat(), num_entities, d, std::span<const float>(weighted),
                        std::span<float>(scores));
        const size_t rank =
            rank_of(scores, truth, known_keys, fixed_entity, rel, tail_query);
        mrr_sum += 1.0 / static_cast<double>(rank);
        if (rank <= 1) ++h1;
        if (rank <= 3) ++h3;
        if (rank <= 10) ++h10;
    };

    for (const auto& t : test) {
        run_query(t.head, t.relation, t.tail, /*tail_query=*/true);
        run_query(t.tail, t.relation, t.head, /*tail_query=*/false);
    }

    m.queries = test.size() * 2;
    m.mrr = mrr_sum / static_cast<double>(m.queries);
    m.hits1 = static_cast<double>(h1) / static_cast<double>(m.queries);
    m.hits3 = static_cast<double>(h3) / static_cast<double>(m.queries);
    m.hits10 = static_cast<double>(h10) / static_cast<double>(m.queries);
    return m;
}

namespace {

bool has_whitespace(const std::string& s) {
    return s.find_first_of(" \t\r\n\v\f") != std::string::npos;
}

void write_row(std::ostream& out, const std::string& id, std::span<const float> row) {
    if (id.empty() || has_whitespace(id)) {
        fail("checkpoint identifiers must be non-empty and whitespace-free: '" + id + "'");
    }
    out << id;
    char buf[32];
    for (float v : row) {
        std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(v));
        out << buf;
    }
    out << '\n';
}

}  // namespace

void save_checkpoint(std::ostream& out, const EmbeddingTable& table, const kg::Vocab& entities,
                     const kg::Vocab& relations) {
    if (entities.size() != table.entities.rows || relations.size() != table.relations.rows) {
        fail_config("save_checkpoint: vocab sizes do not match table");
    }
    out << "distmult " << entities.size() << ' ' << relations.size() << ' ' << table.dim() << '\n';
    for (size_t i = 0; i < entities.size(); ++i) write_row(out, entities.name(i), table.entities.row(i));
    for (size_t i = 0; i < relations.size(); ++i) write_row(out, relations.name(i), table.relations.row(i));
}

Checkpoint load_checkpoint(std::istream& in) {
    std::string magic;
    size_t ne = 0, nr = 0, d = 0;
    if (!(in >> magic >> ne >> nr >> d) || magic != "distmult") {
        fail("checkpoint: bad header (expected `distmult <entities> <relations> <dim>`)");
    }
    if (ne == 0 || nr == 0 || d == 0) fail("checkpoint: zero-sized table");

    Checkpoint cp;
    cp.table.entities = Mat<float>(ne, d);
    cp.table.relations = Mat<float>(nr, d);
    std::vector<std::string> ent_ids(ne), rel_ids(nr);

    auto read_rows = [&](Mat<float>& m, std::vector<std::string>& ids) {
        for (size_t i = 0; i < m.rows; ++i) {
            if (!(in >> ids[i])) fail("checkpoint: truncated (row " + std::to_string(i) + ")");
            auto row = m.row(i);
            for (size_t j = 0; j < m.cols; ++j) {
                if (!(in >> row[j])) fail("checkpoint: truncated values for id " + ids[i]);
                if (!std::isfinite(row[j])) fail("checkpoint: non-finite value for id " + ids[i]);
            }
        }
    };
    read_rows(cp.table.entities, ent_ids);
    read_rows(cp.table.relations, rel_ids);

    // vocab order must match row order; identifiers are stored sorted
    for (size_t i = 1; i < ent_ids.size(); ++i) {
        if (!(ent_ids[i - 1] < ent_ids[i])) fail("checkpoint: entity ids not sorted/unique");
    }
    for (size_t i = 1; i < rel_ids.size(); ++i) {
        if (!(rel_ids[i - 1] < rel_ids[i])) fail("checkpoint: relation ids not sorted/unique");
    }
    cp.entities = kg::Vocab::from_identifiers(ent_ids);
    cp.relations = kg::Vocab::from_identifiers(rel_ids);
    return cp;
}

void write_loss_csv(std::ostream& out, const std::vector<double>& epoch_loss) {
    out << "epoch,mean_loss\n";
    char buf[40];
    for (size_t i = 0; i < epoch_loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, epoch_loss[i]);
        out << buf;
    }
}

}  // namespace kgfuse::kge
