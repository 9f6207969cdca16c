#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "kgfuse/error.hpp"
#include "kgfuse/kernels.hpp"
#include "kgfuse/kg_store.hpp"
#include "kgfuse/mat.hpp"
#include "kgfuse/rng.hpp"

// DistMult embeddings: a triple (h, r, t) is scored as sum_i r_i*h_i*t_i and
// trained with logistic loss over uniformly corrupted negatives, plain SGD.
// Training storage is 32-bit; score/loss/gradient routines are templated so
// tests can run them at 64-bit for finite-difference checks.
namespace kgfuse::kge {

struct TrainConfig {
    size_t dim = 100;
    double learning_rate = 1e-4;
    size_t batch_size = 100;
    size_t epochs = 50;
    size_t negatives = 1;  // corrupted triples per positive
    uint64_t seed = 0;
    bool renormalize = false;  // keep entity rows at unit L2 after each update
    double init_scale = 1.0;   // entries drawn from +-init_scale/sqrt(dim)
    bool parallel = false;     // forfeits bit-reproducibility
    size_t threads = 0;        // 0 = hardware concurrency (parallel mode only)
};

struct EmbeddingTable {
    Mat<float> entities;   // num_entities x dim
    Mat<float> relations;  // num_relations x dim
    size_t dim() const { return entities.cols; }
};

// Uniform in [-s, s] with s = init_scale/sqrt(dim); bit-identical for a fixed
// seed. Zero counts throw ConfigError.
EmbeddingTable init_embeddings(size_t entity_count, size_t relation_count,
                               const TrainConfig& config);

template <typename T>
T score(std::span<const T> h, std::span<const T> r, std::span<const T> t) {
    if (h.size() != r.size() || r.size() != t.size()) {
        fail_config("score: dimension mismatch");
    }
    // (h*t)*r per element: endpoint entries multiply first, so swapping h and
    // t gives the identical float sequence (exact symmetry)
    return kernels::dot3(h, t, r);
}

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(-y*sigma)) via the overflow-free softplus branch. label is +-1.
template <typename T>
T logistic_loss(T sigma, int label) {
    const T x = -static_cast<T>(label) * sigma;  // softplus argument
    if (x > T(0)) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// d loss / d sigma = -y * sigmoid(-y*sigma)
template <typename T>
T loss_dsigma(T sigma, int label) {
    return static_cast<T>(-label * sigmoid(-double(label) * double(sigma)));
}

template <typename T>
struct RowGrad {
    bool is_relation = false;
    uint32_t row = 0;
    std::vector<T> grad;
};

// Gradient of logistic_loss(score(h,r,t), label) w.r.t. the three embedding
// rows. Self-loops (head == tail) return one entity record holding the summed
// head+tail contribution. Indices out of range throw ConfigError.
template <typename T>
std::vector<RowGrad<T>> triple_gradients(uint32_t h, uint32_t r, uint32_t t, int label,
                                         const Mat<T>& entities, const Mat<T>& relations) {
    if (h >= entities.rows || t >= entities.rows || r >= relations.rows) {
        fail_config("triple_gradients: index out of range");
    }
    const size_t d = entities.cols;
    auto eh = entities.row(h);
    auto er = relations.row(r);
    auto et = entities.row(t);
    const T s = loss_dsigma(score<T>(eh, er, et), label);

    std::vector<RowGrad<T>> out;
    RowGrad<T> gr{true, r, std::vector<T>(d, T{})};
    kernels::add_scaled_product(s, eh, et, std::span<T>(gr.grad));
    if (h == t) {
        // self-loop: head and tail contributions collapse into one row
        RowGrad<T> ge{false, h, std::vector<T>(d, T{})};
        kernels::add_scaled_product(s, er, et, std::span<T>(ge.grad));
        kernels::add_scaled_product(s, er, eh, std::span<T>(ge.grad));
        out.push_back(std::move(ge));
        out.push_back(std::move(gr));
    } else {
        RowGrad<T> gh{false, h, std::vector<T>(d, T{})};
        kernels::add_scaled_product(s, er, et, std::span<T>(gh.grad));
        out.push_back(std::move(gh));
        out.push_back(std::move(gr));
        RowGrad<T> gt{false, t, std::vector<T>(d, T{})};
        kernels::add_scaled_product(s, er, eh, std::span<T>(gt.grad));
        out.push_back(std::move(gt));
    }
    return out;
}

// k corruptions of `positive`: fair coin picks head or tail, replacement drawn
// uniformly from the other entities. Throws ConfigError if entity_count < 2.
void negative_samples(const kg::IndexedTriple& positive, size_t entity_count, size_t k, Rng& rng,
                      std::vector<kg::IndexedTriple>& out);

struct TrainResult {
    EmbeddingTable table;
    std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

TrainResult train(const std::vector<kg::IndexedTriple>& triples, size_t entity_count,
                  size_t relation_count, const TrainConfig& config);

struct LinkPredMetrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    size_t queries = 0;  // 2 per evaluated triple (head + tail direction)
};

// Filtered ranking over all entities, both directions, ties broken toward the
// lower entity index. `known` lists every true triple to filter out (it should
// include the test triples themselves). Empty test set throws ConfigError.
LinkPredMetrics evaluate_link_prediction(const EmbeddingTable& table,
                                         const std::vector<kg::IndexedTriple>& test,
                                         const std::vector<kg::IndexedTriple>& known);

// Text checkpoint: `distmult <entities> <relations> <dim>` header, then one
// row per entity and per relation in vocab order, 9-significant-digit values
// (lossless for 32-bit floats).
void save_checkpoint(std::ostream& out, const EmbeddingTable& table, const kg::Vocab& entities,
                     const kg::Vocab& relations);

struct Checkpoint {
    EmbeddingTable table;
    kg::Vocab entities;
    kg::Vocab relations;
};

Checkpoint load_checkpoint(std::istream& in);

void write_loss_csv(std::ostream& out, const std::vector<double>& epoch_loss);

}  // namespace kgfuse::kge
