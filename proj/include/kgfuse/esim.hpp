#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgfuse/mat.hpp"

// ESIM sentence-pair classifier, built from scratch with analytic gradients:
// shared BiLSTM encoder, soft-align pairwise attention, enhancement
// projection, composition BiLSTM, max+avg pooling, and a 3-way softmax head.
// All arithmetic is 64-bit; inputs arrive as 32-bit fused rows and are
// widened at the batch boundary.
namespace kgfuse::esim {

enum class Label : int { Entailment = 0, Contradiction = 1, Neutral = 2 };

std::string_view label_name(Label l);
Label label_from_name(std::string_view name);  // throws Error on unknown labels

struct Config {
    size_t input_dim = 0;  // D; 0 = adopt from training data
    size_t hidden = 500;   // H
    double dropout = 0.5;
    double learning_rate = 1e-3;
    size_t batch_size = 32;
    size_t max_epochs = 64;
    size_t patience = 5;
    uint64_t seed = 0;
    double clip_norm = 5.0;
    double init_scale = 3.0;  // weights uniform +-init_scale/sqrt(fan_in)
    size_t max_premise_len = 202;
    size_t max_hyp_len = 20;
    size_t threads = 1;  // >1 = intra-batch parallel grads (not bit-reproducible)

    void validate() const;  // throws ConfigError
};

// One LSTM direction: gates packed [input; forget; candidate; output].
struct LstmCell {
    Mat<double> wx;         // 4H x input
    Mat<double> wh;         // 4H x H
    std::vector<double> b;  // 4H
};

struct BiLstm {
    LstmCell fwd;
    LstmCell bwd;
};

struct Params {
    size_t input_dim = 0;
    size_t hidden = 0;
    BiLstm encoder;      // shared between premise and hypothesis
    BiLstm composition;  // input H
    Mat<double> proj_w;  // H x 8H
    std::vector<double> proj_b;
    Mat<double> cls_w1;  // H x 8H
    std::vector<double> cls_b1;
    Mat<double> cls_w2;  // 3 x H
    std::vector<double> cls_b2;

    static Params zeros(size_t input_dim, size_t hidden);

    // Visits every parameter buffer in a fixed order (clipping, updates,
    // serialization and the finite-difference tests all rely on it).
    template <typename Fn>
    void for_each(Fn&& fn) {
        visit(*this, fn);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        visit(*this, fn);
    }

private:
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn& fn) {
        auto cell = [&](auto& c, std::string_view base) {
            fn(std::string(base) + "_wx", c.wx.flat(), c.wx.rows, c.wx.cols);
            fn(std::string(base) + "_wh", c.wh.flat(), c.wh.rows, c.wh.cols);
            fn(std::string(base) + "_b", std::span(c.b), size_t{1}, c.b.size());
        };
        cell(self.encoder.fwd, "enc_fwd");
        cell(self.encoder.bwd, "enc_bwd");
        cell(self.composition.fwd, "comp_fwd");
        cell(self.composition.bwd, "comp_bwd");
        fn("proj_w", self.proj_w.flat(), self.proj_w.rows, self.proj_w.cols);
        fn("proj_b", std::span(self.proj_b), size_t{1}, self.proj_b.size());
        fn("cls_w1", self.cls_w1.flat(), self.cls_w1.rows, self.cls_w1.cols);
        fn("cls_b1", std::span(self.cls_b1), size_t{1}, self.cls_b1.size());
        fn("cls_w2", self.cls_w2.flat(), self.cls_w2.rows, self.cls_w2.cols);
        fn("cls_b2", std::span(self.cls_b2), size_t{1}, self.cls_b2.size());
    }
};

// Weights uniform in +-init_scale/sqrt(fan_in), biases zero; draw order is
// fixed so a seed pins every parameter bit. The default scale of 3 is what a
// plain-SGD run needs to leave the zero-signal plateau at small widths.
Params init_params(const Config& config);

// A fused premise/hypothesis pair ready for the classifier.
struct Example {
    Mat<float> premise;     // Tp x D
    Mat<float> hypothesis;  // Th x D
    Label label = Label::Neutral;
};

// Dense padded view of a batch; padded rows are zero and lengths are the
// prefix masks.
struct PaddedBatch {
    size_t batch = 0;
    size_t t_premise = 0;
    size_t t_hyp = 0;
    size_t dim = 0;
    std::vector<double> premise;    // batch * t_premise * dim
    std::vector<double> hypothesis; // batch * t_hyp * dim
    std::vector<size_t> premise_len;
    std::vector<size_t> hyp_len;
    std::vector<Label> labels;
    uint64_t base_index = 0;  // global index of example 0 (dropout substreams)

    std::span<const double> premise_row(size_t b, size_t t) const {
        return {premise.data() + (b * t_premise + t) * dim, dim};
    }
    std::span<const double> hyp_row(size_t b, size_t t) const {
        return {hypothesis.data() + (b * t_hyp + t) * dim, dim};
    }

    // Truncates sequences beyond the caps and counts how many were cut.
    static PaddedBatch make(std::span<const Example> examples, size_t cap_premise,
                            size_t cap_hyp, uint64_t base_index, size_t* truncated = nullptr);
};

// --- forward building blocks (also used standalone in tests) ---

// Concatenated forward/backward hidden states, T x 2H; rows at and past `len`
// stay zero and the recurrence never advances over them.
Mat<double> bilstm_forward(const Mat<double>& x, size_t len, const BiLstm& cells,
                           size_t hidden);

struct AttendResult {
    Mat<double> scores;     // Tp x Th dot products (valid region only)
    Mat<double> p_aligned;  // Tp x 2H
    Mat<double> h_aligned;  // Th x 2H
};

AttendResult attend(const Mat<double>& p_states, size_t len_p, const Mat<double>& h_states,
                    size_t len_h);

// tanh(proj_w [a; a~; a - a~; a (.) a~] + proj_b) per position.
Mat<double> enhance(const Mat<double>& a, const Mat<double>& a_aligned, size_t len,
                    const Mat<double>& proj_w, std::span<const double> proj_b);

// Composition BiLSTM then [max_p; avg_p; max_h; avg_h] over unmasked
// positions; a fully-masked sequence throws Error("empty sequence").
std::vector<double> compose_and_pool(const Mat<double>& enhanced_p, size_t len_p,
                                     const Mat<double>& enhanced_h, size_t len_h,
                                     const BiLstm& comp, size_t hidden);

// Hidden tanh layer then stable softmax; sums to 1, entries > 0.
std::array<double, 3> classify(std::span<const double> features, const Mat<double>& w1,
                               std::span<const double> b1, const Mat<double>& w2,
                               std::span<const double> b2);

// --- training ---

struct LossResult {
    double loss = 0.0;  // mean cross-entropy over the batch
    Params grads;       // same shapes as the model
};

// Reverse-mode gradients through the full graph. Inverted dropout on the
// encoder and composition outputs when `training`; each example's mask stream
// is seeded by (dropout_seed, base_index + position) so batch partitioning
// cannot change the masks.
LossResult loss_and_backward(const PaddedBatch& batch, const Params& params,
                             const Config& config, bool training, uint64_t dropout_seed);

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> dev_loss;
    std::vector<double> dev_accuracy;
    size_t stopped_at = 0;   // epochs actually run (1-based)
    size_t best_epoch = 0;   // 1-based epoch the returned params come from
    size_t truncated = 0;    // sequences cut to the length caps
};

void write_report_csv(std::ostream& out, const TrainReport& report);

// Tracks dev loss; stops after `patience` consecutive epochs without strict
// improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(size_t patience) : patience_(patience) {}
    // returns true when training should stop after this epoch
    bool update(size_t epoch, double dev_loss);
    size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }
    bool improved() const { return since_best_ == 0; }

private:
    size_t patience_;
    size_t best_epoch_ = 0;
    size_t since_best_ = 0;
    double best_loss_ = 0.0;
    bool seen_any_ = false;
};

struct TrainOutput {
    Params params;  // from the best dev-loss epoch
    TrainReport report;
};

// Mini-batch SGD with global-norm clipping and dev-loss early stopping.
// Empty splits throw ConfigError.
TrainOutput train_nli(std::span<const Example> train, std::span<const Example> dev,
                      Config config);

struct Prediction {
    Label label = Label::Entailment;
    std::array<double, 3> probabilities{};
};

// Dropout disabled; argmax with ties toward the lower class index
// (entailment < contradiction < neutral). Width mismatch throws ConfigError.
Prediction predict(const Mat<float>& premise, const Mat<float>& hypothesis,
                   const Params& params, const Config& config);

// Text checkpoint: config echo plus every matrix with a shape header; load
// validates shapes. Values are %.17g (lossless for doubles).
void save_checkpoint(std::ostream& out, const Params& params, const Config& config);

struct CheckpointData {
    Params params;
    Config config;
};

CheckpointData load_checkpoint(std::istream& in);

}  // namespace kgfuse::esim
