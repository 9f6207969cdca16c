#include "kgfuse/esim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "kgfuse/error.hpp"
#include "kgfuse/hash.hpp"
#include "kgfuse/kernels.hpp"
#include "kgfuse/rng.hpp"

namespace kgfuse::esim {

std::string_view label_name(Label l) {
    switch (l) {
        case Label::Entailment: return "entailment";
        case Label::Contradiction: return "contradiction";
        case Label::Neutral: return "neutral";
    }
    return "neutral";
}

Label label_from_name(std::string_view name) {
    if (name == "entailment") return Label::Entailment;
    if (name == "contradiction") return Label::Contradiction;
    if (name == "neutral") return Label::Neutral;
    fail("unknown gold label: '" + std::string(name) + "'");
}

void Config::validate() const {
    if (hidden == 0) fail_config("esim: hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail_config("esim: dropout must be in [0, 1)");
    if (patience == 0) fail_config("esim: patience must be >= 1");
    if (batch_size == 0) fail_config("esim: batch size must be >= 1");
    if (max_epochs == 0) fail_config("esim: max epochs must be >= 1");
    if (learning_rate < 0) fail_config("esim: learning rate must be >= 0");
    if (clip_norm <= 0) fail_config("esim: clip norm must be > 0");
    if (init_scale <= 0) fail_config("esim: init scale must be > 0");
}

Params Params::zeros(size_t input_dim, size_t hidden) {
    Params p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    const size_t h4 = 4 * hidden;
    auto make_cell = [&](size_t in) {
        return LstmCell{Mat<double>(h4, in), Mat<double>(h4, hidden),
                        std::vector<double>(h4, 0.0)};
    };
    p.encoder.fwd = make_cell(input_dim);
    p.encoder.bwd = make_cell(input_dim);
    p.composition.fwd = make_cell(hidden);
    p.composition.bwd = make_cell(hidden);
    p.proj_w = Mat<double>(hidden, 8 * hidden);
    p.proj_b.assign(hidden, 0.0);
    p.cls_w1 = Mat<double>(hidden, 8 * hidden);
    p.cls_b1.assign(hidden, 0.0);
    p.cls_w2 = Mat<double>(3, hidden);
    p.cls_b2.assign(3, 0.0);
    return p;
}

Params init_params(const Config& config) {
    config.validate();
    if (config.input_dim == 0) fail_config("init_params: input_dim must be set");
    Params p = Params::zeros(config.input_dim, config.hidden);
    Rng rng(derive_seed(config.seed, "esim-init"));
    auto fill = [&](std::span<double> w, size_t fan_in) {
        const double bound = config.init_scale / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w) v = rng.uniform(-bound, bound);
    };
    auto fill_cell = [&](LstmCell& c, size_t in) {
        fill(c.wx.flat(), in);
        fill(c.wh.flat(), config.hidden);
        // biases stay zero
    };
    fill_cell(p.encoder.fwd, config.input_dim);
    fill_cell(p.encoder.bwd, config.input_dim);
    fill_cell(p.composition.fwd, config.hidden);
    fill_cell(p.composition.bwd, config.hidden);
    fill(p.proj_w.flat(), 8 * config.hidden);
    fill(p.cls_w1.flat(), 8 * config.hidden);
    fill(p.cls_w2.flat(), config.hidden);
    return p;
}

namespace {

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Per-direction activation cache; rows at/past len stay zero.
struct LstmDirTrace {
    Mat<double> gi, gf, gg, go;  // T x H gate activations
    Mat<double> c, tc, h;        // cell, tanh(cell), hidden

    void resize(size_t t, size_t h_) {
        gi = Mat<double>(t, h_);
        gf = Mat<double>(t, h_);
        gg = Mat<double>(t, h_);
        go = Mat<double>(t, h_);
        c = Mat<double>(t, h_);
        tc = Mat<double>(t, h_);
        h = Mat<double>(t, h_);
    }
};

void lstm_dir_forward(const LstmCell& cell, const Mat<double>& x, size_t len, bool reverse,
                      size_t hidden, LstmDirTrace& tr) {
    const size_t h4 = 4 * hidden;
    std::vector<double> z(h4);
    std::vector<double> zero(hidden, 0.0);
    std::span<const double> h_prev(zero);
    std::span<const double> c_prev(zero);

    for (size_t step = 0; step < len; ++step) {
        const size_t t = reverse ? len - 1 - step : step;
        std::copy(cell.b.begin(), cell.b.end(), z.begin());
        kernels::matvec(cell.wx.flat(), h4, cell.wx.cols, x.row(t), std::span<double>(z));
        kernels::matvec(cell.wh.flat(), h4, hidden, h_prev, std::span<double>(z));
        auto gi = tr.gi.row(t);
        auto gf = tr.gf.row(t);
        auto gg = tr.gg.row(t);
        auto go = tr.go.row(t);
        auto c = tr.c.row(t);
        auto tc = tr.tc.row(t);
        auto h = tr.h.row(t);
        for (size_t k = 0; k < hidden; ++k) {
            gi[k] = sigmoid(z[k]);
            gf[k] = sigmoid(z[hidden + k]);
            gg[k] = std::tanh(z[2 * hidden + k]);
            go[k] = sigmoid(z[3 * hidden + k]);
            c[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
            tc[k] = std::tanh(c[k]);
            h[k] = go[k] * tc[k];
        }
        h_prev = tr.h.row(t);
        c_prev = tr.c.row(t);
    }
}

// dstates: T x H gradient w.r.t. this direction's hidden outputs. dx may be
// null (encoder level: inputs are data).
void lstm_dir_backward(const LstmCell& cell, const Mat<double>& x, size_t len, bool reverse,
                       size_t hidden, const LstmDirTrace& tr, const Mat<double>& dstates,
                       LstmCell& grad, Mat<double>* dx) {
    if (len == 0) return;
    const size_t h4 = 4 * hidden;
    std::vector<double> dh_carry(hidden, 0.0), dc_carry(hidden, 0.0);
    std::vector<double> dz(h4), dh(hidden);
    std::vector<double> zero(hidden, 0.0);

    for (size_t step = len; step-- > 0;) {
        const size_t t = reverse ? len - 1 - step : step;
        const bool first_step = step == 0;
        std::span<const double> h_prev =
            first_step ? std::span<const double>(zero)
                       : tr.h.row(reverse ? len - step : step - 1);
        std::span<const double> c_prev =
            first_step ? std::span<const double>(zero)
                       : tr.c.row(reverse ? len - step : step - 1);

        auto gi = tr.gi.row(t);
        auto gf = tr.gf.row(t);
        auto gg = tr.gg.row(t);
        auto go = tr.go.row(t);
        auto tc = tr.tc.row(t);
        auto ds = dstates.row(t);
        for (size_t k = 0; k < hidden; ++k) dh[k] = ds[k] + dh_carry[k];

        for (size_t k = 0; k < hidden; ++k) {
            const double dho = dh[k] * tc[k];
            dz[3 * hidden + k] = dho * go[k] * (1.0 - go[k]);
            const double dc = dc_carry[k] + dh[k] * go[k] * (1.0 - tc[k] * tc[k]);
            dz[k] = dc * gg[k] * gi[k] * (1.0 - gi[k]);
            dz[hidden + k] = dc * c_prev[k] * gf[k] * (1.0 - gf[k]);
            dz[2 * hidden + k] = dc * gi[k] * (1.0 - gg[k] * gg[k]);
            dc_carry[k] = dc * gf[k];
        }

        kernels::add(std::span<const double>(dz), std::span<double>(grad.b));
        kernels::ger(grad.wx.flat(), h4, cell.wx.cols, std::span<const double>(dz), x.row(t));
        kernels::ger(grad.wh.flat(), h4, hidden, std::span<const double>(dz), h_prev);
        if (dx) {
            kernels::matvec_t(cell.wx.flat(), h4, cell.wx.cols, std::span<const double>(dz),
                              dx->row(t));
        }
        std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
        kernels::matvec_t(cell.wh.flat(), h4, hidden, std::span<const double>(dz),
                          std::span<double>(dh_carry));
    }
}

// splits a T x 2H state gradient into per-direction T x H views
void split_state_grad(const Mat<double>& dstates, Mat<double>& dfwd, Mat<double>& dbwd,
                      size_t hidden) {
    for (size_t t = 0; t < dstates.rows; ++t) {
        auto src = dstates.row(t);
        std::copy(src.begin(), src.begin() + hidden, dfwd.row(t).begin());
        std::copy(src.begin() + hidden, src.end(), dbwd.row(t).begin());
    }
}

struct SideTrace {
    Mat<double> x;  // T x D
    size_t len = 0;
    LstmDirTrace enc_f, enc_b;
    Mat<double> enc_states;   // T x 2H pre-dropout
    Mat<double> enc_mask;     // dropout multipliers, empty when eval
    Mat<double> enc_dropped;  // post-dropout (== enc_states in eval)
    Mat<double> aligned;      // T x 2H
    Mat<double> enh_m;        // T x 8H concat input
    Mat<double> enh_out;      // T x H
    LstmDirTrace comp_f, comp_b;
    Mat<double> comp_states;
    Mat<double> comp_mask;
    Mat<double> comp_dropped;
    std::vector<size_t> argmax;          // 2H
    std::vector<double> vmax, vavg;      // 2H each
};

struct PairTrace {
    SideTrace p, h;
    Mat<double> alpha;  // Tp x Th (rows softmaxed)
    Mat<double> beta;   // Tp x Th (cols softmaxed)
    std::vector<double> feature;  // 8H
    std::vector<double> u;        // H
    std::array<double, 3> probs{};
};

Mat<double> concat_states(const LstmDirTrace& f, const LstmDirTrace& b, size_t len,
                          size_t rows, size_t hidden) {
    Mat<double> out(rows, 2 * hidden);
    for (size_t t = 0; t < len; ++t) {
        auto dst = out.row(t);
        auto hf = f.h.row(t);
        auto hb = b.h.row(t);
        std::copy(hf.begin(), hf.end(), dst.begin());
        std::copy(hb.begin(), hb.end(), dst.begin() + hidden);
    }
    return out;
}

void apply_dropout(const Mat<double>& in, size_t len, double rate, Rng& rng, Mat<double>& mask,
                   Mat<double>& out) {
    out = Mat<double>(in.rows, in.cols);
    mask = Mat<double>(in.rows, in.cols);
    const double keep_inv = 1.0 / (1.0 - rate);
    for (size_t t = 0; t < len; ++t) {
        auto src = in.row(t);
        auto m = mask.row(t);
        auto dst = out.row(t);
        for (size_t k = 0; k < in.cols; ++k) {
            m[k] = rng.next_unit() < rate ? 0.0 : keep_inv;
            dst[k] = src[k] * m[k];
        }
    }
}

void encode_side(SideTrace& side, const Params& params, const Config& config, bool training,
                 Rng* dropout_rng) {
    const size_t hidden = params.hidden;
    const size_t rows = side.x.rows;
    side.enc_f.resize(rows, hidden);
    side.enc_b.resize(rows, hidden);
    lstm_dir_forward(params.encoder.fwd, side.x, side.len, false, hidden, side.enc_f);
    lstm_dir_forward(params.encoder.bwd, side.x, side.len, true, hidden, side.enc_b);
    side.enc_states = concat_states(side.enc_f, side.enc_b, side.len, rows, hidden);
    if (training && config.dropout > 0.0) {
        apply_dropout(side.enc_states, side.len, config.dropout, *dropout_rng, side.enc_mask,
                      side.enc_dropped);
    } else {
        side.enc_dropped = side.enc_states;
    }
}

void enhance_side(SideTrace& side, const Params& params) {
    const size_t hidden = params.hidden;
    const size_t two_h = 2 * hidden;
    const size_t rows = side.enc_dropped.rows;
    side.enh_m = Mat<double>(rows, 8 * hidden);
    side.enh_out = Mat<double>(rows, hidden);
    for (size_t t = 0; t < side.len; ++t) {
        auto a = side.enc_dropped.row(t);
        auto al = side.aligned.row(t);
        auto m = side.enh_m.row(t);
        for (size_t k = 0; k < two_h; ++k) {
            m[k] = a[k];
            m[two_h + k] = al[k];
            m[2 * two_h + k] = a[k] - al[k];
            m[3 * two_h + k] = a[k] * al[k];
        }
        auto out = side.enh_out.row(t);
        std::copy(params.proj_b.begin(), params.proj_b.end(), out.begin());
        kernels::matvec(params.proj_w.flat(), hidden, 8 * hidden, m, out);
        for (double& v : out) v = std::tanh(v);
    }
}

void compose_side(SideTrace& side, const Params& params, const Config& config, bool training,
                  Rng* dropout_rng) {
    const size_t hidden = params.hidden;
    const size_t rows = side.enh_out.rows;
    side.comp_f.resize(rows, hidden);
    side.comp_b.resize(rows, hidden);
    lstm_dir_forward(params.composition.fwd, side.enh_out, side.len, false, hidden, side.comp_f);
    lstm_dir_forward(params.composition.bwd, side.enh_out, side.len, true, hidden, side.comp_b);
    side.comp_states = concat_states(side.comp_f, side.comp_b, side.len, rows, hidden);
    if (training && config.dropout > 0.0) {
        apply_dropout(side.comp_states, side.len, config.dropout, *dropout_rng, side.comp_mask,
                      side.comp_dropped);
    } else {
        side.comp_dropped = side.comp_states;
    }
}

void pool_side(SideTrace& side, size_t hidden) {
    if (side.len == 0) fail("empty sequence");
    const size_t two_h = 2 * hidden;
    side.argmax.assign(two_h, 0);
    side.vmax.assign(two_h, -std::numeric_limits<double>::infinity());
    side.vavg.assign(two_h, 0.0);
    for (size_t t = 0; t < side.len; ++t) {
        auto v = side.comp_dropped.row(t);
        for (size_t k = 0; k < two_h; ++k) {
            if (v[k] > side.vmax[k]) {
                side.vmax[k] = v[k];
                side.argmax[k] = t;
            }
            side.vavg[k] += v[k];
        }
    }
    const double inv = 1.0 / static_cast<double>(side.len);
    for (double& v : side.vavg) v *= inv;
}

void attend_pair(PairTrace& tr, size_t hidden) {
    const size_t two_h = 2 * hidden;
    const size_t lp = tr.p.len, lh = tr.h.len;
    tr.alpha = Mat<double>(lp, lh);
    tr.beta = Mat<double>(lp, lh);
    Mat<double> scores(lp, lh);
    for (size_t i = 0; i < lp; ++i) {
        for (size_t j = 0; j < lh; ++j) {
            scores.at(i, j) = kernels::dot(tr.p.enc_dropped.row(i), tr.h.enc_dropped.row(j));
        }
    }
    // row softmax -> alpha, column softmax -> beta (stable, subtract max)
    for (size_t i = 0; i < lp; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < lh; ++j) m = std::max(m, scores.at(i, j));
        double z = 0.0;
        for (size_t j = 0; j < lh; ++j) z += std::exp(scores.at(i, j) - m);
        for (size_t j = 0; j < lh; ++j) tr.alpha.at(i, j) = std::exp(scores.at(i, j) - m) / z;
    }
    for (size_t j = 0; j < lh; ++j) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < lp; ++i) m = std::max(m, scores.at(i, j));
        double z = 0.0;
        for (size_t i = 0; i < lp; ++i) z += std::exp(scores.at(i, j) - m);
        for (size_t i = 0; i < lp; ++i) tr.beta.at(i, j) = std::exp(scores.at(i, j) - m) / z;
    }
    tr.p.aligned = Mat<double>(tr.p.enc_dropped.rows, two_h);
    tr.h.aligned = Mat<double>(tr.h.enc_dropped.rows, two_h);
    for (size_t i = 0; i < lp; ++i) {
        auto dst = tr.p.aligned.row(i);
        for (size_t j = 0; j < lh; ++j) {
            kernels::axpy(tr.alpha.at(i, j), tr.h.enc_dropped.row(j), dst);
        }
    }
    for (size_t j = 0; j < lh; ++j) {
        auto dst = tr.h.aligned.row(j);
        for (size_t i = 0; i < lp; ++i) {
            kernels::axpy(tr.beta.at(i, j), tr.p.enc_dropped.row(i), dst);
        }
    }
}

std::array<double, 3> softmax3(const std::array<double, 3>& logits) {
    const double m = std::max({logits[0], logits[1], logits[2]});
    std::array<double, 3> e{std::exp(logits[0] - m), std::exp(logits[1] - m),
                            std::exp(logits[2] - m)};
    const double z = e[0] + e[1] + e[2];
    return {e[0] / z, e[1] / z, e[2] / z};
}

void classify_pair(PairTrace& tr, const Params& params) {
    const size_t hidden = params.hidden;
    const size_t two_h = 2 * hidden;
    tr.feature.assign(8 * hidden, 0.0);
    std::copy(tr.p.vmax.begin(), tr.p.vmax.end(), tr.feature.begin());
    std::copy(tr.p.vavg.begin(), tr.p.vavg.end(), tr.feature.begin() + two_h);
    std::copy(tr.h.vmax.begin(), tr.h.vmax.end(), tr.feature.begin() + 2 * two_h);
    std::copy(tr.h.vavg.begin(), tr.h.vavg.end(), tr.feature.begin() + 3 * two_h);

    tr.u.assign(hidden, 0.0);
    std::copy(params.cls_b1.begin(), params.cls_b1.end(), tr.u.begin());
    kernels::matvec(params.cls_w1.flat(), hidden, 8 * hidden,
                    std::span<const double>(tr.feature), std::span<double>(tr.u));
    for (double& v : tr.u) v = std::tanh(v);

    std::array<double, 3> logits{params.cls_b2[0], params.cls_b2[1], params.cls_b2[2]};
    std::vector<double> lg(3, 0.0);
    kernels::matvec(params.cls_w2.flat(), 3, hidden, std::span<const double>(tr.u),
                    std::span<double>(lg));
    for (int k = 0; k < 3; ++k) logits[k] += lg[k];
    tr.probs = softmax3(logits);
}

void forward_pair(PairTrace& tr, const Params& params, const Config& config, bool training,
                  Rng* dropout_rng) {
    encode_side(tr.p, params, config, training, dropout_rng);
    encode_side(tr.h, params, config, training, dropout_rng);
    if (tr.p.len == 0 || tr.h.len == 0) fail("empty sequence");
    attend_pair(tr, params.hidden);
    enhance_side(tr.p, params);
    enhance_side(tr.h, params);
    compose_side(tr.p, params, config, training, dropout_rng);
    compose_side(tr.h, params, config, training, dropout_rng);
    pool_side(tr.p, params.hidden);
    pool_side(tr.h, params.hidden);
    classify_pair(tr, params);
}

// backward from d(feature slice) through pooling and composition dropout
void pool_backward(const SideTrace& side, std::span<const double> dmax,
                   std::span<const double> davg, Mat<double>& dcomp_dropped) {
    const double inv = 1.0 / static_cast<double>(side.len);
    for (size_t k = 0; k < dmax.size(); ++k) {
        dcomp_dropped.at(side.argmax[k], k) += dmax[k];
        for (size_t t = 0; t < side.len; ++t) dcomp_dropped.at(t, k) += davg[k] * inv;
    }
}

void side_backward_composition(SideTrace& side, const Params& params, Params& grads,
                               const Mat<double>& dcomp_dropped, Mat<double>& denh_out) {
    const size_t hidden = params.hidden;
    const size_t rows = side.comp_states.rows;
    Mat<double> dcomp_states(rows, 2 * hidden);
    if (side.comp_mask.data.empty()) {
        dcomp_states = dcomp_dropped;
    } else {
        for (size_t t = 0; t < side.len; ++t) {
            kernels::hadamard(dcomp_dropped.row(t), side.comp_mask.row(t),
                              dcomp_states.row(t));
        }
    }
    Mat<double> dfwd(rows, hidden), dbwd(rows, hidden);
    split_state_grad(dcomp_states, dfwd, dbwd, hidden);
    lstm_dir_backward(params.composition.fwd, side.enh_out, side.len, false, hidden, side.comp_f,
                      dfwd, grads.composition.fwd, &denh_out);
    lstm_dir_backward(params.composition.bwd, side.enh_out, side.len, true, hidden, side.comp_b,
                      dbwd, grads.composition.bwd, &denh_out);
}

void side_backward_enhance(SideTrace& side, const Params& params, Params& grads,
                           const Mat<double>& denh_out, Mat<double>& denc_dropped,
                           Mat<double>& daligned) {
    const size_t hidden = params.hidden;
    const size_t two_h = 2 * hidden;
    std::vector<double> dz(hidden), dm(8 * hidden);
    for (size_t t = 0; t < side.len; ++t) {
        auto out = side.enh_out.row(t);
        auto dout = denh_out.row(t);
        for (size_t k = 0; k < hidden; ++k) dz[k] = dout[k] * (1.0 - out[k] * out[k]);
        kernels::add(std::span<const double>(dz), std::span<double>(grads.proj_b));
        kernels::ger(grads.proj_w.flat(), hidden, 8 * hidden, std::span<const double>(dz),
                     side.enh_m.row(t));
        std::fill(dm.begin(), dm.end(), 0.0);
        kernels::matvec_t(params.proj_w.flat(), hidden, 8 * hidden, std::span<const double>(dz),
                          std::span<double>(dm));
        auto a = side.enc_dropped.row(t);
        auto al = side.aligned.row(t);
        auto da = denc_dropped.row(t);
        auto dal = daligned.row(t);
        for (size_t k = 0; k < two_h; ++k) {
            da[k] += dm[k] + dm[2 * two_h + k] + dm[3 * two_h + k] * al[k];
            dal[k] += dm[two_h + k] - dm[2 * two_h + k] + dm[3 * two_h + k] * a[k];
        }
    }
}

void attention_backward(PairTrace& tr, const Mat<double>& dp_aligned,
                        const Mat<double>& dh_aligned, Mat<double>& dp_states,
                        Mat<double>& dh_states) {
    const size_t lp = tr.p.len, lh = tr.h.len;
    Mat<double> de(lp, lh);

    // through p_aligned_i = sum_j alpha_ij h_j
    for (size_t i = 0; i < lp; ++i) {
        auto dpa = dp_aligned.row(i);
        double weighted = 0.0;
        std::vector<double> dalpha(lh);
        for (size_t j = 0; j < lh; ++j) {
            dalpha[j] = kernels::dot(dpa, tr.h.enc_dropped.row(j));
            kernels::axpy(tr.alpha.at(i, j), dpa, dh_states.row(j));
            weighted += tr.alpha.at(i, j) * dalpha[j];
        }
        for (size_t j = 0; j < lh; ++j) {
            de.at(i, j) += tr.alpha.at(i, j) * (dalpha[j] - weighted);
        }
    }
    // through h_aligned_j = sum_i beta_ij p_i
    for (size_t j = 0; j < lh; ++j) {
        auto dha = dh_aligned.row(j);
        double weighted = 0.0;
        std::vector<double> dbeta(lp);
        for (size_t i = 0; i < lp; ++i) {
            dbeta[i] = kernels::dot(dha, tr.p.enc_dropped.row(i));
            kernels::axpy(tr.beta.at(i, j), dha, dp_states.row(i));
            weighted += tr.beta.at(i, j) * dbeta[i];
        }
        for (size_t i = 0; i < lp; ++i) {
            de.at(i, j) += tr.beta.at(i, j) * (dbeta[i] - weighted);
        }
    }
    // through e_ij = dot(p_i, h_j)
    for (size_t i = 0; i < lp; ++i) {
        for (size_t j = 0; j < lh; ++j) {
            const double g = de.at(i, j);
            if (g == 0.0) continue;
            kernels::axpy(g, tr.h.enc_dropped.row(j), dp_states.row(i));
            kernels::axpy(g, tr.p.enc_dropped.row(i), dh_states.row(j));
        }
    }
}

void side_backward_encoder(SideTrace& side, const Params& params, Params& grads,
                           const Mat<double>& denc_dropped) {
    const size_t hidden = params.hidden;
    const size_t rows = side.enc_states.rows;
    Mat<double> denc_states(rows, 2 * hidden);
    if (side.enc_mask.data.empty()) {
        denc_states = denc_dropped;
    } else {
        for (size_t t = 0; t < side.len; ++t) {
            kernels::hadamard(denc_dropped.row(t), side.enc_mask.row(t), denc_states.row(t));
        }
    }
    Mat<double> dfwd(rows, hidden), dbwd(rows, hidden);
    split_state_grad(denc_states, dfwd, dbwd, hidden);
    lstm_dir_backward(params.encoder.fwd, side.x, side.len, false, hidden, side.enc_f, dfwd,
                      grads.encoder.fwd, nullptr);
    lstm_dir_backward(params.encoder.bwd, side.x, side.len, true, hidden, side.enc_b, dbwd,
                      grads.encoder.bwd, nullptr);
}

// loss and gradient contribution of one example, scaled by `weight`
double backward_pair(PairTrace& tr, const Params& params, Params& grads, Label gold,
                     double weight) {
    const size_t hidden = params.hidden;
    const size_t two_h = 2 * hidden;
    const double loss = -std::log(tr.probs[static_cast<int>(gold)]);

    std::array<double, 3> dlogits = tr.probs;
    dlogits[static_cast<int>(gold)] -= 1.0;
    for (double& v : dlogits) v *= weight;

    // classifier
    std::vector<double> du(hidden, 0.0);
    for (int k = 0; k < 3; ++k) grads.cls_b2[k] += dlogits[k];
    kernels::ger(grads.cls_w2.flat(), 3, hidden, std::span<const double>(dlogits.data(), 3),
                 std::span<const double>(tr.u));
    kernels::matvec_t(params.cls_w2.flat(), 3, hidden,
                      std::span<const double>(dlogits.data(), 3), std::span<double>(du));
    std::vector<double> dz1(hidden);
    for (size_t k = 0; k < hidden; ++k) dz1[k] = du[k] * (1.0 - tr.u[k] * tr.u[k]);
    kernels::add(std::span<const double>(dz1), std::span<double>(grads.cls_b1));
    kernels::ger(grads.cls_w1.flat(), hidden, 8 * hidden, std::span<const double>(dz1),
                 std::span<const double>(tr.feature));
    std::vector<double> dfeat(8 * hidden, 0.0);
    kernels::matvec_t(params.cls_w1.flat(), hidden, 8 * hidden, std::span<const double>(dz1),
                      std::span<double>(dfeat));

    // pooling
    auto dview = [&](size_t off) { return std::span<const double>(dfeat.data() + off, two_h); };
    Mat<double> dcomp_p(tr.p.comp_dropped.rows, two_h);
    Mat<double> dcomp_h(tr.h.comp_dropped.rows, two_h);
    pool_backward(tr.p, dview(0), dview(two_h), dcomp_p);
    pool_backward(tr.h, dview(2 * two_h), dview(3 * two_h), dcomp_h);

    // composition BiLSTM
    Mat<double> denh_p(tr.p.enh_out.rows, hidden), denh_h(tr.h.enh_out.rows, hidden);
    side_backward_composition(tr.p, params, grads, dcomp_p, denh_p);
    side_backward_composition(tr.h, params, grads, dcomp_h, denh_h);

    // enhancement
    Mat<double> denc_p(tr.p.enc_dropped.rows, two_h), denc_h(tr.h.enc_dropped.rows, two_h);
    Mat<double> dal_p(tr.p.aligned.rows, two_h), dal_h(tr.h.aligned.rows, two_h);
    side_backward_enhance(tr.p, params, grads, denh_p, denc_p, dal_p);
    side_backward_enhance(tr.h, params, grads, denh_h, denc_h, dal_h);

    // attention
    attention_backward(tr, dal_p, dal_h, denc_p, denc_h);

    // encoder BiLSTM
    side_backward_encoder(tr.p, params, grads, denc_p);
    side_backward_encoder(tr.h, params, grads, denc_h);

    return loss;
}

// zips two parameter sets' buffers in the fixed for_each order
template <typename Fn>
void zip_params(Params& a, Params& b, Fn&& fn) {
    std::vector<std::span<double>> sa, sb;
    a.for_each([&](const std::string&, std::span<double> s, size_t, size_t) { sa.push_back(s); });
    b.for_each([&](const std::string&, std::span<double> s, size_t, size_t) { sb.push_back(s); });
    for (size_t i = 0; i < sa.size(); ++i) fn(sa[i], sb[i]);
}

Mat<double> example_to_mat(const PaddedBatch& batch, size_t b, bool premise) {
    const size_t t_max = premise ? batch.t_premise : batch.t_hyp;
    Mat<double> x(t_max, batch.dim);
    for (size_t t = 0; t < t_max; ++t) {
        auto src = premise ? batch.premise_row(b, t) : batch.hyp_row(b, t);
        std::copy(src.begin(), src.end(), x.row(t).begin());
    }
    return x;
}

}  // namespace

Mat<double> bilstm_forward(const Mat<double>& x, size_t len, const BiLstm& cells,
                           size_t hidden) {
    if (len > x.rows) fail_config("bilstm_forward: mask longer than sequence");
    if (x.rows > 0 && cells.fwd.wx.cols != x.cols) {
        fail_config("bilstm_forward: input width does not match cell");
    }
    LstmDirTrace f, b;
    f.resize(x.rows, hidden);
    b.resize(x.rows, hidden);
    lstm_dir_forward(cells.fwd, x, len, false, hidden, f);
    lstm_dir_forward(cells.bwd, x, len, true, hidden, b);
    return concat_states(f, b, len, x.rows, hidden);
}

AttendResult attend(const Mat<double>& p_states, size_t len_p, const Mat<double>& h_states,
                    size_t len_h) {
    if (p_states.cols != h_states.cols) fail_config("attend: state widths differ");
    PairTrace tr;
    tr.p.enc_dropped = p_states;
    tr.p.len = len_p;
    tr.h.enc_dropped = h_states;
    tr.h.len = len_h;
    attend_pair(tr, p_states.cols / 2);
    AttendResult out;
    out.p_aligned = std::move(tr.p.aligned);
    out.h_aligned = std::move(tr.h.aligned);
    out.scores = Mat<double>(len_p, len_h);
    for (size_t i = 0; i < len_p; ++i) {
        for (size_t j = 0; j < len_h; ++j) {
            out.scores.at(i, j) = kernels::dot(p_states.row(i), h_states.row(j));
        }
    }
    return out;
}

Mat<double> enhance(const Mat<double>& a, const Mat<double>& a_aligned, size_t len,
                    const Mat<double>& proj_w, std::span<const double> proj_b) {
    if (a.cols != a_aligned.cols || proj_w.cols != 4 * a.cols ||
        proj_w.rows != proj_b.size() || proj_w.rows * 2 != a.cols) {
        fail_config("enhance: inconsistent shapes");
    }
    SideTrace side;
    side.enc_dropped = a;
    side.aligned = a_aligned;
    side.len = len;
    Params p;
    p.hidden = proj_w.rows;
    p.proj_w = proj_w;
    p.proj_b.assign(proj_b.begin(), proj_b.end());
    enhance_side(side, p);
    return std::move(side.enh_out);
}

std::vector<double> compose_and_pool(const Mat<double>& enhanced_p, size_t len_p,
                                     const Mat<double>& enhanced_h, size_t len_h,
                                     const BiLstm& comp, size_t hidden) {
    if (len_p == 0 || len_h == 0) fail("empty sequence");
    Params params;
    params.hidden = hidden;
    params.composition = comp;
    Config config;  // dropout unused (eval path)
    SideTrace p, h;
    p.enh_out = enhanced_p;
    p.len = len_p;
    h.enh_out = enhanced_h;
    h.len = len_h;
    compose_side(p, params, config, false, nullptr);
    compose_side(h, params, config, false, nullptr);
    pool_side(p, hidden);
    pool_side(h, hidden);
    std::vector<double> feature(8 * hidden, 0.0);
    const size_t two_h = 2 * hidden;
    std::copy(p.vmax.begin(), p.vmax.end(), feature.begin());
    std::copy(p.vavg.begin(), p.vavg.end(), feature.begin() + two_h);
    std::copy(h.vmax.begin(), h.vmax.end(), feature.begin() + 2 * two_h);
    std::copy(h.vavg.begin(), h.vavg.end(), feature.begin() + 3 * two_h);
    return feature;
}

std::array<double, 3> classify(std::span<const double> features, const Mat<double>& w1,
                               std::span<const double> b1, const Mat<double>& w2,
                               std::span<const double> b2) {
    if (w1.cols != features.size() || w1.rows != b1.size() || w2.cols != w1.rows ||
        w2.rows != 3 || b2.size() != 3) {
        fail_config("classify: inconsistent shapes");
    }
    PairTrace tr;
    Params p;
    p.hidden = w1.rows;
    p.cls_w1 = w1;
    p.cls_b1.assign(b1.begin(), b1.end());
    p.cls_w2 = w2;
    p.cls_b2.assign(b2.begin(), b2.end());
    tr.feature.assign(features.begin(), features.end());
    tr.u.assign(p.hidden, 0.0);
    std::copy(p.cls_b1.begin(), p.cls_b1.end(), tr.u.begin());
    kernels::matvec(p.cls_w1.flat(), p.hidden, w1.cols, features, std::span<double>(tr.u));
    for (double& v : tr.u) v = std::tanh(v);
    std::array<double, 3> logits{p.cls_b2[0], p.cls_b2[1], p.cls_b2[2]};
    std::vector<double> lg(3, 0.0);
    kernels::matvec(p.cls_w2.flat(), 3, p.hidden, std::span<const double>(tr.u),
                    std::span<double>(lg));
    for (int k = 0; k < 3; ++k) logits[k] += lg[k];
    return softmax3(logits);
}

PaddedBatch PaddedBatch::make(std::span<const Example> examples, size_t cap_premise,
                              size_t cap_hyp, uint64_t base_index, size_t* truncated) {
    PaddedBatch b;
    b.batch = examples.size();
    b.base_index = base_index;
    if (examples.empty()) return b;
    b.dim = examples[0].premise.cols;
    size_t cut = 0;
    for (const auto& ex : examples) {
        if (ex.premise.cols != b.dim || ex.hypothesis.cols != b.dim) {
            fail_config("batch: examples have differing widths");
        }
        const size_t lp = std::min(ex.premise.rows, cap_premise);
        const size_t lh = std::min(ex.hypothesis.rows, cap_hyp);
        cut += (ex.premise.rows > cap_premise) + (ex.hypothesis.rows > cap_hyp);
        b.premise_len.push_back(lp);
        b.hyp_len.push_back(lh);
        b.labels.push_back(ex.label);
        b.t_premise = std::max(b.t_premise, lp);
        b.t_hyp = std::max(b.t_hyp, lh);
    }
    b.premise.assign(b.batch * b.t_premise * b.dim, 0.0);
    b.hypothesis.assign(b.batch * b.t_hyp * b.dim, 0.0);
    for (size_t i = 0; i < b.batch; ++i) {
        for (size_t t = 0; t < b.premise_len[i]; ++t) {
            auto src = examples[i].premise.row(t);
            double* dst = b.premise.data() + (i * b.t_premise + t) * b.dim;
            for (size_t k = 0; k < b.dim; ++k) dst[k] = src[k];
        }
        for (size_t t = 0; t < b.hyp_len[i]; ++t) {
            auto src = examples[i].hypothesis.row(t);
            double* dst = b.hypothesis.data() + (i * b.t_hyp + t) * b.dim;
            for (size_t k = 0; k < b.dim; ++k) dst[k] = src[k];
        }
    }
    if (truncated) *truncated += cut;
    return b;
}

LossResult loss_and_backward(const PaddedBatch& batch, const Params& params,
                             const Config& config, bool training, uint64_t dropout_seed) {
    if (batch.batch == 0) fail_config("loss_and_backward: empty batch");
    if (batch.dim != params.input_dim) fail_config("loss_and_backward: width mismatch");

    LossResult result;
    result.grads = Params::zeros(params.input_dim, params.hidden);
    const double weight = 1.0 / static_cast<double>(batch.batch);

    auto run_example = [&](size_t i, Params& grads) -> double {
        PairTrace tr;
        tr.p.x = example_to_mat(batch, i, true);
        tr.p.len = batch.premise_len[i];
        tr.h.x = example_to_mat(batch, i, false);
        tr.h.len = batch.hyp_len[i];
        Rng dropout_rng(mix64(dropout_seed + (batch.base_index + i) * 0x9e3779b97f4a7c15ULL));
        forward_pair(tr, params, config, training, &dropout_rng);
        return backward_pair(tr, params, grads, batch.labels[i], weight);
    };

    const size_t nthreads = std::min<size_t>(config.threads ? config.threads : 1, batch.batch);
    if (nthreads <= 1) {
        double total = 0.0;
        for (size_t i = 0; i < batch.batch; ++i) total += run_example(i, result.grads);
        result.loss = total * weight;
    } else {
        std::vector<Params> partial;
        partial.reserve(nthreads);
        for (size_t w = 0; w < nthreads; ++w) {
            partial.push_back(Params::zeros(params.input_dim, params.hidden));
        }
        std::vector<double> losses(nthreads, 0.0);
        std::vector<std::thread> workers;
        const size_t chunk = (batch.batch + nthreads - 1) / nthreads;
        for (size_t w = 0; w < nthreads; ++w) {
            const size_t lo = w * chunk;
            const size_t hi = std::min(batch.batch, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back([&, lo, hi, w] {
                for (size_t i = lo; i < hi; ++i) losses[w] += run_example(i, partial[w]);
            });
        }
        for (auto& t : workers) t.join();
        double total = 0.0;
        for (size_t w = 0; w < nthreads; ++w) {
            total += losses[w];
            zip_params(partial[w], result.grads, [](std::span<double> g, std::span<double> dst) {
                kernels::add(std::span<const double>(g), dst);
            });
        }
        result.loss = total * weight;
    }
    return result;
}

bool EarlyStopping::update(size_t epoch, double dev_loss) {
    if (!seen_any_ || dev_loss < best_loss_) {
        seen_any_ = true;
        best_loss_ = dev_loss;
        best_epoch_ = epoch;
        since_best_ = 0;
        return false;
    }
    ++since_best_;
    return since_best_ >= patience_;
}

namespace {

// dev set forward-only metrics
std::pair<double, double> evaluate(std::span<const Example> dev, const Params& params,
                                   const Config& config) {
    double loss = 0.0;
    size_t correct = 0;
    for (const auto& ex : dev) {
        const auto pred = predict(ex.premise, ex.hypothesis, params, config);
        loss += -std::log(pred.probabilities[static_cast<int>(ex.label)]);
        if (pred.label == ex.label) ++correct;
    }
    return {loss / static_cast<double>(dev.size()),
            static_cast<double>(correct) / static_cast<double>(dev.size())};
}

}  // namespace

TrainOutput train_nli(std::span<const Example> train, std::span<const Example> dev,
                      Config config) {
    if (train.empty() || dev.empty()) fail_config("train_nli: empty split");
    if (config.input_dim == 0) config.input_dim = train[0].premise.cols;
    config.validate();
    for (const auto& ex : train) {
        if (ex.premise.cols != config.input_dim || ex.hypothesis.cols != config.input_dim) {
            fail_config("train_nli: example width does not match input_dim");
        }
    }

    Params params = init_params(config);
    Params best = params;
    TrainReport report;
    EarlyStopping stopper(config.patience);
    Rng order_rng(derive_seed(config.seed, "esim-order"));
    const uint64_t dropout_stream = derive_seed(config.seed, "esim-dropout");

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<Example> batch_buf;

    for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        const uint64_t epoch_dropout = mix64(dropout_stream + epoch);

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);
            batch_buf.clear();
            for (size_t k = start; k < end; ++k) batch_buf.push_back(train[order[k]]);
            PaddedBatch batch = PaddedBatch::make(batch_buf, config.max_premise_len,
                                                  config.max_hyp_len, start, &report.truncated);
            LossResult lr = loss_and_backward(batch, params, config, true, epoch_dropout);

            // global-norm clip
            double norm_sq = 0.0;
            lr.grads.for_each([&](const std::string&, std::span<double> g, size_t, size_t) {
                norm_sq += kernels::dot(std::span<const double>(g), std::span<const double>(g));
            });
            const double norm = std::sqrt(norm_sq);
            const double scale =
                norm > config.clip_norm && norm > 0 ? config.clip_norm / norm : 1.0;

            const double step = -config.learning_rate * scale;
            zip_params(lr.grads, params, [step](std::span<double> g, std::span<double> dst) {
                kernels::axpy(step, std::span<const double>(g), dst);
            });

            epoch_loss += lr.loss * static_cast<double>(batch.batch);
            seen += batch.batch;
        }

        report.train_loss.push_back(epoch_loss / static_cast<double>(seen));
        auto [dev_loss, dev_acc] = evaluate(dev, params, config);
        report.dev_loss.push_back(dev_loss);
        report.dev_accuracy.push_back(dev_acc);
        report.stopped_at = epoch;

        const bool stop = stopper.update(epoch, dev_loss);
        if (stopper.improved()) best = params;
        if (stop) break;
    }
    report.best_epoch = stopper.best_epoch();
    return {std::move(best), std::move(report)};
}

Prediction predict(const Mat<float>& premise, const Mat<float>& hypothesis,
                   const Params& params, const Config& config) {
    if (premise.cols != params.input_dim || hypothesis.cols != params.input_dim) {
        fail_config("predict: input width does not match model");
    }
    PairTrace tr;
    tr.p.x = Mat<double>(std::min(premise.rows, config.max_premise_len), premise.cols);
    for (size_t t = 0; t < tr.p.x.rows; ++t) {
        auto src = premise.row(t);
        auto dst = tr.p.x.row(t);
        for (size_t k = 0; k < premise.cols; ++k) dst[k] = src[k];
    }
    tr.p.len = tr.p.x.rows;
    tr.h.x = Mat<double>(std::min(hypothesis.rows, config.max_hyp_len), hypothesis.cols);
    for (size_t t = 0; t < tr.h.x.rows; ++t) {
        auto src = hypothesis.row(t);
        auto dst = tr.h.x.row(t);
        for (size_t k = 0; k < hypothesis.cols; ++k) dst[k] = src[k];
    }
    tr.h.len = tr.h.x.rows;

    forward_pair(tr, params, config, false, nullptr);

    Prediction out;
    out.probabilities = tr.probs;
    int best = 0;
    for (int k = 1; k < 3; ++k) {
        if (tr.probs[k] > tr.probs[best]) best = k;  // ties keep the lower index
    }
    out.label = static_cast<Label>(best);
    return out;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
    out << "epoch,train_loss,dev_loss,dev_accuracy\n";
    char buf[128];
    for (size_t i = 0; i < report.train_loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", i + 1, report.train_loss[i],
                      report.dev_loss[i], report.dev_accuracy[i]);
        out << buf;
    }
}

void save_checkpoint(std::ostream& out, const Params& params, const Config& config) {
    out << "esim 1\n";
    out << "config input_dim " << params.input_dim << " hidden " << params.hidden << " dropout "
        << config.dropout << " learning_rate " << config.learning_rate << " batch_size "
        << config.batch_size << " max_epochs " << config.max_epochs << " patience "
        << config.patience << " clip_norm " << config.clip_norm << " init_scale "
        << config.init_scale << " max_premise_len "
        << config.max_premise_len << " max_hyp_len " << config.max_hyp_len << "\n";
    char buf[40];
    params.for_each([&](const std::string& name, std::span<const double> values, size_t rows,
                        size_t cols) {
        out << "matrix " << name << ' ' << rows << ' ' << cols << '\n';
        for (size_t i = 0; i < values.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
            out << buf << ((i + 1) % cols == 0 ? '\n' : ' ');
        }
    });
}

CheckpointData load_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "esim" || version != 1) {
        fail("esim checkpoint: bad header");
    }
    CheckpointData data;
    std::string key;
    if (!(in >> key) || key != "config") fail("esim checkpoint: missing config echo");
    auto read_kv = [&](const char* expect, auto& field) {
        std::string k;
        if (!(in >> k >> field) || k != expect) {
            fail(std::string("esim checkpoint: expected config key ") + expect);
        }
    };
    read_kv("input_dim", data.config.input_dim);
    read_kv("hidden", data.config.hidden);
    read_kv("dropout", data.config.dropout);
    read_kv("learning_rate", data.config.learning_rate);
    read_kv("batch_size", data.config.batch_size);
    read_kv("max_epochs", data.config.max_epochs);
    read_kv("patience", data.config.patience);
    read_kv("clip_norm", data.config.clip_norm);
    read_kv("init_scale", data.config.init_scale);
    read_kv("max_premise_len", data.config.max_premise_len);
    read_kv("max_hyp_len", data.config.max_hyp_len);

    data.params = Params::zeros(data.config.input_dim, data.config.hidden);
    data.params.for_each([&](const std::string& name, std::span<double> values, size_t rows,
                             size_t cols) {
        std::string kind, got;
        size_t r = 0, c = 0;
        if (!(in >> kind >> got >> r >> c) || kind != "matrix") {
            fail("esim checkpoint: missing matrix header for " + name);
        }
        if (got != name || r != rows || c != cols) {
            fail("esim checkpoint: shape mismatch for " + name + " (got " + got + " " +
                 std::to_string(r) + "x" + std::to_string(c) + ")");
        }
        for (double& v : values) {
            if (!(in >> v)) fail("esim checkpoint: truncated values for " + name);
            if (!std::isfinite(v)) fail("esim checkpoint: non-finite value in " + name);
        }
    });
    return data;
}

}  // namespace kgfuse::esim
