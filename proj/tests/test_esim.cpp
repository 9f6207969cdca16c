// ESIM tests. The reference oracles here (straight-line LSTM recurrence,
// brute-force attention, finite differences) are written independently of the
// implementation path they check.
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "kgfuse/error.hpp"
#include "kgfuse/esim.hpp"
#include "kgfuse/rng.hpp"

using namespace kgfuse;
using namespace kgfuse::esim;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent straight-line evaluation of the BiLSTM recurrence: plain loops,
// no kernels, no caches.
Mat<double> reference_bilstm(const Mat<double>& x, size_t len, const BiLstm& cells,
                             size_t hidden) {
    Mat<double> out(x.rows, 2 * hidden);
    auto run = [&](const LstmCell& cell, bool reverse, size_t col_off) {
        std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
        for (size_t step = 0; step < len; ++step) {
            const size_t t = reverse ? len - 1 - step : step;
            for (size_t k = 0; k < hidden; ++k) {
                auto gate = [&](size_t block) {
                    double z = cell.b[block * hidden + k];
                    for (size_t j = 0; j < x.cols; ++j) {
                        z += cell.wx.at(block * hidden + k, j) * x.at(t, j);
                    }
                    for (size_t j = 0; j < hidden; ++j) {
                        z += cell.wh.at(block * hidden + k, j) * h[j];
                    }
                    return z;
                };
                (void)gate;
            }
            // gates must see h from the previous step, so evaluate all pre-
            // activations before updating the state
            std::vector<double> zi(hidden), zf(hidden), zg(hidden), zo(hidden);
            for (size_t k = 0; k < hidden; ++k) {
                auto pre = [&](size_t block) {
                    double z = cell.b[block * hidden + k];
                    for (size_t j = 0; j < x.cols; ++j) {
                        z += cell.wx.at(block * hidden + k, j) * x.at(t, j);
                    }
                    for (size_t j = 0; j < hidden; ++j) {
                        z += cell.wh.at(block * hidden + k, j) * h[j];
                    }
                    return z;
                };
                zi[k] = pre(0);
                zf[k] = pre(1);
                zg[k] = pre(2);
                zo[k] = pre(3);
            }
            for (size_t k = 0; k < hidden; ++k) {
                const double i = sigm(zi[k]);
                const double f = sigm(zf[k]);
                const double g = std::tanh(zg[k]);
                const double o = sigm(zo[k]);
                c[k] = f * c[k] + i * g;
                h[k] = o * std::tanh(c[k]);
                out.at(t, col_off + k) = h[k];
            }
        }
    };
    run(cells.fwd, false, 0);
    run(cells.bwd, true, hidden);
    return out;
}

Params random_params(size_t input_dim, size_t hidden, uint64_t seed) {
    Config c;
    c.input_dim = input_dim;
    c.hidden = hidden;
    c.seed = seed;
    return init_params(c);
}

Mat<float> random_seq(Rng& rng, size_t t, size_t d) {
    Mat<float> m(t, d);
    for (auto& v : m.data) v = static_cast<float>(rng.uniform(-1, 1));
    return m;
}

Example random_example(Rng& rng, size_t tp, size_t th, size_t d) {
    Example ex;
    ex.premise = random_seq(rng, tp, d);
    ex.hypothesis = random_seq(rng, th, d);
    ex.label = static_cast<Label>(rng.below(3));
    return ex;
}

bool grad_close(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= 1e-8) return true;
    return diff <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace

TEST_CASE("bilstm_forward: empty sequence, zero fixed point, reference oracle") {
    Rng rng(1);
    {
        Params p = random_params(3, 2, 9);
        Mat<double> empty(0, 3);
        auto states = bilstm_forward(empty, 0, p.encoder, 2);
        CHECK(states.rows == 0);
    }
    {
        // all-zero parameters and inputs: hidden stays 0 (tanh(0)*sigmoid(0))
        Params p = Params::zeros(2, 3);
        Mat<double> x(4, 2);
        auto states = bilstm_forward(x, 4, p.encoder, 3);
        for (double v : states.data) CHECK(v == 0.0);
    }
    for (int trial = 0; trial < 30; ++trial) {
        const size_t d = 1 + rng.below(3);
        const size_t h = 1 + rng.below(3);
        const size_t t = 1 + rng.below(4);
        Params p = random_params(d, h, 100 + trial);
        Mat<double> x(t, d);
        for (auto& v : x.data) v = rng.uniform(-1, 1);
        auto got = bilstm_forward(x, t, p.encoder, h);
        auto want = reference_bilstm(x, t, p.encoder, h);
        REQUIRE(got.data.size() == want.data.size());
        for (size_t i = 0; i < got.data.size(); ++i) {
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("bilstm_forward: masked positions stay zero and do not advance") {
    Rng rng(2);
    Params p = random_params(2, 2, 77);
    Mat<double> x(5, 2);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    auto full = bilstm_forward(x, 3, p.encoder, 2);  // len 3 of 5
    for (size_t t = 3; t < 5; ++t) {
        for (size_t k = 0; k < 4; ++k) CHECK(full.at(t, k) == 0.0);
    }
    // same as running on the 3-row prefix
    Mat<double> prefix(3, 2);
    for (size_t t = 0; t < 3; ++t) {
        for (size_t k = 0; k < 2; ++k) prefix.at(t, k) = x.at(t, k);
    }
    auto short_run = bilstm_forward(prefix, 3, p.encoder, 2);
    for (size_t t = 0; t < 3; ++t) {
        for (size_t k = 0; k < 4; ++k) CHECK(full.at(t, k) == short_run.at(t, k));
    }
}

TEST_CASE("attend: single token, convexity, brute-force oracle, row sums") {
    {
        // Tp = Th = 1: weight 1, aligned vector equals the opposite state
        Mat<double> p(1, 4), h(1, 4);
        for (size_t k = 0; k < 4; ++k) {
            p.at(0, k) = 0.1 * (k + 1);
            h.at(0, k) = -0.2 * (k + 1);
        }
        auto res = attend(p, 1, h, 1);
        for (size_t k = 0; k < 4; ++k) {
            CHECK(res.p_aligned.at(0, k) == doctest::Approx(h.at(0, k)));
            CHECK(res.h_aligned.at(0, k) == doctest::Approx(p.at(0, k)));
        }
    }
    {
        // identical h rows: p_aligned equals that row regardless of scores
        Mat<double> p(2, 2), h(3, 2);
        p.at(0, 0) = 1.0;
        p.at(1, 1) = -2.0;
        for (size_t j = 0; j < 3; ++j) {
            h.at(j, 0) = 0.4;
            h.at(j, 1) = -0.6;
        }
        auto res = attend(p, 2, h, 3);
        for (size_t i = 0; i < 2; ++i) {
            CHECK(res.p_aligned.at(i, 0) == doctest::Approx(0.4));
            CHECK(res.p_aligned.at(i, 1) == doctest::Approx(-0.6));
        }
    }
    {
        // brute-force double-loop softmax at 64-bit
        Rng rng(3);
        Mat<double> p(3, 4), h(2, 4);
        for (auto& v : p.data) v = rng.uniform(-2, 2);
        for (auto& v : h.data) v = rng.uniform(-2, 2);
        auto res = attend(p, 3, h, 2);
        for (size_t i = 0; i < 3; ++i) {
            double z = 0;
            for (size_t j = 0; j < 2; ++j) {
                double e = 0;
                for (size_t k = 0; k < 4; ++k) e += p.at(i, k) * h.at(j, k);
                CHECK(res.scores.at(i, j) == doctest::Approx(e).epsilon(1e-12));
                z += std::exp(e);
            }
            double row_sum = 0.0;
            for (size_t k = 0; k < 4; ++k) {
                double acc = 0;
                for (size_t j = 0; j < 2; ++j) {
                    double e = 0;
                    for (size_t kk = 0; kk < 4; ++kk) e += p.at(i, kk) * h.at(j, kk);
                    acc += std::exp(e) / z * h.at(j, k);
                }
                CHECK(res.p_aligned.at(i, k) == doctest::Approx(acc).epsilon(1e-10));
            }
            (void)row_sum;
        }
    }
}

TEST_CASE("enhance: algebraic identities and formula oracle") {
    Rng rng(4);
    const size_t h = 2;
    const size_t two_h = 2 * h;
    Mat<double> proj(h, 4 * two_h);
    std::vector<double> bias(h);
    for (auto& v : proj.data) v = rng.uniform(-0.5, 0.5);
    for (auto& v : bias) v = rng.uniform(-0.5, 0.5);

    {
        // a == a~: difference block zero, product block a^2
        Mat<double> a(2, two_h);
        for (auto& v : a.data) v = rng.uniform(-1, 1);
        auto out = enhance(a, a, 2, proj, bias);
        for (size_t t = 0; t < 2; ++t) {
            for (size_t k = 0; k < h; ++k) {
                double z = bias[k];
                for (size_t c = 0; c < two_h; ++c) {
                    z += proj.at(k, c) * a.at(t, c);                       // a block
                    z += proj.at(k, two_h + c) * a.at(t, c);               // a~ block
                    z += proj.at(k, 2 * two_h + c) * 0.0;                  // difference
                    z += proj.at(k, 3 * two_h + c) * a.at(t, c) * a.at(t, c);  // product
                }
                CHECK(out.at(t, k) == doctest::Approx(std::tanh(z)).epsilon(1e-12));
            }
        }
    }
    {
        // zero projection: output = tanh(bias) broadcast
        Mat<double> zero_proj(h, 4 * two_h);
        Mat<double> a(3, two_h), al(3, two_h);
        for (auto& v : a.data) v = rng.uniform(-1, 1);
        for (auto& v : al.data) v = rng.uniform(-1, 1);
        auto out = enhance(a, al, 3, zero_proj, bias);
        for (size_t t = 0; t < 3; ++t) {
            for (size_t k = 0; k < h; ++k) {
                CHECK(out.at(t, k) == doctest::Approx(std::tanh(bias[k])));
            }
        }
    }
    {
        // random case against the direct formula
        Mat<double> a(2, two_h), al(2, two_h);
        for (auto& v : a.data) v = rng.uniform(-1, 1);
        for (auto& v : al.data) v = rng.uniform(-1, 1);
        auto out = enhance(a, al, 2, proj, bias);
        for (size_t t = 0; t < 2; ++t) {
            for (size_t k = 0; k < h; ++k) {
                double z = bias[k];
                for (size_t c = 0; c < two_h; ++c) {
                    z += proj.at(k, c) * a.at(t, c);
                    z += proj.at(k, two_h + c) * al.at(t, c);
                    z += proj.at(k, 2 * two_h + c) * (a.at(t, c) - al.at(t, c));
                    z += proj.at(k, 3 * two_h + c) * (a.at(t, c) * al.at(t, c));
                }
                CHECK(out.at(t, k) == doctest::Approx(std::tanh(z)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("compose_and_pool: T=1 identity, max >= avg, brute-force oracle") {
    Rng rng(5);
    const size_t h = 3;
    Params p = random_params(h, h, 55);  // composition input dim = hidden

    {
        Mat<double> single(1, h), other(2, h);
        for (auto& v : single.data) v = rng.uniform(-1, 1);
        for (auto& v : other.data) v = rng.uniform(-1, 1);
        auto feat = compose_and_pool(single, 1, other, 2, p.composition, h);
        REQUIRE(feat.size() == 8 * h);
        // premise side: max equals avg for a single step
        for (size_t k = 0; k < 2 * h; ++k) {
            CHECK(feat[k] == doctest::Approx(feat[2 * h + k]));
        }
    }
    {
        Mat<double> ep(4, h), eh(3, h);
        for (auto& v : ep.data) v = rng.uniform(-1, 1);
        for (auto& v : eh.data) v = rng.uniform(-1, 1);
        auto feat = compose_and_pool(ep, 4, eh, 3, p.composition, h);

        // brute-force per-coordinate max/mean over the composition states
        auto vp = bilstm_forward(ep, 4, p.composition, h);
        auto vh = bilstm_forward(eh, 3, p.composition, h);
        for (size_t k = 0; k < 2 * h; ++k) {
            double mx = vp.at(0, k), mean = 0;
            for (size_t t = 0; t < 4; ++t) {
                mx = std::max(mx, vp.at(t, k));
                mean += vp.at(t, k);
            }
            mean /= 4;
            CHECK(feat[k] == doctest::Approx(mx));
            CHECK(feat[2 * h + k] == doctest::Approx(mean));
            CHECK(feat[k] >= feat[2 * h + k] - 1e-12);  // max >= avg
        }
        for (size_t k = 0; k < 2 * h; ++k) {
            double mx = vh.at(0, k), mean = 0;
            for (size_t t = 0; t < 3; ++t) {
                mx = std::max(mx, vh.at(t, k));
                mean += vh.at(t, k);
            }
            mean /= 3;
            CHECK(feat[4 * h + k] == doctest::Approx(mx));
            CHECK(feat[6 * h + k] == doctest::Approx(mean));
        }
    }
    Mat<double> any(2, h), empty(0, h);
    CHECK_THROWS_WITH_AS(compose_and_pool(any, 2, empty, 0, p.composition, h),
                         "empty sequence", Error);
}

TEST_CASE("classify: uniform at zero, argmax, stable-softmax oracle, scale invariance") {
    const size_t h = 4;
    Rng rng(6);
    Mat<double> w1(h, 8 * h);
    std::vector<double> b1(h);
    Mat<double> w2(3, h);
    std::vector<double> b2(3);

    {
        // zero classifier: logits all 0 -> exactly uniform
        std::vector<double> feat(8 * h, 0.7);
        auto probs = classify(feat, w1, b1, w2, b2);
        for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }

    for (auto& v : w1.data) v = rng.uniform(-1, 1);
    for (auto& v : b1) v = rng.uniform(-1, 1);
    for (auto& v : w2.data) v = rng.uniform(-1, 1);
    for (auto& v : b2) v = rng.uniform(-1, 1);

    std::vector<double> feat(8 * h);
    for (auto& v : feat) v = rng.uniform(-1, 1);
    auto probs = classify(feat, w1, b1, w2, b2);

    // independent oracle: subtract-max softmax over explicitly computed logits
    std::vector<double> u(h);
    for (size_t k = 0; k < h; ++k) {
        double z = b1[k];
        for (size_t j = 0; j < 8 * h; ++j) z += w1.at(k, j) * feat[j];
        u[k] = std::tanh(z);
    }
    std::array<double, 3> logits{};
    for (int c = 0; c < 3; ++c) {
        logits[c] = b2[c];
        for (size_t k = 0; k < h; ++k) logits[c] += w2.at(c, k) * u[k];
    }
    const double m = std::max({logits[0], logits[1], logits[2]});
    double z = 0;
    for (int c = 0; c < 3; ++c) z += std::exp(logits[c] - m);
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        CHECK(probs[c] == doctest::Approx(std::exp(logits[c] - m) / z).epsilon(1e-12));
        CHECK(probs[c] > 0.0);
        total += probs[c];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    // scaling the output layer by a positive constant keeps the argmax
    int argmax = 0;
    for (int c = 1; c < 3; ++c) {
        if (probs[c] > probs[argmax]) argmax = c;
    }
    Mat<double> w2s = w2;
    std::vector<double> b2s = b2;
    for (auto& v : w2s.data) v *= 7.5;
    for (auto& v : b2s) v *= 7.5;
    auto scaled = classify(feat, w1, b1, w2s, b2s);
    int argmax2 = 0;
    for (int c = 1; c < 3; ++c) {
        if (scaled[c] > scaled[argmax2]) argmax2 = c;
    }
    CHECK(argmax == argmax2);
}

TEST_CASE("loss_and_backward: uniform predictor gives ln 3") {
    Rng rng(7);
    const size_t d = 3, h = 2;
    Config config;
    config.input_dim = d;
    config.hidden = h;
    config.dropout = 0.0;
    config.seed = 1;
    Params p = init_params(config);
    // zero the classifier output layer: probabilities become exactly uniform
    p.cls_w2.zero();
    p.cls_b2.assign(3, 0.0);

    std::vector<Example> exs = {random_example(rng, 3, 2, d), random_example(rng, 2, 2, d)};
    auto batch = PaddedBatch::make(exs, 202, 20, 0);
    auto result = loss_and_backward(batch, p, config, false, 0);
    CHECK(result.loss == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("loss_and_backward: finite differences over 50 random tiny configurations") {
    Rng rng(8);
    size_t checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const size_t d = 2 + rng.below(2);
        const size_t h = 2 + rng.below(2);
        Config config;
        config.input_dim = d;
        config.hidden = h;
        config.dropout = 0.0;  // FD needs the deterministic path
        config.seed = 1000 + trial;
        Params params = init_params(config);

        std::vector<Example> exs;
        const size_t b = 1 + rng.below(2);
        for (size_t i = 0; i < b; ++i) {
            exs.push_back(random_example(rng, 1 + rng.below(4), 1 + rng.below(3), d));
        }
        auto batch = PaddedBatch::make(exs, 202, 20, 0);
        auto analytic = loss_and_backward(batch, params, config, true, 0);

        auto loss_at = [&]() {
            return loss_and_backward(batch, params, config, false, 0).loss;
        };

        // collect parameter spans once; perturb entries in place
        std::vector<std::span<double>> param_spans, grad_spans;
        params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
            param_spans.push_back(s);
        });
        analytic.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
            grad_spans.push_back(s);
        });
        REQUIRE(param_spans.size() == grad_spans.size());

        const double eps = 1e-5;
        for (size_t m = 0; m < param_spans.size(); ++m) {
            for (size_t i = 0; i < param_spans[m].size(); ++i) {
                double& slot = param_spans[m][i];
                const double saved = slot;
                slot = saved + eps;
                const double up = loss_at();
                slot = saved - eps;
                const double down = loss_at();
                slot = saved;
                const double numeric = (up - down) / (2 * eps);
                CHECK(grad_close(grad_spans[m][i], numeric));
                ++checked;
            }
        }
    }
    CHECK(checked > 10000);
}

TEST_CASE("padding invariance: appended padded positions change nothing") {
    Rng rng(9);
    const size_t d = 4, h = 3;
    Config config;
    config.input_dim = d;
    config.hidden = h;
    config.dropout = 0.0;
    config.seed = 77;
    Params params = init_params(config);

    std::vector<Example> exs = {random_example(rng, 3, 2, d)};
    auto batch = PaddedBatch::make(exs, 202, 20, 0);
    auto base = loss_and_backward(batch, params, config, false, 0);

    // hand-inflate the padded tensors with extra zero rows
    PaddedBatch padded = batch;
    padded.t_premise = batch.t_premise + 2;
    padded.t_hyp = batch.t_hyp + 3;
    padded.premise.assign(padded.batch * padded.t_premise * d, 0.0);
    padded.hypothesis.assign(padded.batch * padded.t_hyp * d, 0.0);
    for (size_t t = 0; t < batch.premise_len[0]; ++t) {
        for (size_t k = 0; k < d; ++k) {
            padded.premise[t * d + k] = batch.premise[t * d + k];
        }
    }
    for (size_t t = 0; t < batch.hyp_len[0]; ++t) {
        for (size_t k = 0; k < d; ++k) {
            padded.hypothesis[t * d + k] = batch.hypothesis[t * d + k];
        }
    }
    auto inflated = loss_and_backward(padded, params, config, false, 0);
    CHECK(std::abs(base.loss - inflated.loss) <= 1e-6);

    // gradients agree too
    std::vector<double> g1, g2;
    base.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        g1.insert(g1.end(), s.begin(), s.end());
    });
    inflated.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        g2.insert(g2.end(), s.begin(), s.end());
    });
    REQUIRE(g1.size() == g2.size());
    for (size_t i = 0; i < g1.size(); ++i) {
        CHECK(std::abs(g1[i] - g2[i]) <= 1e-9);
    }
}

TEST_CASE("EarlyStopping: rule trace") {
    {
        // patience=1, dev loss strictly increasing: stop at epoch 2, best = 1
        EarlyStopping s(1);
        CHECK_FALSE(s.update(1, 1.0));
        CHECK(s.update(2, 1.1));
        CHECK(s.best_epoch() == 1);
    }
    {
        // improvement resets the counter
        EarlyStopping s(2);
        CHECK_FALSE(s.update(1, 1.0));
        CHECK_FALSE(s.update(2, 1.2));
        CHECK_FALSE(s.update(3, 0.9));
        CHECK_FALSE(s.update(4, 0.95));
        CHECK(s.update(5, 0.99));
        CHECK(s.best_epoch() == 3);
    }
    {
        // non-strict (equal) loss counts as no improvement
        EarlyStopping s(2);
        CHECK_FALSE(s.update(1, 1.0));
        CHECK_FALSE(s.update(2, 1.0));
        CHECK(s.update(3, 1.0));
        CHECK(s.best_epoch() == 1);
    }
}

TEST_CASE("train_nli: single epoch cap, determinism, report invariants") {
    Rng rng(10);
    const size_t d = 5;
    std::vector<Example> train, dev;
    for (int i = 0; i < 12; ++i) train.push_back(random_example(rng, 3, 2, d));
    for (int i = 0; i < 4; ++i) dev.push_back(random_example(rng, 3, 2, d));

    Config config;
    config.hidden = 4;
    config.dropout = 0.2;
    config.learning_rate = 0.05;
    config.batch_size = 4;
    config.max_epochs = 1;
    config.patience = 2;
    config.seed = 31;

    auto run1 = train_nli(train, dev, config);
    CHECK(run1.report.stopped_at == 1);  // exactly one epoch
    CHECK(run1.report.train_loss.size() == 1);
    CHECK(run1.report.best_epoch == 1);

    config.max_epochs = 6;
    auto run2 = train_nli(train, dev, config);
    auto run3 = train_nli(train, dev, config);
    CHECK(run2.report.train_loss == run3.report.train_loss);  // identical reports
    CHECK(run2.report.dev_loss == run3.report.dev_loss);
    CHECK(run2.report.stopped_at == run3.report.stopped_at);

    // bit-identical parameters in single-threaded mode
    std::vector<double> p2, p3;
    run2.params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        p2.insert(p2.end(), s.begin(), s.end());
    });
    run3.params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        p3.insert(p3.end(), s.begin(), s.end());
    });
    CHECK(p2 == p3);

    CHECK(run2.report.stopped_at <= config.max_epochs);
    CHECK(run2.report.best_epoch <= run2.report.stopped_at);

    CHECK_THROWS_AS(train_nli({}, dev, config), ConfigError);
    CHECK_THROWS_AS(train_nli(train, {}, config), ConfigError);
}

TEST_CASE("parallel gradient mode matches sequential loss closely") {
    Rng rng(11);
    const size_t d = 4;
    std::vector<Example> exs;
    for (int i = 0; i < 8; ++i) exs.push_back(random_example(rng, 3, 2, d));
    Config config;
    config.input_dim = d;
    config.hidden = 3;
    config.dropout = 0.0;
    config.seed = 5;
    Params params = init_params(config);
    auto batch = PaddedBatch::make(exs, 202, 20, 0);

    config.threads = 1;
    auto seq = loss_and_backward(batch, params, config, true, 42);
    config.threads = 4;
    auto par = loss_and_backward(batch, params, config, true, 42);
    CHECK(std::abs(seq.loss - par.loss) <= 1e-12);

    std::vector<double> g1, g2;
    seq.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        g1.insert(g1.end(), s.begin(), s.end());
    });
    par.grads.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        g2.insert(g2.end(), s.begin(), s.end());
    });
    for (size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-10);
}

TEST_CASE("predict: tie-break, probability sum, width check") {
    const size_t d = 3, h = 2;
    Config config;
    config.input_dim = d;
    config.hidden = h;
    config.seed = 3;
    Params p = init_params(config);
    p.cls_w2.zero();
    p.cls_b2.assign(3, 0.0);  // uniform head

    Rng rng(12);
    auto ex = random_example(rng, 2, 2, d);
    auto pred = predict(ex.premise, ex.hypothesis, p, config);
    CHECK(pred.label == Label::Entailment);  // tie toward the lower index
    CHECK(pred.probabilities[0] + pred.probabilities[1] + pred.probabilities[2] ==
          doctest::Approx(1.0).epsilon(1e-6));

    Mat<float> wrong(2, d + 1);
    CHECK_THROWS_AS(predict(wrong, ex.hypothesis, p, config), ConfigError);
}

TEST_CASE("overfit a tiny fixed batch: gold labels recovered") {
    // overfit-one-batch oracle, small version (the acceptance suite runs the
    // H=16 / 8-example / 500-step variant)
    Rng rng(13);
    const size_t d = 4;
    std::vector<Example> exs;
    for (int i = 0; i < 4; ++i) exs.push_back(random_example(rng, 3, 2, d));

    Config config;
    config.input_dim = d;
    config.hidden = 8;
    config.dropout = 0.0;
    config.learning_rate = 0.5;
    config.batch_size = 4;
    config.seed = 21;
    Params params = init_params(config);
    auto batch = PaddedBatch::make(exs, 202, 20, 0);

    double loss = 0;
    for (int step = 0; step < 300; ++step) {
        auto r = loss_and_backward(batch, params, config, true, 0);
        loss = r.loss;
        if (loss < 0.05) break;
        double norm_sq = 0;
        r.grads.for_each([&](const std::string&, std::span<double> g, size_t, size_t) {
            for (double v : g) norm_sq += v * v;
        });
        const double scale = std::sqrt(norm_sq) > config.clip_norm
                                 ? config.clip_norm / std::sqrt(norm_sq)
                                 : 1.0;
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
    CHECK(loss < 0.05);
    for (const auto& ex : exs) {
        CHECK(predict(ex.premise, ex.hypothesis, params, config).label == ex.label);
    }
}

TEST_CASE("checkpoint: save/load round-trip is bit-exact and validates shapes") {
    Config config;
    config.input_dim = 5;
    config.hidden = 3;
    config.seed = 17;
    Params p = init_params(config);

    std::ostringstream out;
    save_checkpoint(out, p, config);
    std::istringstream in(out.str());
    auto loaded = load_checkpoint(in);
    CHECK(loaded.config.input_dim == 5);
    CHECK(loaded.config.hidden == 3);

    std::vector<double> a, b;
    p.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        a.insert(a.end(), s.begin(), s.end());
    });
    loaded.params.for_each([&](const std::string&, std::span<double> s, size_t, size_t) {
        b.insert(b.end(), s.begin(), s.end());
    });
    CHECK(a == b);  // %.17g round-trips doubles exactly

    std::istringstream bad("esim 1\nconfig input_dim 2 hidden nope\n");
    CHECK_THROWS_AS(load_checkpoint(bad), Error);
}

TEST_CASE("report CSV format") {
    TrainReport r;
    r.train_loss = {1.0, 0.5};
    r.dev_loss = {1.1, 0.7};
    r.dev_accuracy = {0.3, 0.6};
    std::ostringstream out;
    write_report_csv(out, r);
    CHECK(out.str() ==
          "epoch,train_loss,dev_loss,dev_accuracy\n1,1,1.1,0.3\n2,0.5,0.7,0.6\n");
}
