// The hierarchical classifier: character embeddings feed a two-layer CNN
// word encoder with a residual layer; word vectors feed a biLSTM; every
// word gets a label distribution and the sentence prediction is their
// average. One backward pass covers both the sentence head and the
// word-level tagging head.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "langid/evaluator.hpp"
#include "langid/ops.hpp"
#include "langid/rng.hpp"
#include "langid/tensor.hpp"
#include "langid/text_pipeline.hpp"

namespace langid {

struct ModelConfig {
    int n1 = 50;          // first conv filters
    int n2 = 93;          // second conv filters per width
    int lstm = 23;        // hidden units per direction
    double dropout = 0.25;
    bool peepholes = true;

    int word_dim() const { return 3 * n2; }
};

struct ModelParams {
    ModelConfig config;
    int char_dim = 0;    // embedding rows
    int vocab_size = 0;  // embedding columns (reserved symbols included)
    int num_labels = 0;

    Tensor embeddings;                 // char_dim x vocab_size
    Tensor conv1_w, conv1_b;           // n1 x char_dim x 3, n1
    Tensor conv2_w3, conv2_b3;         // n2 x n1 x 3, n2
    Tensor conv2_w4, conv2_b4;         // n2 x n1 x 4, n2
    Tensor conv2_w5, conv2_b5;         // n2 x n1 x 5, n2
    Tensor res_w, res_b;               // 3n2 x 3n2, 3n2
    LstmParams fwd_lstm, bwd_lstm;     // input 3n2, hidden lstm
    Tensor out_w, out_b;               // num_labels x 2*lstm, num_labels

    static ModelParams zeros(const ModelConfig& cfg, int char_dim, int vocab_size,
                             int num_labels) {
        ModelParams p;
        p.config = cfg;
        p.char_dim = char_dim;
        p.vocab_size = vocab_size;
        p.num_labels = num_labels;
        int wd = cfg.word_dim();
        p.embeddings = Tensor::zeros({char_dim, vocab_size});
        p.conv1_w = Tensor::zeros({cfg.n1, char_dim, 3});
        p.conv1_b = Tensor::zeros({cfg.n1});
        p.conv2_w3 = Tensor::zeros({cfg.n2, cfg.n1, 3});
        p.conv2_b3 = Tensor::zeros({cfg.n2});
        p.conv2_w4 = Tensor::zeros({cfg.n2, cfg.n1, 4});
        p.conv2_b4 = Tensor::zeros({cfg.n2});
        p.conv2_w5 = Tensor::zeros({cfg.n2, cfg.n1, 5});
        p.conv2_b5 = Tensor::zeros({cfg.n2});
        p.res_w = Tensor::zeros({wd, wd});
        p.res_b = Tensor::zeros({wd});
        p.fwd_lstm = LstmParams::zeros(wd, cfg.lstm, cfg.peepholes);
        p.bwd_lstm = LstmParams::zeros(wd, cfg.lstm, cfg.peepholes);
        p.out_w = Tensor::zeros({num_labels, 2 * cfg.lstm});
        p.out_b = Tensor::zeros({num_labels});
        return p;
    }

    // Weights uniform in [-0.05, 0.05], biases zero. Draw order is fixed
    // so a seed fully determines the initialization.
    static ModelParams init(const ModelConfig& cfg, int char_dim, int vocab_size,
                            int num_labels, Rng& rng) {
        ModelParams p = zeros(cfg, char_dim, vocab_size, num_labels);
        std::vector<Tensor*> weights = {&p.embeddings, &p.conv1_w,  &p.conv2_w3,
                                        &p.conv2_w4,   &p.conv2_w5, &p.res_w};
        for (Tensor* t : p.fwd_lstm.weight_tensors()) weights.push_back(t);
        for (Tensor* t : p.bwd_lstm.weight_tensors()) weights.push_back(t);
        weights.push_back(&p.out_w);
        for (Tensor* t : weights) {
            for (double& v : t->data) v = rng.uniform(-0.05, 0.05);
        }
        return p;
    }

    static ModelParams zeros_like(const ModelParams& other) {
        return zeros(other.config, other.char_dim, other.vocab_size,
                     other.num_labels);
    }

    std::vector<std::pair<std::string, Tensor*>> tensor_list() {
        std::vector<std::pair<std::string, Tensor*>> out = {
            {"embeddings", &embeddings},
            {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b},
            {"conv2_w3", &conv2_w3}, {"conv2_b3", &conv2_b3},
            {"conv2_w4", &conv2_w4}, {"conv2_b4", &conv2_b4},
            {"conv2_w5", &conv2_w5}, {"conv2_b5", &conv2_b5},
            {"res_w", &res_w}, {"res_b", &res_b},
        };
        for (auto& e : fwd_lstm.tensor_list("fwd_lstm")) out.push_back(e);
        for (auto& e : bwd_lstm.tensor_list("bwd_lstm")) out.push_back(e);
        out.push_back({"out_w", &out_w});
        out.push_back({"out_b", &out_b});
        return out;
    }

    std::vector<std::pair<std::string, const Tensor*>> tensor_list() const {
        auto* self = const_cast<ModelParams*>(this);
        std::vector<std::pair<std::string, const Tensor*>> out;
        for (auto& [name, t] : self->tensor_list()) out.emplace_back(name, t);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : tensor_list()) {
            n += static_cast<std::int64_t>(t->element_count());
        }
        return n;
    }
};

// Character indices for one word: UNK mapping, one PAD on each side, and
// extra right PADs so the width-5 convolution always has a valid window
// (at least 7 characters after padding).
inline std::vector<int> word_char_indices(const std::u32string& word,
                                          const CharVocab& vocab) {
    if (word.empty()) throw std::invalid_argument("cannot encode an empty word");
    std::vector<int> idx;
    idx.reserve(word.size() + 2);
    idx.push_back(CharVocab::kPadIndex);
    for (char32_t cp : word) idx.push_back(vocab.index_of(cp));
    idx.push_back(CharVocab::kPadIndex);
    while (idx.size() < 7) idx.push_back(CharVocab::kPadIndex);
    return idx;
}

struct WordTrace {
    std::vector<int> char_indices;
    Tensor embedded;                       // d x L
    Tensor conv1_pre, t1;                  // n1 x (L-2)
    Tensor t1_mask, t1_dropped;
    Tensor conv2_pre3, conv2_pre4, conv2_pre5;
    Tensor t2_3, t2_4, t2_5;
    std::vector<int> pool3, pool4, pool5;
    Tensor y;                              // 3n2
    Tensor res_pre;                        // 3n2
    Tensor z;                              // 3n2
    Tensor lstm_in_mask, lstm_in;
};

struct SentenceTrace {
    bool training = false;
    std::vector<WordTrace> words;
    std::vector<LstmStepTrace> fwd_steps;  // index i = word i
    std::vector<LstmStepTrace> bwd_steps;  // index j = word T-1-j
    std::vector<Tensor> context;           // v_i, 2h
    std::vector<Tensor> logits;            // per word
    std::vector<Tensor> word_probs;        // p_i
    Tensor sentence_probs;                 // p_S
};

// Per-word distributions plus their average; the inference-facing slice
// of a forward pass.
struct Prediction {
    std::vector<Tensor> word_probs;
    Tensor sentence_probs;
};

namespace detail {

inline WordTrace encode_word(const ModelParams& p, const std::u32string& word,
                             const CharVocab& vocab, bool training, Rng* rng,
                             const WordTrace* frozen) {
    WordTrace w;
    w.char_indices = word_char_indices(word, vocab);
    int L = static_cast<int>(w.char_indices.size());
    int d = p.char_dim;

    w.embedded = Tensor::zeros({d, L});
    for (int t = 0; t < L; ++t) {
        int col = w.char_indices[static_cast<std::size_t>(t)];
        for (int r = 0; r < d; ++r) w.embedded.at(r, t) = p.embeddings.at(r, col);
    }

    w.conv1_pre = narrow_conv(w.embedded, p.conv1_w, p.conv1_b);
    w.t1 = relu(w.conv1_pre);

    double rate = p.config.dropout;
    if (training && rate > 0.0) {
        w.t1_mask = frozen ? frozen->t1_mask : dropout_mask(w.t1.shape, rate, *rng);
        w.t1_dropped = dropout_apply(w.t1, w.t1_mask, rate);
    } else {
        w.t1_dropped = w.t1;
    }

    w.conv2_pre3 = narrow_conv(w.t1_dropped, p.conv2_w3, p.conv2_b3);
    w.conv2_pre4 = narrow_conv(w.t1_dropped, p.conv2_w4, p.conv2_b4);
    w.conv2_pre5 = narrow_conv(w.t1_dropped, p.conv2_w5, p.conv2_b5);
    w.t2_3 = relu(w.conv2_pre3);
    w.t2_4 = relu(w.conv2_pre4);
    w.t2_5 = relu(w.conv2_pre5);

    Tensor y3 = max_pool_time(w.t2_3, &w.pool3);
    Tensor y4 = max_pool_time(w.t2_4, &w.pool4);
    Tensor y5 = max_pool_time(w.t2_5, &w.pool5);
    int n2 = p.config.n2;
    w.y = Tensor::zeros({3 * n2});
    for (int i = 0; i < n2; ++i) {
        w.y.at(i) = y3.at(i);
        w.y.at(n2 + i) = y4.at(i);
        w.y.at(2 * n2 + i) = y5.at(i);
    }

    w.res_pre = affine(p.res_w, w.y, p.res_b);
    w.z = w.y;
    for (int i = 0; i < 3 * n2; ++i) {
        w.z.at(i) += w.res_pre.at(i) > 0.0 ? w.res_pre.at(i) : 0.0;
    }

    if (training && rate > 0.0) {
        w.lstm_in_mask =
            frozen ? frozen->lstm_in_mask : dropout_mask(w.z.shape, rate, *rng);
        w.lstm_in = dropout_apply(w.z, w.lstm_in_mask, rate);
    } else {
        w.lstm_in = w.z;
    }
    check_finite(w.z, "word encoding");
    return w;
}

}  // namespace detail

// Full forward pass. In training mode dropout masks come from `rng`
// unless `frozen` supplies the masks of an earlier pass (gradient checks).
inline SentenceTrace forward(const ModelParams& p,
                             const std::vector<std::u32string>& words,
                             const CharVocab& vocab, bool training = false,
                             Rng* rng = nullptr,
                             const SentenceTrace* frozen = nullptr) {
    if (words.empty()) throw std::invalid_argument("forward: needs >= 1 word");
    if (training && p.config.dropout > 0.0 && !rng && !frozen) {
        throw std::invalid_argument("forward: training mode needs an rng");
    }
    SentenceTrace s;
    s.training = training;
    std::size_t T = words.size();

    for (std::size_t i = 0; i < T; ++i) {
        s.words.push_back(detail::encode_word(p, words[i], vocab, training, rng,
                                              frozen ? &frozen->words[i] : nullptr));
    }

    int H = p.config.lstm;
    s.fwd_steps.resize(T);
    s.bwd_steps.resize(T);
    std::vector<Tensor> fwd_h(T), bwd_h(T);
    LstmState state = LstmState::zeros(H);
    for (std::size_t i = 0; i < T; ++i) {
        state = lstm_step(p.fwd_lstm, s.words[i].lstm_in, state, &s.fwd_steps[i]);
        fwd_h[i] = state.h;
    }
    state = LstmState::zeros(H);
    for (std::size_t j = 0; j < T; ++j) {
        std::size_t word = T - 1 - j;
        state = lstm_step(p.bwd_lstm, s.words[word].lstm_in, state, &s.bwd_steps[j]);
        bwd_h[j] = state.h;
    }

    s.context.resize(T);
    s.logits.resize(T);
    s.word_probs.resize(T);
    s.sentence_probs = Tensor::zeros({p.num_labels});
    for (std::size_t i = 0; i < T; ++i) {
        Tensor v = Tensor::zeros({2 * H});
        for (int k = 0; k < H; ++k) {
            v.at(k) = fwd_h[i].at(k);
            v.at(H + k) = bwd_h[T - 1 - i].at(k);
        }
        s.context[i] = v;
        s.logits[i] = affine(p.out_w, v, p.out_b);
        s.word_probs[i] = softmax(s.logits[i]);
        for (int l = 0; l < p.num_labels; ++l) {
            s.sentence_probs.at(l) += s.word_probs[i].at(l);
        }
    }
    s.sentence_probs.scale(1.0 / static_cast<double>(T));
    check_finite(s.sentence_probs, "sentence probabilities");
    return s;
}

// Word vector for a single word (the encoder half of the model), eval mode.
inline Tensor encode_word_vector(const ModelParams& p, const std::u32string& word,
                                 const CharVocab& vocab) {
    return detail::encode_word(p, word, vocab, false, nullptr, nullptr).z;
}

// biLSTM context vectors v_1..v_T in eval mode.
inline std::vector<Tensor> encode_sequence(const ModelParams& p,
                                           const std::vector<std::u32string>& words,
                                           const CharVocab& vocab) {
    return forward(p, words, vocab).context;
}

inline Prediction predict_sentence(const ModelParams& p,
                                   const std::vector<std::u32string>& words,
                                   const CharVocab& vocab) {
    SentenceTrace t = forward(p, words, vocab);
    return {t.word_probs, t.sentence_probs};
}

inline double sentence_loss(const SentenceTrace& trace, const Tensor& gold_dist) {
    return cross_entropy(trace.sentence_probs, gold_dist);
}

inline double word_loss(const SentenceTrace& trace,
                        const std::vector<int>& gold_labels) {
    if (gold_labels.size() != trace.word_probs.size()) {
        throw std::invalid_argument("word_loss: one gold label per word required");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < gold_labels.size(); ++i) {
        Tensor target = Tensor::zeros(trace.word_probs[i].shape);
        target.at(gold_labels[i]) = 1.0;
        total += cross_entropy(trace.word_probs[i], target);
    }
    return total;
}

namespace detail {

inline void backward_word_encoding(const ModelParams& p, const WordTrace& w,
                                   const Tensor& d_lstm_in, ModelParams& g) {
    double rate = p.config.dropout;
    int n2 = p.config.n2;
    int wd = 3 * n2;

    Tensor d_z = Tensor::zeros({wd});
    if (!w.lstm_in_mask.data.empty()) {
        dropout_backward(w.lstm_in_mask, rate, d_lstm_in, d_z);
    } else {
        d_z += d_lstm_in;
    }

    // z = y + relu(res_pre); res_pre = res_w y + res_b
    Tensor d_res_pre = Tensor::zeros({wd});
    for (int i = 0; i < wd; ++i) {
        if (w.res_pre.at(i) > 0.0) d_res_pre.at(i) = d_z.at(i);
    }
    Tensor d_y = d_z;
    affine_backward(p.res_w, w.y, d_res_pre, g.res_w, d_y, g.res_b);

    // Split the pooled vector back into the three banks.
    auto bank_backward = [&](const Tensor& t2, const Tensor& pre,
                             const std::vector<int>& pool, const Tensor& conv_w,
                             Tensor& g_conv_w, Tensor& g_conv_b, int offset,
                             Tensor& d_t1_dropped) {
        Tensor d_pool = Tensor::zeros({n2});
        for (int i = 0; i < n2; ++i) d_pool.at(i) = d_y.at(offset + i);
        Tensor d_t2 = Tensor::zeros(t2.shape);
        max_pool_time_backward(pool, d_pool, d_t2);
        Tensor d_pre = Tensor::zeros(pre.shape);
        relu_backward(pre, d_t2, d_pre);
        narrow_conv_backward(w.t1_dropped, conv_w, d_pre, d_t1_dropped, g_conv_w,
                             g_conv_b);
    };
    Tensor d_t1_dropped = Tensor::zeros(w.t1_dropped.shape);
    bank_backward(w.t2_3, w.conv2_pre3, w.pool3, p.conv2_w3, g.conv2_w3,
                  g.conv2_b3, 0, d_t1_dropped);
    bank_backward(w.t2_4, w.conv2_pre4, w.pool4, p.conv2_w4, g.conv2_w4,
                  g.conv2_b4, n2, d_t1_dropped);
    bank_backward(w.t2_5, w.conv2_pre5, w.pool5, p.conv2_w5, g.conv2_w5,
                  g.conv2_b5, 2 * n2, d_t1_dropped);

    Tensor d_t1 = Tensor::zeros(w.t1.shape);
    if (!w.t1_mask.data.empty()) {
        dropout_backward(w.t1_mask, rate, d_t1_dropped, d_t1);
    } else {
        d_t1 += d_t1_dropped;
    }

    Tensor d_conv1_pre = Tensor::zeros(w.conv1_pre.shape);
    relu_backward(w.conv1_pre, d_t1, d_conv1_pre);
    Tensor d_embedded = Tensor::zeros(w.embedded.shape);
    narrow_conv_backward(w.embedded, p.conv1_w, d_conv1_pre, d_embedded,
                         g.conv1_w, g.conv1_b);

    for (int t = 0; t < w.embedded.dim(1); ++t) {
        int col = w.char_indices[static_cast<std::size_t>(t)];
        for (int r = 0; r < p.char_dim; ++r) {
            g.embeddings.at(r, col) += d_embedded.at(r, t);
        }
    }
}

// Shared tail of both heads: gradients w.r.t. each word's probability
// vector flow back through softmax, output affine, biLSTM, and encoder.
inline void backward_from_word_probs(const ModelParams& p, const SentenceTrace& s,
                                     const std::vector<Tensor>& d_word_probs,
                                     ModelParams& g) {
    std::size_t T = s.words.size();
    int H = p.config.lstm;
    int wd = p.config.word_dim();

    std::vector<Tensor> d_context(T);
    for (std::size_t i = 0; i < T; ++i) {
        Tensor d_logits = Tensor::zeros(s.logits[i].shape);
        softmax_backward(s.word_probs[i], d_word_probs[i], d_logits);
        d_context[i] = Tensor::zeros({2 * H});
        affine_backward(p.out_w, s.context[i], d_logits, g.out_w, d_context[i],
                        g.out_b);
    }

    std::vector<Tensor> d_lstm_in(T, Tensor::zeros({wd}));

    // Forward-direction BPTT.
    Tensor dh_carry = Tensor::zeros({H}), dc_carry = Tensor::zeros({H});
    for (std::size_t ri = 0; ri < T; ++ri) {
        std::size_t i = T - 1 - ri;
        Tensor dh = dh_carry;
        for (int k = 0; k < H; ++k) dh.at(k) += d_context[i].at(k);
        Tensor dh_prev = Tensor::zeros({H}), dc_prev = Tensor::zeros({H});
        lstm_step_backward(p.fwd_lstm, s.fwd_steps[i], dh, dc_carry, g.fwd_lstm,
                           d_lstm_in[i], dh_prev, dc_prev);
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }

    // Backward-direction BPTT (steps run over reversed words).
    dh_carry = Tensor::zeros({H});
    dc_carry = Tensor::zeros({H});
    for (std::size_t rj = 0; rj < T; ++rj) {
        std::size_t j = T - 1 - rj;       // step index
        std::size_t word = T - 1 - j;     // word seen at that step
        Tensor dh = dh_carry;
        for (int k = 0; k < H; ++k) dh.at(k) += d_context[word].at(H + k);
        Tensor dh_prev = Tensor::zeros({H}), dc_prev = Tensor::zeros({H});
        lstm_step_backward(p.bwd_lstm, s.bwd_steps[j], dh, dc_carry, g.bwd_lstm,
                           d_lstm_in[word], dh_prev, dc_prev);
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }

    for (std::size_t i = 0; i < T; ++i) {
        backward_word_encoding(p, s.words[i], d_lstm_in[i], g);
    }
}

}  // namespace detail

// Gradient of the sentence-level cross entropy; accumulates into `grads`.
inline void backward_sentence(const ModelParams& p, const SentenceTrace& s,
                              const Tensor& gold_dist, ModelParams& grads,
                              double loss_scale = 1.0) {
    std::size_t T = s.words.size();
    Tensor d_ps = Tensor::zeros(s.sentence_probs.shape);
    cross_entropy_backward(s.sentence_probs, gold_dist, loss_scale, d_ps);
    d_ps.scale(1.0 / static_cast<double>(T));
    std::vector<Tensor> d_word_probs(T, d_ps);
    detail::backward_from_word_probs(p, s, d_word_probs, grads);
}

// Gradient of the summed per-word cross entropy.
inline void backward_word(const ModelParams& p, const SentenceTrace& s,
                          const std::vector<int>& gold_labels, ModelParams& grads,
                          double loss_scale = 1.0) {
    std::size_t T = s.words.size();
    std::vector<Tensor> d_word_probs(T);
    for (std::size_t i = 0; i < T; ++i) {
        Tensor target = Tensor::zeros(s.word_probs[i].shape);
        target.at(gold_labels[i]) = 1.0;
        d_word_probs[i] = Tensor::zeros(s.word_probs[i].shape);
        cross_entropy_backward(s.word_probs[i], target, loss_scale, d_word_probs[i]);
    }
    detail::backward_from_word_probs(p, s, d_word_probs, grads);
}

// Label-set decoding. Threshold mode keeps every label at or above theta,
// falls back to the argmax when none qualifies, and lets a selected 'und'
// suppress the rest. Argmax mode returns exactly one label.
inline std::vector<std::string> decode_labels(
    const Tensor& probs, const std::vector<std::string>& label_names,
    bool threshold_mode = false, double theta = 0.5) {
    Tensor::require(static_cast<std::size_t>(probs.dim(0)) == label_names.size(),
                    "decode_labels: label count mismatch");
    int argmax = 0;
    for (int i = 1; i < probs.dim(0); ++i) {
        if (probs.at(i) > probs.at(argmax)) argmax = i;
    }
    if (!threshold_mode) return {label_names[static_cast<std::size_t>(argmax)]};

    std::vector<std::pair<double, int>> picked;
    for (int i = 0; i < probs.dim(0); ++i) {
        if (probs.at(i) >= theta) picked.emplace_back(-probs.at(i), i);
    }
    if (picked.empty()) picked.emplace_back(-probs.at(argmax), argmax);
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> out;
    for (const auto& [neg, i] : picked) {
        out.push_back(label_names[static_cast<std::size_t>(i)]);
    }
    for (const std::string& l : out) {
        if (l == kUndLabel) return {kUndLabel};
    }
    return out;
}

}  // namespace langid
