#include "langid/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "langid/grad_check.hpp"

using namespace langid;

namespace {

CharVocab small_vocab() {
    // 'a'..'f' seen twice each -> |C| = 8 (6 + UNK + PAD), d = 3.
    std::vector<NormalizedText> corpus;
    for (char c = 'a'; c <= 'f'; ++c) {
        corpus.push_back(normalize(std::string(2, c)));
    }
    return build_vocab(corpus);
}

std::vector<std::u32string> words_of(std::initializer_list<const char*> ws) {
    std::vector<std::u32string> out;
    for (const char* w : ws) out.push_back(decode_utf8(w));
    return out;
}

TEST(Shapes, PaperSettingsAlgebra) {
    // n1=50, n2=93, lstm=23; a 7-character word gives T1 with 7 columns
    // and second-layer outputs of widths 5/4/3; dim(z) = 3*93 = 279.
    ModelConfig cfg;
    cfg.n1 = 50;
    cfg.n2 = 93;
    cfg.lstm = 23;
    CharVocab vocab = small_vocab();
    Rng rng(1);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 6, rng);

    SentenceTrace t = forward(p, words_of({"abcdefa"}), vocab);
    const WordTrace& w = t.words[0];
    EXPECT_EQ(w.embedded.shape, (std::vector<int>{vocab.d, 9}));
    EXPECT_EQ(w.t1.shape, (std::vector<int>{50, 7}));
    EXPECT_EQ(w.t2_3.shape, (std::vector<int>{93, 5}));
    EXPECT_EQ(w.t2_4.shape, (std::vector<int>{93, 4}));
    EXPECT_EQ(w.t2_5.shape, (std::vector<int>{93, 3}));
    EXPECT_EQ(w.y.shape, (std::vector<int>{279}));
    EXPECT_EQ(w.z.shape, (std::vector<int>{279}));
    EXPECT_EQ(t.context[0].shape, (std::vector<int>{46}));
    EXPECT_EQ(t.word_probs[0].shape, (std::vector<int>{6}));

    // Parameter count from the shape algebra:
    //   Q 10x956? here: d x |C|, plus convs, residual, both LSTMs, output.
    std::int64_t expected = 0;
    for (const auto& [name, tensor] : p.tensor_list()) {
        expected += static_cast<std::int64_t>(tensor->element_count());
    }
    EXPECT_EQ(p.parameter_count(), expected);
    EXPECT_GT(p.parameter_count(), 100000);
}

TEST(Shapes, ShortWordsPaddedForWidestFilter) {
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    CharVocab vocab = small_vocab();
    Rng rng(2);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 4, rng);

    for (const char* word : {"a", "ab", "abc", "abcd"}) {
        SentenceTrace t = forward(p, words_of({word}), vocab);
        EXPECT_GE(t.words[0].t1.dim(1), 5) << word;
        EXPECT_EQ(t.words[0].z.dim(0), 9);
        for (double v : t.words[0].z.data) EXPECT_TRUE(std::isfinite(v));
    }
    EXPECT_THROW(forward(p, {std::u32string()}, vocab), std::invalid_argument);
    EXPECT_THROW(forward(p, {}, vocab), std::invalid_argument);
}

TEST(Forward, DeterministicInEvalMode) {
    ModelConfig cfg;
    cfg.n1 = 5;
    cfg.n2 = 4;
    cfg.lstm = 6;
    CharVocab vocab = small_vocab();
    Rng rng(3);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 3, rng);
    auto words = words_of({"abc", "de", "ffa"});
    SentenceTrace a = forward(p, words, vocab);
    SentenceTrace b = forward(p, words, vocab);
    EXPECT_EQ(a.sentence_probs.data, b.sentence_probs.data);
    for (std::size_t i = 0; i < words.size(); ++i) {
        EXPECT_EQ(a.words[i].z.data, b.words[i].z.data);
    }
}

TEST(Forward, UnknownCharactersUseUnk) {
    ModelConfig cfg;
    cfg.n1 = 3;
    cfg.n2 = 2;
    cfg.lstm = 4;
    CharVocab vocab = small_vocab();
    Rng rng(4);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 3, rng);
    // "xyz" shares no characters with the vocabulary; "é" is multi-byte.
    Tensor z1 = encode_word_vector(p, decode_utf8("xyz"), vocab);
    Tensor z2 = encode_word_vector(p, decode_utf8("\xC3\xA9\xC3\xA9\xC3\xA9"), vocab);
    EXPECT_EQ(z1.data, z2.data);  // same UNK index stream
}

TEST(Forward, ReversedWordsSwapDirections) {
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    CharVocab vocab = small_vocab();
    Rng rng(5);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 3, rng);
    // Give both directions identical parameters so the mirror symmetry is
    // observable from outside.
    p.bwd_lstm = p.fwd_lstm;

    auto words = words_of({"abc", "def", "fade", "cab"});
    auto rev = words;
    std::reverse(rev.begin(), rev.end());
    SentenceTrace fwd = forward(p, words, vocab);
    SentenceTrace bwd = forward(p, rev, vocab);

    int H = cfg.lstm;
    std::size_t T = words.size();
    for (std::size_t i = 0; i < T; ++i) {
        for (int k = 0; k < H; ++k) {
            // Forward half of the reversed run mirrors the backward half
            // of the original run, and vice versa.
            EXPECT_NEAR(bwd.context[i].at(k), fwd.context[T - 1 - i].at(H + k), 1e-12);
            EXPECT_NEAR(bwd.context[i].at(H + k), fwd.context[T - 1 - i].at(k), 1e-12);
        }
    }
}

TEST(Forward, ZeroLstmWeightsGiveZeroContext) {
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    CharVocab vocab = small_vocab();
    Rng rng(6);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 3, rng);
    p.fwd_lstm = LstmParams::zeros(cfg.word_dim(), cfg.lstm);
    p.bwd_lstm = LstmParams::zeros(cfg.word_dim(), cfg.lstm);
    for (const Tensor& v : encode_sequence(p, words_of({"abc", "de"}), vocab)) {
        for (double x : v.data) EXPECT_DOUBLE_EQ(x, 0.0);
    }
}

TEST(Prediction, SentenceAverageAndConvexity) {
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    CharVocab vocab = small_vocab();
    Rng rng(7);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 5, rng);
    Prediction pred = predict_sentence(p, words_of({"abc", "def", "ace"}), vocab);

    double sum = 0.0;
    for (int l = 0; l < 5; ++l) {
        double mean = 0.0, lo = 1.0, hi = 0.0;
        for (const Tensor& wp : pred.word_probs) {
            mean += wp.at(l);
            lo = std::min(lo, wp.at(l));
            hi = std::max(hi, wp.at(l));
        }
        mean /= static_cast<double>(pred.word_probs.size());
        EXPECT_NEAR(pred.sentence_probs.at(l), mean, 1e-12);
        EXPECT_GE(pred.sentence_probs.at(l), lo - 1e-12);
        EXPECT_LE(pred.sentence_probs.at(l), hi + 1e-12);
        sum += pred.sentence_probs.at(l);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Losses, HandValues) {
    // Zero parameters -> every distribution is uniform.
    ModelConfig cfg;
    cfg.n1 = 2;
    cfg.n2 = 2;
    cfg.lstm = 3;
    CharVocab vocab = small_vocab();
    ModelParams p = ModelParams::zeros(cfg, vocab.d, vocab.size(), 6);
    SentenceTrace t = forward(p, words_of({"ab", "cd"}), vocab);

    // Uniform gold over 2 of 6 languages against a uniform prediction.
    Tensor gold = Tensor::zeros({6});
    gold.at(0) = 0.5;
    gold.at(3) = 0.5;
    EXPECT_NEAR(sentence_loss(t, gold), std::log(6.0), 1e-12);

    // One-hot gold against p = 1/6.
    Tensor onehot = Tensor::zeros({6});
    onehot.at(2) = 1.0;
    EXPECT_NEAR(sentence_loss(t, onehot), std::log(6.0), 1e-12);

    // Word loss: uniform over 6 classes, two words -> 2 ln 6.
    EXPECT_NEAR(word_loss(t, {1, 4}), 2.0 * std::log(6.0), 1e-12);
    EXPECT_THROW(word_loss(t, {1}), std::invalid_argument);
}

TEST(Losses, WordLossPermutationCovariant) {
    ModelConfig cfg;
    cfg.n1 = 3;
    cfg.n2 = 3;
    cfg.lstm = 4;
    CharVocab vocab = small_vocab();
    Rng rng(8);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 4, rng);
    SentenceTrace t = forward(p, words_of({"ab", "cdef", "fa"}), vocab);
    std::vector<int> labels = {0, 2, 3};
    double base = word_loss(t, labels);

    // Permute the per-word predictions together with their labels.
    SentenceTrace shuffled = t;
    std::swap(shuffled.word_probs[0], shuffled.word_probs[2]);
    std::vector<int> perm_labels = {3, 2, 0};
    EXPECT_NEAR(word_loss(shuffled, perm_labels), base, 1e-12);
}

TEST(Losses, ContextSensitivity) {
    // Word-level predictions see the whole tweet through the biLSTM:
    // changing word 2 changes the distribution for word 1.
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    CharVocab vocab = small_vocab();
    Rng rng(9);
    ModelParams p = ModelParams::init(cfg, vocab.d, vocab.size(), 3, rng);
    SentenceTrace a = forward(p, words_of({"abc", "def"}), vocab);
    SentenceTrace b = forward(p, words_of({"abc", "fed"}), vocab);
    double diff = 0.0;
    for (int l = 0; l < 3; ++l) {
        diff += std::fabs(a.word_probs[0].at(l) - b.word_probs[0].at(l));
    }
    EXPECT_GT(diff, 0.0);
}

TEST(DecodeLabels, ModesAndUndSuppression) {
    std::vector<std::string> names = {"es", "en", "ca"};
    Tensor p = Tensor::zeros({3});
    p.data = {0.5, 0.3, 0.2};
    EXPECT_EQ(decode_labels(p, names), std::vector<std::string>{"es"});
    EXPECT_EQ(decode_labels(p, names, true, 0.25),
              (std::vector<std::string>{"es", "en"}));
    // Threshold above the max falls back to the argmax singleton.
    EXPECT_EQ(decode_labels(p, names, true, 0.9), std::vector<std::string>{"es"});

    std::vector<std::string> with_und = {"es", "und", "ca"};
    Tensor q = Tensor::zeros({3});
    q.data = {0.4, 0.35, 0.25};
    EXPECT_EQ(decode_labels(q, with_und, true, 0.3),
              std::vector<std::string>{"und"});
}

// End-to-end gradient checks on a 3-word, 6-language model with dropout
// active and masks frozen from the first pass. Parameters are drawn at a
// generic scale: near-zero init leaves many ReLU pre-activations within h
// of the kink, where central differences are meaningless.
class EndToEndGrad : public ::testing::Test {
  protected:
    void SetUp() override {
        cfg_.n1 = 4;
        cfg_.n2 = 3;
        cfg_.lstm = 5;
        cfg_.dropout = 0.25;
        vocab_ = small_vocab();
        params_ = ModelParams::zeros(cfg_, vocab_.d, vocab_.size(), 6);
        Rng rng(15);
        for (auto& [name, t] : params_.tensor_list()) {
            for (double& v : t->data) v = rng.uniform(-0.5, 0.5);
        }
        words_ = words_of({"abca", "de", "fabe"});
        Rng mask_rng(11);
        base_ = forward(params_, words_, vocab_, true, &mask_rng);
    }

    ModelConfig cfg_;
    CharVocab vocab_;
    ModelParams params_ = ModelParams::zeros(ModelConfig{}, 1, 1, 1);
    std::vector<std::u32string> words_;
    SentenceTrace base_;
};

TEST_F(EndToEndGrad, SentenceLoss) {
    Tensor gold = Tensor::zeros({6});
    gold.at(1) = 0.5;
    gold.at(4) = 0.5;

    SentenceTrace t = forward(params_, words_, vocab_, true, nullptr, &base_);
    ModelParams grads = ModelParams::zeros_like(params_);
    backward_sentence(params_, t, gold, grads);

    auto loss = [&]() {
        SentenceTrace rt = forward(params_, words_, vocab_, true, nullptr, &base_);
        return sentence_loss(rt, gold);
    };
    std::vector<const Tensor*> glist;
    for (auto& [name, g] : grads.tensor_list()) glist.push_back(g);
    auto report = grad_check(loss, params_.tensor_list(), glist);
    EXPECT_LT(report.max_rel_err, 1e-4)
        << report.worst_tensor << "[" << report.worst_index << "] analytic "
        << report.analytic_at_worst << " numeric " << report.numeric_at_worst;
}

TEST_F(EndToEndGrad, WordLoss) {
    std::vector<int> labels = {0, 3, 5};
    SentenceTrace t = forward(params_, words_, vocab_, true, nullptr, &base_);
    ModelParams grads = ModelParams::zeros_like(params_);
    backward_word(params_, t, labels, grads);

    auto loss = [&]() {
        SentenceTrace rt = forward(params_, words_, vocab_, true, nullptr, &base_);
        return word_loss(rt, labels);
    };
    std::vector<const Tensor*> glist;
    for (auto& [name, g] : grads.tensor_list()) glist.push_back(g);
    auto report = grad_check(loss, params_.tensor_list(), glist);
    EXPECT_LT(report.max_rel_err, 1e-4)
        << report.worst_tensor << "[" << report.worst_index << "] analytic "
        << report.analytic_at_worst << " numeric " << report.numeric_at_worst;
}

}  // namespace
