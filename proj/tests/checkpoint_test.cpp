#include "langid/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

using namespace langid;

namespace {

Checkpoint make_checkpoint(std::uint64_t seed) {
    std::vector<NormalizedText> corpus;
    for (char c = 'a'; c <= 'h'; ++c) corpus.push_back(normalize(std::string(3, c)));
    Checkpoint ckpt;
    ckpt.vocab = build_vocab(corpus);
    ckpt.labels = {"aa", "und", "zz"};
    ModelConfig cfg;
    cfg.n1 = 4;
    cfg.n2 = 3;
    cfg.lstm = 5;
    cfg.dropout = 0.3;
    Rng rng(seed);
    ckpt.params = ModelParams::init(cfg, ckpt.vocab.d, ckpt.vocab.size(), 3, rng);
    ckpt.meta.seed = seed;
    ckpt.meta.steps = 123;
    ckpt.meta.learning_rate = 0.00125;
    ckpt.meta.batch_size = 17;
    ckpt.meta.head = "sentence";
    return ckpt;
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    auto dir = testutil::temp_dir("ckpt");
    auto path1 = (dir / "a.ckpt").string();
    auto path2 = (dir / "b.ckpt").string();

    Checkpoint ckpt = make_checkpoint(9);
    save_checkpoint(path1, ckpt);
    Checkpoint loaded = load_checkpoint(path1);
    save_checkpoint(path2, loaded);

    EXPECT_EQ(testutil::read_file(path1), testutil::read_file(path2));
    EXPECT_EQ(loaded.labels, ckpt.labels);
    EXPECT_EQ(loaded.meta.steps, ckpt.meta.steps);
    EXPECT_EQ(loaded.meta.head, ckpt.meta.head);
    EXPECT_DOUBLE_EQ(loaded.meta.learning_rate, ckpt.meta.learning_rate);
    auto a = ckpt.params.tensor_list();
    auto b = loaded.params.tensor_list();
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].second->data, b[i].second->data) << a[i].first;
    }
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, PredictionsSurviveRoundTrip) {
    auto dir = testutil::temp_dir("ckpt_pred");
    auto path = (dir / "m.ckpt").string();
    Checkpoint ckpt = make_checkpoint(10);
    save_checkpoint(path, ckpt);
    Checkpoint loaded = load_checkpoint(path);

    std::vector<std::u32string> words = {U"abc", U"ded"};
    Prediction p1 = predict_sentence(ckpt.params, words, ckpt.vocab);
    Prediction p2 = predict_sentence(loaded.params, words, loaded.vocab);
    EXPECT_EQ(p1.sentence_probs.data, p2.sentence_probs.data);
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RefusesVersionAndTamper) {
    auto dir = testutil::temp_dir("ckpt_bad");
    auto path = (dir / "m.ckpt").string();
    Checkpoint ckpt = make_checkpoint(11);
    save_checkpoint(path, ckpt);

    std::string body = testutil::read_file(path);

    // Wrong version.
    std::string bad_version = body;
    bad_version.replace(bad_version.find("v1"), 2, "v9");
    testutil::write_file(dir / "bad_version.ckpt", bad_version);
    EXPECT_THROW(load_checkpoint((dir / "bad_version.ckpt").string()),
                 std::runtime_error);

    // Edited vocab invalidates the recorded hash.
    std::string bad_vocab = body;
    auto pos = bad_vocab.find("charvocab v1");
    ASSERT_NE(pos, std::string::npos);
    std::size_t entry = bad_vocab.find('\n', pos) + 1;
    bad_vocab[entry] = bad_vocab[entry] == '7' ? '8' : '7';
    testutil::write_file(dir / "bad_vocab.ckpt", bad_vocab);
    EXPECT_THROW(load_checkpoint((dir / "bad_vocab.ckpt").string()),
                 std::runtime_error);

    // Truncated tensor data.
    std::string truncated = body.substr(0, body.size() - 16);
    testutil::write_file(dir / "trunc.ckpt", truncated);
    EXPECT_THROW(load_checkpoint((dir / "trunc.ckpt").string()), std::runtime_error);

    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, VocabMismatchDetected) {
    Checkpoint ckpt = make_checkpoint(12);
    std::vector<NormalizedText> other;
    for (char c = 'p'; c <= 'w'; ++c) other.push_back(normalize(std::string(3, c)));
    CharVocab different = build_vocab(other);
    EXPECT_THROW(verify_vocab_match(ckpt, different), std::runtime_error);
    EXPECT_NO_THROW(verify_vocab_match(ckpt, ckpt.vocab));
}

}  // namespace
