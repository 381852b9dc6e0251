#include "langid/dataset.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "langid/text_pipeline.hpp"
#include "test_util.hpp"

using namespace langid;

namespace {

TEST(LoadTweets, ParsesAllLabelKinds) {
    std::istringstream in(
        "1\tes\thola\n"
        "2\tes/ca\tbon dia\n"
        "3\tes+en\thola friend\n"
        "4\tund\t:) :) :)\n");
    TweetLoadResult r = load_tweets(in);
    ASSERT_EQ(r.records.size(), 4u);
    EXPECT_EQ(r.records[0].gold.kind, GoldLabel::Kind::Single);
    EXPECT_EQ(r.records[1].gold.kind, GoldLabel::Kind::Ambiguous);
    EXPECT_EQ(r.records[1].gold.languages, (std::vector<std::string>{"ca", "es"}));
    EXPECT_EQ(r.records[2].gold.kind, GoldLabel::Kind::Multi);
    EXPECT_EQ(r.records[3].gold.kind, GoldLabel::Kind::Und);
    EXPECT_EQ(r.records[2].text, "hola friend");
}

TEST(LoadTweets, StrictModeFailsOnMalformed) {
    std::istringstream bad("1\tes\thola\nbroken line\n2\tes\tbuenas\n");
    EXPECT_THROW(load_tweets(bad), std::runtime_error);

    std::istringstream again("1\tes\thola\nbroken line\n2\tes\tbuenas\n");
    LoadOptions lenient;
    lenient.lenient = true;
    TweetLoadResult r = load_tweets(again, lenient);
    EXPECT_EQ(r.records.size(), 2u);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].first, 2u);
}

TEST(LoadTweets, InventoryValidation) {
    std::set<std::string> inv = {"es", "en"};
    LoadOptions opts;
    opts.inventory = &inv;
    std::istringstream in("1\tfr\tbonjour\n");
    EXPECT_THROW(load_tweets(in, opts), std::runtime_error);
}

TEST(LoadTweets, RoundTrip) {
    std::istringstream in(
        "10\tes\thola amigo\n"
        "11\tca/es\tbon dia\n"
        "12\ten+pt\tday noite\n"
        "13\tund\t123 456\n");
    TweetLoadResult r = load_tweets(in);
    std::ostringstream out;
    save_tweets(out, r.records);
    std::istringstream in2(out.str());
    TweetLoadResult r2 = load_tweets(in2);
    ASSERT_EQ(r.records.size(), r2.records.size());
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        EXPECT_EQ(r.records[i].id, r2.records[i].id);
        EXPECT_EQ(r.records[i].gold.to_string(), r2.records[i].gold.to_string());
        EXPECT_EQ(r.records[i].text, r2.records[i].text);
    }
    std::ostringstream out2;
    save_tweets(out2, r2.records);
    EXPECT_EQ(out.str(), out2.str());
}

TEST(SplitByIdDigit, SpecExamplesAndPartition) {
    std::vector<TextRecord> records;
    for (int i = 0; i < 100; ++i) {
        records.push_back({std::to_string(12300 + i), GoldLabel::parse("es"), "x"});
    }
    CorpusSplit s = split_by_id_digit(records);
    EXPECT_EQ(s.test.size(), 10u);
    EXPECT_EQ(s.dev.size(), 10u);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.test.front().id, "12300");
    EXPECT_EQ(s.dev.front().id, "12301");
    EXPECT_EQ(split_by_id_digit({{"12340", GoldLabel::parse("es"), "x"}}).test.size(), 1u);
    EXPECT_EQ(split_by_id_digit({{"12341", GoldLabel::parse("es"), "x"}}).dev.size(), 1u);
    EXPECT_EQ(split_by_id_digit({{"12347", GoldLabel::parse("es"), "x"}}).train.size(), 1u);
    // Disjoint and exhaustive.
    EXPECT_EQ(s.test.size() + s.dev.size() + s.train.size(), records.size());
}

TEST(FragmentCorpus, SplitsLongParagraph) {
    std::string para;
    for (int i = 0; i < 30; ++i) para += "uno dos tres. ";  // ~420 chars
    std::vector<std::string> frags = fragment_corpus(para, 140);
    EXPECT_GE(frags.size(), 2u);
    for (const std::string& f : frags) {
        EXPECT_LE(decode_utf8(f).size(), 140u);
        EXPECT_FALSE(normalize(f).empty());
    }
}

TEST(FragmentCorpus, ShortTextSingleFragmentAndCap) {
    std::vector<std::string> one = fragment_corpus("just a short line", 140);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0], "just a short line");

    std::string para;
    for (int i = 0; i < 50; ++i) para += "uno dos tres. ";
    EXPECT_EQ(fragment_corpus(para, 140, 1).size(), 1u);
}

TEST(FragmentCorpus, HardSplitsUnboundedText) {
    std::string blob(500, 'x');  // no sentence boundary at all
    std::vector<std::string> frags = fragment_corpus(blob, 140);
    ASSERT_GE(frags.size(), 3u);
    for (const std::string& f : frags) EXPECT_LE(decode_utf8(f).size(), 140u);
}

TEST(FragmentCorpus, EmittedTextSurvivesNormalize) {
    std::mt19937_64 rng(55);
    std::string blob;
    for (int i = 0; i < 200; ++i) {
        blob += testutil::fuzz_string(rng);
        blob += (rng() % 3 == 0) ? ". " : " ";
    }
    for (const std::string& f : fragment_corpus(blob, 140)) {
        NormalizedText t = normalize(f);  // must not throw
        for (const auto& tok : t.tokens) EXPECT_FALSE(tok.empty());
    }
}

TEST(TokenFile, RoundTrip) {
    std::istringstream in(
        "Hola\tes\n"
        "my\ten\n"
        "friend\ten\n"
        "\n"
        "@user\tother\n"
        "gracias\tes\n");
    std::vector<TokenRecord> records = load_token_file(in);
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].tokens, (std::vector<std::string>{"Hola", "my", "friend"}));
    EXPECT_EQ(records[0].tags, (std::vector<std::string>{"es", "en", "en"}));
    EXPECT_EQ(records[1].tokens.size(), 2u);

    std::ostringstream out;
    save_token_file(out, records);
    std::istringstream in2(out.str());
    std::vector<TokenRecord> again = load_token_file(in2);
    ASSERT_EQ(again.size(), records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(again[i].tokens, records[i].tokens);
        EXPECT_EQ(again[i].tags, records[i].tags);
    }
}

TEST(TokenFile, MalformedLines) {
    std::istringstream bad("token-without-tag\n");
    EXPECT_THROW(load_token_file(bad), std::runtime_error);

    std::istringstream empty_tok("\tes\n");
    EXPECT_THROW(load_token_file(empty_tok), std::runtime_error);
}

}  // namespace
