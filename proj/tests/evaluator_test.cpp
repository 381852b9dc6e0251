#include "langid/evaluator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace langid;

namespace {

GoldLabel gl(const std::string& s) { return GoldLabel::parse(s); }

TEST(GoldLabelParse, AllKinds) {
    EXPECT_EQ(gl("es").kind, GoldLabel::Kind::Single);
    EXPECT_EQ(gl("es").languages, std::vector<std::string>{"es"});
    EXPECT_EQ(gl("und").kind, GoldLabel::Kind::Und);
    EXPECT_TRUE(gl("und").languages.empty());

    GoldLabel amb = gl("es/ca");
    EXPECT_EQ(amb.kind, GoldLabel::Kind::Ambiguous);
    EXPECT_EQ(amb.languages, (std::vector<std::string>{"ca", "es"}));

    GoldLabel multi = gl("es+en");
    EXPECT_EQ(multi.kind, GoldLabel::Kind::Multi);
    EXPECT_EQ(multi.languages, (std::vector<std::string>{"en", "es"}));

    EXPECT_EQ(gl("ca/es").to_string(), "ca/es");
    EXPECT_EQ(gl("pt+gl+eu").to_string(), "eu+gl+pt");

    EXPECT_THROW(gl(""), std::invalid_argument);
    EXPECT_THROW(gl("es/"), std::invalid_argument);
    EXPECT_THROW(gl("es/en+ca"), std::invalid_argument);
    EXPECT_THROW(gl("es/es"), std::invalid_argument);
}

TEST(ScoreTweetlid, SpecRules) {
    // gold amb{es,ca}, pred {es} -> correct for 'amb'
    ScoreReport r1 = score_tweetlid({gl("es/ca")}, {{"es"}});
    EXPECT_EQ(r1.per_category.at("amb").tp, 1);
    EXPECT_EQ(r1.correct, 1);
    EXPECT_EQ(r1.per_category.count("es"), 0u);  // languages untouched by amb rows

    // gold multi{es,en}, pred {es} -> incorrect (en missing)
    ScoreReport r2 = score_tweetlid({gl("es+en")}, {{"es"}});
    EXPECT_EQ(r2.correct, 0);
    EXPECT_EQ(r2.per_category.at("es").tp, 1);
    EXPECT_EQ(r2.per_category.at("en").fn, 1);

    // multi fully covered (with an extra label) is correct
    ScoreReport r3 = score_tweetlid({gl("es+en")}, {{"en", "es", "ca"}});
    EXPECT_EQ(r3.correct, 1);
    EXPECT_EQ(r3.per_category.at("ca").fp, 1);

    // all predictions equal to gold singletons -> macro F1 1.0
    ScoreReport r4 = score_tweetlid({gl("es"), gl("en"), gl("pt")},
                                    {{"es"}, {"en"}, {"pt"}});
    EXPECT_DOUBLE_EQ(r4.macro_f1(), 1.0);

    // und must be predicted exactly
    ScoreReport r5 = score_tweetlid({gl("und"), gl("und")}, {{"und"}, {"es"}});
    EXPECT_EQ(r5.per_category.at("und").tp, 1);
    EXPECT_EQ(r5.per_category.at("und").fn, 1);
}

TEST(ScoreTweetlid, UndPredictionIsExclusive) {
    // A degenerate {und, es} prediction is normalized to {und}.
    ScoreReport r = score_tweetlid({gl("es")}, {{"und", "es"}});
    EXPECT_EQ(r.correct, 0);
    EXPECT_EQ(r.per_category.at("es").fn, 1);
    EXPECT_EQ(r.per_category.at("und").fp, 1);
}

TEST(ScoreTweetlid, LengthMismatchRejected) {
    EXPECT_THROW(score_tweetlid({gl("es")}, {}), std::invalid_argument);
}

TEST(ScoreSingleLabel, HandComputedMacro) {
    // Two balanced classes, everything predicted as "a":
    // a: P=1/2, R=1 -> F1=2/3; b: F1=0. Macro = 1/3.
    std::vector<std::string> gold = {"a", "a", "b", "b"};
    std::vector<std::string> pred = {"a", "a", "a", "a"};
    ScoreReport r = score_single_label(gold, pred);
    EXPECT_NEAR(r.per_category.at("a").f1(), 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.per_category.at("b").f1(), 0.0);
    EXPECT_NEAR(r.macro_f1(), 1.0 / 3.0, 1e-15);

    // Perfect predictions.
    EXPECT_DOUBLE_EQ(score_single_label(gold, gold).macro_f1(), 1.0);

    // Predictions disjoint from gold categories -> macro 0.
    ScoreReport r3 = score_single_label({"a", "b"}, {"c", "c"});
    EXPECT_DOUBLE_EQ(r3.macro_f1(), 0.0);
}

TEST(ScoreWords, PerClassF1) {
    // 1 of 2 tokens of class X found, no false positives: P=1, R=1/2 -> 2/3.
    std::vector<std::vector<std::string>> gold = {{"x", "x", "o"}};
    std::vector<std::vector<std::string>> pred = {{"x", "o", "o"}};
    ScoreReport r = score_words(gold, pred);
    EXPECT_NEAR(r.per_category.at("x").f1(), 2.0 / 3.0, 1e-15);

    EXPECT_DOUBLE_EQ(score_words(gold, gold).macro_f1(), 1.0);

    // Class absent from both gold and predictions never appears.
    EXPECT_EQ(r.per_category.count("zz"), 0u);

    EXPECT_THROW(score_words({{"x"}}, {{"x", "o"}}), std::invalid_argument);
}

// Naive independent tally: recompute per-category F1 from scratch with
// flat counting loops and compare.
TEST(Scores, MatchIndependentTally) {
    std::mt19937_64 rng(77);
    std::vector<std::string> langs = {"es", "en", "ca", "pt"};
    std::vector<std::string> gold, pred;
    for (int i = 0; i < 500; ++i) {
        gold.push_back(langs[rng() % langs.size()]);
        pred.push_back(langs[rng() % langs.size()]);
    }
    ScoreReport r = score_single_label(gold, pred);
    for (const std::string& lang : langs) {
        long long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (gold[i] == lang && pred[i] == lang) ++tp;
            if (gold[i] != lang && pred[i] == lang) ++fp;
            if (gold[i] == lang && pred[i] != lang) ++fn;
        }
        double p = tp + fp ? double(tp) / (tp + fp) : 0.0;
        double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
        double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
        EXPECT_NEAR(r.per_category.at(lang).f1(), f1, 1e-15) << lang;
    }
}

TEST(Scores, PermutationInvariant) {
    std::mt19937_64 rng(78);
    std::vector<GoldLabel> gold;
    std::vector<std::vector<std::string>> pred;
    std::vector<std::string> langs = {"es", "en", "ca"};
    for (int i = 0; i < 200; ++i) {
        switch (rng() % 4) {
            case 0: gold.push_back(gl(langs[rng() % 3])); break;
            case 1: gold.push_back(gl("es/ca")); break;
            case 2: gold.push_back(gl("es+en")); break;
            default: gold.push_back(gl("und")); break;
        }
        std::vector<std::string> p = {langs[rng() % 3]};
        if (rng() % 4 == 0) p.push_back(langs[rng() % 3]);
        if (rng() % 8 == 0) p = {"und"};
        pred.push_back(p);
    }
    double before = score_tweetlid(gold, pred).macro_f1();

    std::vector<std::size_t> perm(gold.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<GoldLabel> g2;
    std::vector<std::vector<std::string>> p2;
    for (std::size_t i : perm) {
        g2.push_back(gold[i]);
        p2.push_back(pred[i]);
    }
    EXPECT_DOUBLE_EQ(score_tweetlid(g2, p2).macro_f1(), before);
}

TEST(Scores, AddingCorrectExampleNeverHurts) {
    std::vector<GoldLabel> gold = {gl("es"), gl("en"), gl("und")};
    std::vector<std::vector<std::string>> pred = {{"es"}, {"es"}, {"und"}};
    ScoreReport before = score_tweetlid(gold, pred);
    gold.push_back(gl("en"));
    pred.push_back({"en"});
    ScoreReport after = score_tweetlid(gold, pred);
    for (const auto& [cat, s] : before.per_category) {
        EXPECT_GE(after.per_category.at(cat).f1() + 1e-15, s.f1()) << cat;
    }
}

TEST(Report, RenderedFormats) {
    ScoreReport r = score_single_label({"a", "b"}, {"a", "b"});
    std::string table = r.table();
    EXPECT_NE(table.find("macro-F1"), std::string::npos);
    std::string kv = r.key_values();
    EXPECT_NE(kv.find("macro_f1 1"), std::string::npos);
    EXPECT_NE(kv.find("accuracy 1"), std::string::npos);
}

}  // namespace
