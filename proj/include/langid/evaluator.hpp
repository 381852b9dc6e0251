// Scoring under TweetLID label semantics (ambiguous / multi-label /
// undetermined), plain single-label scoring, and token-level scoring for
// code-switched text.
#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace langid {

inline const std::string kUndLabel = "und";

struct GoldLabel {
    enum class Kind { Single, Ambiguous, Multi, Und };

    Kind kind = Kind::Single;
    std::vector<std::string> languages;  // sorted, unique; empty for Und

    // Label field syntax: "es", "und", "es/ca" (ambiguous), "es+en" (multi).
    static GoldLabel parse(const std::string& field) {
        if (field.empty()) throw std::invalid_argument("empty label field");
        if (field == kUndLabel) return {Kind::Und, {}};
        char sep = 0;
        if (field.find('/') != std::string::npos) sep = '/';
        if (field.find('+') != std::string::npos) {
            if (sep) throw std::invalid_argument("label mixes '/' and '+': " + field);
            sep = '+';
        }
        GoldLabel out;
        if (!sep) {
            out.kind = Kind::Single;
            out.languages = {field};
            return out;
        }
        out.kind = sep == '/' ? Kind::Ambiguous : Kind::Multi;
        std::string part;
        std::istringstream ss(field);
        while (std::getline(ss, part, sep)) {
            if (part.empty() || part == kUndLabel) {
                throw std::invalid_argument("bad label component in: " + field);
            }
            out.languages.push_back(part);
        }
        std::sort(out.languages.begin(), out.languages.end());
        out.languages.erase(
            std::unique(out.languages.begin(), out.languages.end()),
            out.languages.end());
        if (out.languages.size() < 2) {
            throw std::invalid_argument("ambiguous/multi label needs >= 2 languages: " + field);
        }
        return out;
    }

    std::string to_string() const {
        if (kind == Kind::Und) return kUndLabel;
        std::string sep = kind == Kind::Ambiguous ? "/" : "+";
        std::string out;
        for (std::size_t i = 0; i < languages.size(); ++i) {
            if (i) out += sep;
            out += languages[i];
        }
        return out;
    }
};

struct CategoryScore {
    std::int64_t tp = 0, fp = 0, fn = 0;
    std::int64_t gold_count = 0;

    double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
    double f1() const {
        double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
};

struct ScoreReport {
    std::map<std::string, CategoryScore> per_category;
    std::map<std::pair<std::string, std::string>, std::int64_t> confusion;
    std::int64_t examples = 0;
    std::int64_t correct = 0;

    // Unweighted mean F1 over categories with at least one gold example.
    double macro_f1() const {
        double sum = 0.0;
        int n = 0;
        for (const auto& [cat, s] : per_category) {
            if (s.gold_count > 0) {
                sum += s.f1();
                ++n;
            }
        }
        return n == 0 ? 0.0 : sum / n;
    }

    double accuracy() const {
        return examples == 0 ? 0.0 : double(correct) / double(examples);
    }

    std::string table() const {
        std::ostringstream os;
        os << std::left << std::setw(10) << "category" << std::right
           << std::setw(8) << "gold" << std::setw(10) << "P" << std::setw(10)
           << "R" << std::setw(10) << "F1" << "\n";
        for (const auto& [cat, s] : per_category) {
            os << std::left << std::setw(10) << cat << std::right
               << std::setw(8) << s.gold_count << std::fixed
               << std::setprecision(4) << std::setw(10) << s.precision()
               << std::setw(10) << s.recall() << std::setw(10) << s.f1()
               << "\n";
        }
        os << std::left << std::setw(10) << "macro-F1" << std::right
           << std::setw(38) << std::fixed << std::setprecision(4) << macro_f1()
           << "\n";
        return os.str();
    }

    std::string key_values() const {
        std::ostringstream os;
        os << std::setprecision(17);
        for (const auto& [cat, s] : per_category) {
            os << "f1." << cat << " " << s.f1() << "\n";
        }
        os << "macro_f1 " << macro_f1() << "\n";
        os << "accuracy " << accuracy() << "\n";
        os << "examples " << examples << "\n";
        return os.str();
    }
};

namespace detail {

// A predicted set containing 'und' plus languages is degenerate; score it
// as a bare 'und' prediction.
inline std::set<std::string> normalize_pred(const std::vector<std::string>& pred,
                                            bool* warned) {
    std::set<std::string> s(pred.begin(), pred.end());
    if (s.count(kUndLabel) && s.size() > 1) {
        if (warned && !*warned) {
            std::cerr << "warning: prediction mixes 'und' with languages; "
                         "treating as 'und'\n";
            *warned = true;
        }
        return {kUndLabel};
    }
    return s;
}

}  // namespace detail

// TweetLID semantics. Correctness: single -> exact singleton; ambiguous ->
// any listed language; multi -> all listed languages; und -> exactly
// {'und'}. Ambiguous examples tally into the 'amb' category only;
// language categories accumulate from single/multi examples.
inline ScoreReport score_tweetlid(const std::vector<GoldLabel>& gold,
                                  const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("score_tweetlid: gold/pred length mismatch");
    }
    ScoreReport report;
    bool warned = false;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const GoldLabel& g = gold[i];
        std::set<std::string> p = detail::normalize_pred(pred[i], &warned);
        report.examples += 1;
        report.confusion[{g.to_string(), [&] {
                              std::string s;
                              for (const auto& l : p) s += (s.empty() ? "" : "+") + l;
                              return s;
                          }()}] += 1;

        switch (g.kind) {
            case GoldLabel::Kind::Single:
            case GoldLabel::Kind::Multi: {
                std::set<std::string> gset(g.languages.begin(), g.languages.end());
                bool all = true;
                for (const auto& l : gset) {
                    report.per_category[l].gold_count += 1;
                    if (p.count(l)) {
                        report.per_category[l].tp += 1;
                    } else {
                        report.per_category[l].fn += 1;
                        all = false;
                    }
                }
                for (const auto& l : p) {
                    if (!gset.count(l)) {
                        report.per_category[l].fp += 1;
                        if (g.kind == GoldLabel::Kind::Single) all = false;
                    }
                }
                bool exact = g.kind == GoldLabel::Kind::Single
                                 ? (p.size() == 1 && gset.count(*p.begin()))
                                 : all;
                if (exact) report.correct += 1;
                break;
            }
            case GoldLabel::Kind::Ambiguous: {
                auto& amb = report.per_category["amb"];
                amb.gold_count += 1;
                bool hit = false;
                for (const auto& l : g.languages) {
                    if (p.count(l)) hit = true;
                }
                if (hit) {
                    amb.tp += 1;
                    report.correct += 1;
                } else {
                    amb.fn += 1;
                }
                break;
            }
            case GoldLabel::Kind::Und: {
                auto& und = report.per_category[kUndLabel];
                und.gold_count += 1;
                if (p.size() == 1 && p.count(kUndLabel)) {
                    und.tp += 1;
                    report.correct += 1;
                } else {
                    und.fn += 1;
                }
                break;
            }
        }
    }
    return report;
}

// One-vs-rest P/R/F1 per language; macro over categories present in gold.
inline ScoreReport score_single_label(const std::vector<std::string>& gold,
                                      const std::vector<std::string>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("score_single_label: length mismatch");
    }
    ScoreReport report;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        report.examples += 1;
        report.confusion[{gold[i], pred[i]}] += 1;
        report.per_category[gold[i]].gold_count += 1;
        if (gold[i] == pred[i]) {
            report.per_category[gold[i]].tp += 1;
            report.correct += 1;
        } else {
            report.per_category[gold[i]].fn += 1;
            report.per_category[pred[i]].fp += 1;
        }
    }
    return report;
}

// Token-level one-vs-rest F1 per tag for word-tagged tweets.
inline ScoreReport score_words(const std::vector<std::vector<std::string>>& gold,
                               const std::vector<std::vector<std::string>>& pred) {
    if (gold.size() != pred.size()) {
        throw std::invalid_argument("score_words: sequence count mismatch");
    }
    std::vector<std::string> flat_gold, flat_pred;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].size() != pred[i].size()) {
            throw std::invalid_argument("score_words: token count mismatch at tweet " +
                                        std::to_string(i));
        }
        flat_gold.insert(flat_gold.end(), gold[i].begin(), gold[i].end());
        flat_pred.insert(flat_pred.end(), pred[i].begin(), pred[i].end());
    }
    return score_single_label(flat_gold, flat_pred);
}

}  // namespace langid
