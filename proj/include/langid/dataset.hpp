// Corpus file handling: tab-separated tweet files, token/tag files for
// word-level supervision, deterministic id-digit splits, and fragmenting
// of running text into tweet-sized pieces.
//
// Tweet file grammar (UTF-8, LF):
//   line   := id '\t' label '\t' text
//   label  := code | 'und' | code ('/' code)+ | code ('+' code)+
// Token file grammar:
//   tweet  := (token '\t' tag '\n')+ ; tweets separated by blank lines
#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "langid/evaluator.hpp"
#include "langid/text_pipeline.hpp"
#include "langid/unicode.hpp"

namespace langid {

struct TextRecord {
    std::string id;
    GoldLabel gold;
    std::string text;
};

struct LoadOptions {
    bool lenient = false;
    const std::set<std::string>* inventory = nullptr;  // allowed language codes
};

struct TweetLoadResult {
    std::vector<TextRecord> records;
    std::vector<std::pair<std::size_t, std::string>> errors;  // line, message
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

inline TweetLoadResult load_tweets(std::istream& in, const LoadOptions& opts = {}) {
    TweetLoadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = detail::split_tabs(line);
        if (fields.size() != 3) {
            result.errors.emplace_back(line_no, "expected 3 tab-separated fields, got " +
                                                    std::to_string(fields.size()));
            continue;
        }
        if (fields[0].empty()) {
            result.errors.emplace_back(line_no, "empty id");
            continue;
        }
        GoldLabel gold;
        try {
            gold = GoldLabel::parse(fields[1]);
        } catch (const std::exception& e) {
            result.errors.emplace_back(line_no, e.what());
            continue;
        }
        if (opts.inventory) {
            bool ok = true;
            for (const std::string& lang : gold.languages) {
                if (!opts.inventory->count(lang)) {
                    result.errors.emplace_back(line_no, "language not in inventory: " + lang);
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
        }
        result.records.push_back({fields[0], gold, fields[2]});
    }
    if (!result.errors.empty() && !opts.lenient) {
        std::ostringstream msg;
        msg << result.errors.size() << " malformed line(s):";
        for (const auto& [no, what] : result.errors) {
            msg << "\n  line " << no << ": " << what;
        }
        throw std::runtime_error(msg.str());
    }
    if (!result.errors.empty()) {
        for (const auto& [no, what] : result.errors) {
            std::cerr << "warning: skipped line " << no << ": " << what << "\n";
        }
    }
    return result;
}

inline TweetLoadResult load_tweets(const std::string& path, const LoadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open tweet file: " + path);
    return load_tweets(in, opts);
}

inline void save_tweets(std::ostream& out, const std::vector<TextRecord>& records) {
    for (const TextRecord& r : records) {
        out << r.id << "\t" << r.gold.to_string() << "\t" << r.text << "\n";
    }
}

inline void save_tweets(const std::string& path, const std::vector<TextRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write tweet file: " + path);
    save_tweets(out, records);
}

struct CorpusSplit {
    std::vector<TextRecord> train, dev, test;
};

// Test = ids ending in '0', dev = ids ending in '1', train = the rest.
inline CorpusSplit split_by_id_digit(const std::vector<TextRecord>& records) {
    CorpusSplit split;
    for (const TextRecord& r : records) {
        char last = r.id.empty() ? ' ' : r.id.back();
        if (last == '0') {
            split.test.push_back(r);
        } else if (last == '1') {
            split.dev.push_back(r);
        } else {
            split.train.push_back(r);
        }
    }
    return split;
}

// Splits running text into tweet-sized fragments: sentence-ish boundaries
// ('.', '!', '?', U+3002 followed by whitespace), greedily packed up to
// max_codepoints, hard-split when a single sentence is too long.
inline std::vector<std::string> fragment_corpus(const std::string& raw,
                                                std::size_t max_codepoints = 140,
                                                std::size_t cap = 25000) {
    std::u32string cps = decode_utf8(raw);
    std::vector<std::u32string> sentences;
    std::u32string cur;
    auto is_boundary = [](char32_t c) {
        return c == U'.' || c == U'!' || c == U'?' || c == 0x3002;
    };
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (is_whitespace(cps[i])) {
            if (!cur.empty() && cur.back() != U' ') cur.push_back(U' ');
        } else {
            cur.push_back(cps[i]);
        }
        if (is_boundary(cps[i]) &&
            (i + 1 == cps.size() || is_whitespace(cps[i + 1]))) {
            while (!cur.empty() && cur.back() == U' ') cur.pop_back();
            if (!cur.empty()) sentences.push_back(cur);
            cur.clear();
        }
    }
    while (!cur.empty() && cur.back() == U' ') cur.pop_back();
    if (!cur.empty()) sentences.push_back(cur);

    std::vector<std::string> fragments;
    std::u32string frag;
    auto flush = [&]() {
        if (!frag.empty() && fragments.size() < cap) {
            fragments.push_back(encode_utf8(frag));
        }
        frag.clear();
    };
    for (std::u32string& s : sentences) {
        // Hard-split oversized sentences first.
        while (s.size() > max_codepoints) {
            flush();
            frag = s.substr(0, max_codepoints);
            flush();
            s = s.substr(max_codepoints);
        }
        if (s.empty()) continue;
        std::size_t joined = frag.empty() ? s.size() : frag.size() + 1 + s.size();
        if (joined > max_codepoints) flush();
        if (!frag.empty()) frag.push_back(U' ');
        frag += s;
    }
    flush();
    if (fragments.size() > cap) fragments.resize(cap);
    return fragments;
}

// ---- word-level token files ----

struct TokenRecord {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
};

inline std::vector<TokenRecord> load_token_file(std::istream& in, bool lenient = false) {
    std::vector<TokenRecord> records;
    std::vector<std::pair<std::size_t, std::string>> errors;
    TokenRecord cur;
    std::string line;
    std::size_t line_no = 0;
    auto flush = [&]() {
        if (!cur.tokens.empty()) records.push_back(std::move(cur));
        cur = TokenRecord{};
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        std::vector<std::string> fields = detail::split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            errors.emplace_back(line_no, "expected 'token<TAB>tag': " + line);
            continue;
        }
        bool has_ws = false;
        for (char32_t cp : decode_utf8(fields[0])) {
            if (is_whitespace(cp)) has_ws = true;
        }
        if (has_ws) {
            errors.emplace_back(line_no, "token contains whitespace: " + fields[0]);
            continue;
        }
        cur.tokens.push_back(fields[0]);
        cur.tags.push_back(fields[1]);
    }
    flush();
    if (!errors.empty() && !lenient) {
        std::ostringstream msg;
        msg << errors.size() << " malformed token line(s):";
        for (const auto& [no, what] : errors) msg << "\n  line " << no << ": " << what;
        throw std::runtime_error(msg.str());
    }
    for (const auto& [no, what] : errors) {
        std::cerr << "warning: skipped line " << no << ": " << what << "\n";
    }
    return records;
}

inline std::vector<TokenRecord> load_token_file(const std::string& path,
                                                bool lenient = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open token file: " + path);
    return load_token_file(in, lenient);
}

inline void save_token_file(std::ostream& out, const std::vector<TokenRecord>& records) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i) out << "\n";
        for (std::size_t j = 0; j < records[i].tokens.size(); ++j) {
            out << records[i].tokens[j] << "\t" << records[i].tags[j] << "\n";
        }
    }
}

inline void save_token_file(const std::string& path,
                            const std::vector<TokenRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write token file: " + path);
    save_token_file(out, records);
}

}  // namespace langid
