// Deterministic normalization, tokenization, and character-vocabulary
// construction shared by both classifiers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "langid/unicode.hpp"

namespace langid {

// Tokenized tweet text. Tokens are whitespace-free codepoint sequences,
// each at most 40 bytes in UTF-8.
struct NormalizedText {
    std::vector<std::u32string> tokens;
    std::string original;

    bool empty() const { return tokens.empty(); }

    // Tokens joined by single spaces; the character stream the n-gram
    // models are trained on.
    std::u32string joined() const {
        std::u32string out;
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) out.push_back(U' ');
            out += tokens[i];
        }
        return out;
    }

    std::string joined_utf8() const { return encode_utf8(joined()); }
};

namespace detail {

// Caps runs of repeating patterns (1..4 codepoints) at 5 consecutive
// copies. Shortest pattern first, left to right, full restart after
// every rewrite, so the result is a fixed point.
inline std::u32string cap_repetitions_cps(std::u32string s) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t p = 1; p <= 4 && !changed; ++p) {
            for (size_t i = 0; i + p <= s.size(); ++i) {
                size_t copies = 1;
                while (i + (copies + 1) * p <= s.size() &&
                       std::equal(s.begin() + static_cast<long>(i),
                                  s.begin() + static_cast<long>(i + p),
                                  s.begin() + static_cast<long>(i + copies * p))) {
                    ++copies;
                }
                if (copies > 5) {
                    s.erase(i + 5 * p, (copies - 5) * p);
                    changed = true;
                    break;
                }
            }
        }
    }
    return s;
}

inline bool url_prefix_at(const std::u32string& s, size_t i) {
    static const std::u32string kHttp = U"http://";
    static const std::u32string kHttps = U"https://";
    return s.compare(i, kHttp.size(), kHttp) == 0 ||
           s.compare(i, kHttps.size(), kHttps) == 0;
}

inline std::u32string split_entities_cps(const std::u32string& s) {
    std::u32string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        bool marker = s[i] == U'@' || s[i] == U'#' || url_prefix_at(s, i);
        if (marker && !out.empty() && !is_whitespace(out.back())) {
            out.push_back(U' ');
        }
        out.push_back(s[i]);
    }
    return out;
}

inline std::u32string force_breaks_cps(const std::u32string& s) {
    std::u32string out;
    out.reserve(s.size());
    int run_bytes = 0;
    for (char32_t cp : s) {
        if (is_whitespace(cp)) {
            run_bytes = 0;
            out.push_back(cp);
            continue;
        }
        int b = utf8_length(cp);
        if (run_bytes + b > 40) {
            out.push_back(U' ');
            run_bytes = 0;
        }
        out.push_back(cp);
        run_bytes += b;
    }
    return out;
}

// Collapses every whitespace run to a single space and trims the ends.
inline std::u32string canonicalize_whitespace(const std::u32string& s) {
    std::u32string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (is_whitespace(cp)) {
            if (!out.empty() && out.back() != U' ') out.push_back(U' ');
        } else {
            out.push_back(cp);
        }
    }
    if (!out.empty() && out.back() == U' ') out.pop_back();
    return out;
}

}  // namespace detail

inline std::string cap_repetitions(std::string_view text) {
    return encode_utf8(detail::cap_repetitions_cps(decode_utf8(text)));
}

inline std::string split_entities(std::string_view text) {
    return encode_utf8(detail::split_entities_cps(decode_utf8(text)));
}

inline std::string force_breaks(std::string_view text) {
    return encode_utf8(detail::force_breaks_cps(decode_utf8(text)));
}

// Whitespace canonicalization, repetition capping, entity splitting and
// forced breaks, then a split on spaces. Case and punctuation are kept.
inline NormalizedText normalize(std::string_view text) {
    std::u32string cps = detail::canonicalize_whitespace(decode_utf8(text));
    cps = detail::cap_repetitions_cps(std::move(cps));
    cps = detail::split_entities_cps(cps);
    cps = detail::force_breaks_cps(cps);

    NormalizedText out;
    out.original.assign(text);
    std::u32string tok;
    for (char32_t cp : cps) {
        if (cp == U' ') {
            if (!tok.empty()) out.tokens.push_back(std::move(tok));
            tok.clear();
        } else {
            tok.push_back(cp);
        }
    }
    if (!tok.empty()) out.tokens.push_back(std::move(tok));
    return out;
}

// Character vocabulary: every codepoint seen at least twice in training,
// plus UNK (0) and PAD (1). Embedding dimension d = ceil(log2 |C|).
struct CharVocab {
    static constexpr int kUnkIndex = 0;
    static constexpr int kPadIndex = 1;
    static constexpr int kNumReserved = 2;

    struct Entry {
        char32_t cp;
        int index;
        std::int64_t count;
    };

    std::vector<Entry> entries;  // index order, starting at kNumReserved
    std::unordered_map<char32_t, int> index;
    int d = 1;

    int size() const { return static_cast<int>(entries.size()) + kNumReserved; }

    int index_of(char32_t cp) const {
        auto it = index.find(cp);
        return it == index.end() ? kUnkIndex : it->second;
    }
};

inline int ceil_log2(std::int64_t n) {
    int d = 0;
    while ((std::int64_t{1} << d) < n) ++d;
    return std::max(d, 1);
}

inline CharVocab build_vocab(const std::vector<NormalizedText>& corpus) {
    if (corpus.empty()) {
        throw std::invalid_argument("build_vocab: empty corpus");
    }
    std::unordered_map<char32_t, std::int64_t> counts;
    for (const NormalizedText& text : corpus) {
        for (const std::u32string& tok : text.tokens) {
            for (char32_t cp : tok) ++counts[cp];
        }
    }
    std::vector<std::pair<char32_t, std::int64_t>> kept;
    for (const auto& [cp, n] : counts) {
        if (n >= 2) kept.emplace_back(cp, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    CharVocab vocab;
    vocab.entries.reserve(kept.size());
    int idx = CharVocab::kNumReserved;
    for (const auto& [cp, n] : kept) {
        vocab.entries.push_back({cp, idx, n});
        vocab.index.emplace(cp, idx);
        ++idx;
    }
    vocab.d = ceil_log2(vocab.size());
    return vocab;
}

inline void save_vocab(std::ostream& out, const CharVocab& vocab) {
    out << "charvocab v1\t" << vocab.size() << "\t" << vocab.d << "\n";
    for (const CharVocab::Entry& e : vocab.entries) {
        out << std::hex << static_cast<std::uint32_t>(e.cp) << std::dec << "\t"
            << e.index << "\t" << e.count << "\n";
    }
}

inline void save_vocab(const std::string& path, const CharVocab& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocab file: " + path);
    save_vocab(out, vocab);
}

inline CharVocab load_vocab(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) {
        throw std::runtime_error("vocab file: empty");
    }
    std::istringstream hs(header);
    std::string magic, version;
    std::int64_t size = 0;
    int d = 0;
    hs >> magic >> version >> size >> d;
    if (magic != "charvocab" || version != "v1" || !hs) {
        throw std::runtime_error("vocab file: bad header: " + header);
    }
    CharVocab vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string hex;
        int index = 0;
        std::int64_t count = 0;
        ls >> hex >> index >> count;
        if (!ls) throw std::runtime_error("vocab file: bad entry: " + line);
        char32_t cp = static_cast<char32_t>(std::stoul(hex, nullptr, 16));
        vocab.entries.push_back({cp, index, count});
        vocab.index.emplace(cp, index);
    }
    if (static_cast<std::int64_t>(vocab.entries.size()) +
            CharVocab::kNumReserved != size) {
        throw std::runtime_error("vocab file: entry count does not match header");
    }
    for (size_t i = 0; i < vocab.entries.size(); ++i) {
        if (vocab.entries[i].index != static_cast<int>(i) + CharVocab::kNumReserved) {
            throw std::runtime_error("vocab file: indices not dense");
        }
    }
    vocab.d = ceil_log2(size);
    if (vocab.d != d) {
        throw std::runtime_error("vocab file: embedding dimension mismatch");
    }
    return vocab;
}

inline CharVocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    return load_vocab(in);
}

// FNV-1a over the canonical serialization; ties checkpoints to the vocab
// they were trained with.
inline std::uint64_t vocab_hash(const CharVocab& vocab) {
    std::ostringstream os;
    save_vocab(os, vocab);
    std::uint64_t h = 1469598103934665603ull;
    for (char c : os.str()) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace langid
