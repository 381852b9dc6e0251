// Model checkpoints: a diffable text header (config, labels, vocab, shapes,
// training metadata) followed by one flat little-endian blob of tensor
// data. Loading refuses version, endianness, shape, or vocab mismatches.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "langid/model.hpp"
#include "langid/text_pipeline.hpp"

namespace langid {

struct TrainMeta {
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    double learning_rate = 0.001;
    int batch_size = 25;
    std::string head = "sentence";
};

struct Checkpoint {
    CharVocab vocab;
    std::vector<std::string> labels;
    ModelParams params;
    TrainMeta meta;
};

namespace detail {

inline void require_little_endian() {
    static_assert(std::endian::native == std::endian::little ||
                      std::endian::native == std::endian::big,
                  "mixed-endian platforms unsupported");
    if constexpr (std::endian::native != std::endian::little) {
        throw std::runtime_error("checkpoint format requires a little-endian host");
    }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    detail::require_little_endian();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

    out << "langid-checkpoint v1\n";
    out << "endian little\n";
    out << "vocab_hash " << std::hex << vocab_hash(ckpt.vocab) << std::dec << "\n";
    out << "labels " << ckpt.labels.size();
    for (const std::string& l : ckpt.labels) out << " " << l;
    out << "\n";
    const ModelConfig& cfg = ckpt.params.config;
    out << "config " << cfg.n1 << " " << cfg.n2 << " " << cfg.lstm << " "
        << std::setprecision(17) << cfg.dropout << " " << (cfg.peepholes ? 1 : 0)
        << "\n";
    out << "dims " << ckpt.params.char_dim << " " << ckpt.params.vocab_size << " "
        << ckpt.params.num_labels << "\n";
    out << "meta " << ckpt.meta.seed << " " << ckpt.meta.steps << " "
        << std::setprecision(17) << ckpt.meta.learning_rate << " "
        << ckpt.meta.batch_size << " " << ckpt.meta.head << "\n";
    out << "vocab-begin\n";
    save_vocab(out, ckpt.vocab);
    out << "vocab-end\n";

    auto tensors = ckpt.params.tensor_list();
    out << "tensors " << tensors.size() << "\n";
    for (const auto& [name, t] : tensors) {
        out << name << " " << t->rank();
        for (int d : t->shape) out << " " << d;
        out << "\n";
    }
    out << "end-header\n";
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write while saving checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    detail::require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    auto fail = [&](const std::string& what) -> std::runtime_error {
        return std::runtime_error("checkpoint " + path + ": " + what);
    };
    std::string line;
    if (!std::getline(in, line) || line != "langid-checkpoint v1") {
        throw fail("bad magic/version");
    }
    if (!std::getline(in, line) || line != "endian little") {
        throw fail("bad endian line");
    }

    Checkpoint ckpt;
    std::uint64_t declared_hash = 0;
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key, hex;
        ss >> key >> hex;
        if (key != "vocab_hash") throw fail("missing vocab_hash");
        declared_hash = std::stoull(hex, nullptr, 16);
    }
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key;
        std::size_t n = 0;
        ss >> key >> n;
        if (key != "labels") throw fail("missing labels");
        std::string l;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(ss >> l)) throw fail("short labels line");
            ckpt.labels.push_back(l);
        }
    }
    ModelConfig cfg;
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key;
        int peep = 1;
        ss >> key >> cfg.n1 >> cfg.n2 >> cfg.lstm >> cfg.dropout >> peep;
        if (key != "config" || !ss) throw fail("bad config line");
        cfg.peepholes = peep != 0;
    }
    int char_dim = 0, vocab_size = 0, num_labels = 0;
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key;
        ss >> key >> char_dim >> vocab_size >> num_labels;
        if (key != "dims" || !ss) throw fail("bad dims line");
    }
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key;
        ss >> key >> ckpt.meta.seed >> ckpt.meta.steps >> ckpt.meta.learning_rate >>
            ckpt.meta.batch_size >> ckpt.meta.head;
        if (key != "meta" || !ss) throw fail("bad meta line");
    }
    if (!std::getline(in, line) || line != "vocab-begin") throw fail("missing vocab");
    {
        std::ostringstream vocab_text;
        while (std::getline(in, line) && line != "vocab-end") {
            vocab_text << line << "\n";
        }
        if (line != "vocab-end") throw fail("unterminated vocab");
        std::istringstream vs(vocab_text.str());
        ckpt.vocab = load_vocab(vs);
    }
    if (vocab_hash(ckpt.vocab) != declared_hash) {
        throw fail("vocab hash mismatch (corrupt or edited checkpoint)");
    }
    if (ckpt.vocab.size() != vocab_size || ckpt.vocab.d != char_dim) {
        throw fail("vocab does not match declared dims");
    }
    if (static_cast<int>(ckpt.labels.size()) != num_labels) {
        throw fail("label count does not match dims");
    }

    ckpt.params = ModelParams::zeros(cfg, char_dim, vocab_size, num_labels);
    auto tensors = ckpt.params.tensor_list();
    if (!std::getline(in, line)) throw fail("truncated header");
    {
        std::istringstream ss(line);
        std::string key;
        std::size_t n = 0;
        ss >> key >> n;
        if (key != "tensors" || n != tensors.size()) throw fail("bad tensors line");
    }
    for (const auto& [name, t] : tensors) {
        if (!std::getline(in, line)) throw fail("truncated tensor table");
        std::istringstream ss(line);
        std::string got_name;
        int rank = 0;
        ss >> got_name >> rank;
        if (got_name != name || rank != t->rank()) {
            throw fail("tensor mismatch at " + name + " (shape or order)");
        }
        for (int k = 0; k < rank; ++k) {
            int d = 0;
            ss >> d;
            if (d != t->dim(k)) throw fail("shape mismatch at " + name);
        }
    }
    if (!std::getline(in, line) || line != "end-header") throw fail("missing end-header");
    for (auto& [name, t] : tensors) {
        in.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != t->data.size() * sizeof(double)) {
            throw fail("truncated tensor data at " + name);
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw fail("trailing bytes after tensor data");
    return ckpt;
}

// A checkpoint trained against one vocabulary must not silently run with
// another.
inline void verify_vocab_match(const Checkpoint& ckpt, const CharVocab& vocab) {
    if (vocab_hash(ckpt.vocab) != vocab_hash(vocab)) {
        throw std::runtime_error(
            "checkpoint was trained with a different character vocabulary");
    }
}

}  // namespace langid
