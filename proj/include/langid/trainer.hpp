// Minibatch training for both heads, weighted corpus mixing, fine-tuning,
// and random hyperparameter search. Single-threaded and fully determined
// by the seed.
#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "langid/adam.hpp"
#include "langid/dataset.hpp"
#include "langid/evaluator.hpp"
#include "langid/model.hpp"
#include "langid/rng.hpp"

namespace langid {

struct TrainConfig {
    int batch_size = 25;
    double learning_rate = 0.001;
    std::int64_t steps = 0;
    double dropout = 0.25;
    std::uint64_t seed = 1;
    enum class Head { Sentence, Word } head = Head::Sentence;
    std::int64_t eval_every = 0;  // 0 disables periodic dev metrics
};

struct TrainExample {
    std::string id;
    std::vector<std::u32string> words;
    GoldLabel gold;              // sentence head
    Tensor gold_dist;            // sentence head, over the label inventory
    std::vector<int> word_tags;  // word head
};

// Sources sampled with probability proportional to weight x size.
struct MixedCorpus {
    struct Source {
        std::vector<TrainExample> examples;
        double weight = 1.0;
    };
    std::vector<Source> sources;

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const Source& s : sources) n += s.examples.size();
        return n;
    }

    const TrainExample& sample(Rng& rng) const {
        double total = 0.0;
        for (const Source& s : sources) {
            if (s.weight <= 0.0) {
                throw std::invalid_argument("MixedCorpus: weights must be positive");
            }
            total += s.weight * static_cast<double>(s.examples.size());
        }
        if (total <= 0.0) throw std::invalid_argument("MixedCorpus: empty corpus");
        double u = rng.uniform() * total;
        for (const Source& s : sources) {
            double mass = s.weight * static_cast<double>(s.examples.size());
            if (u < mass || &s == &sources.back()) {
                return s.examples[static_cast<std::size_t>(
                    rng.uniform_int(static_cast<int>(s.examples.size())))];
            }
            u -= mass;
        }
        throw std::logic_error("MixedCorpus: unreachable");
    }
};

// ---- corpus preparation ----

// Label inventory for the sentence head: every language mentioned in any
// gold label, plus 'und' when present. Sorted for stable indexing.
inline std::vector<std::string> collect_labels(const std::vector<TextRecord>& records) {
    std::set<std::string> labels;
    for (const TextRecord& r : records) {
        if (r.gold.kind == GoldLabel::Kind::Und) {
            labels.insert(kUndLabel);
        } else {
            labels.insert(r.gold.languages.begin(), r.gold.languages.end());
        }
    }
    return {labels.begin(), labels.end()};
}

inline int label_index(const std::vector<std::string>& labels, const std::string& l) {
    auto it = std::find(labels.begin(), labels.end(), l);
    if (it == labels.end()) {
        throw std::invalid_argument("label not in inventory: " + l);
    }
    return static_cast<int>(it - labels.begin());
}

// Gold mass: one-hot for single labels and 'und'; spread evenly across
// the listed languages for ambiguous and code-switched tweets.
inline Tensor soft_label(const GoldLabel& gold, const std::vector<std::string>& labels) {
    Tensor t = Tensor::zeros({static_cast<int>(labels.size())});
    if (gold.kind == GoldLabel::Kind::Und) {
        t.at(label_index(labels, kUndLabel)) = 1.0;
        return t;
    }
    double mass = 1.0 / static_cast<double>(gold.languages.size());
    for (const std::string& l : gold.languages) {
        t.at(label_index(labels, l)) = mass;
    }
    return t;
}

inline std::vector<TrainExample> make_sentence_examples(
    const std::vector<TextRecord>& records, const std::vector<std::string>& labels) {
    std::vector<TrainExample> out;
    std::size_t skipped = 0;
    for (const TextRecord& r : records) {
        NormalizedText text = normalize(r.text);
        if (text.empty()) {
            ++skipped;
            continue;
        }
        TrainExample e;
        e.id = r.id;
        e.words = text.tokens;
        e.gold = r.gold;
        e.gold_dist = soft_label(r.gold, labels);
        out.push_back(std::move(e));
    }
    if (skipped > 0) {
        std::cerr << "warning: skipped " << skipped
                  << " example(s) empty after normalization\n";
    }
    return out;
}

inline std::vector<std::string> collect_tags(const std::vector<TokenRecord>& records) {
    std::set<std::string> tags;
    for (const TokenRecord& r : records) tags.insert(r.tags.begin(), r.tags.end());
    return {tags.begin(), tags.end()};
}

inline std::vector<TrainExample> make_word_examples(
    const std::vector<TokenRecord>& records, const std::vector<std::string>& tags,
    const std::string& id_prefix = "w") {
    std::vector<TrainExample> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        TrainExample e;
        e.id = id_prefix + std::to_string(i);
        for (const std::string& tok : records[i].tokens) {
            e.words.push_back(decode_utf8(tok));
        }
        for (const std::string& tag : records[i].tags) {
            e.word_tags.push_back(label_index(tags, tag));
        }
        if (!e.words.empty()) out.push_back(std::move(e));
    }
    return out;
}

// ---- dev metrics ----

inline double sentence_dev_metric(const ModelParams& params, const CharVocab& vocab,
                                  const std::vector<std::string>& labels,
                                  const std::vector<TrainExample>& dev) {
    std::vector<GoldLabel> gold;
    std::vector<std::vector<std::string>> preds;
    for (const TrainExample& e : dev) {
        Prediction p = predict_sentence(params, e.words, vocab);
        gold.push_back(e.gold);
        preds.push_back(decode_labels(p.sentence_probs, labels));
    }
    return score_tweetlid(gold, preds).macro_f1();
}

inline double word_dev_metric(const ModelParams& params, const CharVocab& vocab,
                              const std::vector<TrainExample>& dev) {
    std::int64_t correct = 0, total = 0;
    for (const TrainExample& e : dev) {
        Prediction p = predict_sentence(params, e.words, vocab);
        for (std::size_t i = 0; i < e.word_tags.size(); ++i) {
            int argmax = 0;
            const Tensor& wp = p.word_probs[i];
            for (int l = 1; l < wp.dim(0); ++l) {
                if (wp.at(l) > wp.at(argmax)) argmax = l;
            }
            correct += argmax == e.word_tags[i];
            total += 1;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

inline double dev_metric(TrainConfig::Head head, const ModelParams& params,
                         const CharVocab& vocab, const std::vector<std::string>& labels,
                         const std::vector<TrainExample>& dev) {
    return head == TrainConfig::Head::Sentence
               ? sentence_dev_metric(params, vocab, labels, dev)
               : word_dev_metric(params, vocab, dev);
}

// ---- training loop ----

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_trace;  // mean minibatch loss per step
    std::vector<std::pair<std::int64_t, double>> dev_metrics;
};

inline TrainResult train(const TrainConfig& config, const MixedCorpus& corpus,
                         const CharVocab& vocab, const std::vector<std::string>& labels,
                         ModelParams params,
                         const std::vector<TrainExample>* dev = nullptr) {
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size >= 1");
    if (corpus.total_size() == 0) throw std::invalid_argument("train: empty corpus");

    if (dev) {
        std::set<std::string> dev_ids;
        for (const TrainExample& e : *dev) dev_ids.insert(e.id);
        for (const MixedCorpus::Source& s : corpus.sources) {
            for (const TrainExample& e : s.examples) {
                if (dev_ids.count(e.id)) {
                    throw std::invalid_argument(
                        "train: dev example also present in training corpus: " + e.id);
                }
            }
        }
    }

    params.config.dropout = config.dropout;
    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(config.steps));

    std::vector<Tensor*> plist;
    for (auto& [name, t] : params.tensor_list()) plist.push_back(t);
    AdamState adam = AdamState::init(plist);
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;

    Rng rng(config.seed);
    ModelParams grads = ModelParams::zeros_like(params);
    std::vector<Tensor*> glist_mut;
    for (auto& [name, t] : grads.tensor_list()) glist_mut.push_back(t);

    for (std::int64_t step = 0; step < config.steps; ++step) {
        std::vector<const TrainExample*> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int b = 0; b < config.batch_size; ++b) {
            batch.push_back(&corpus.sample(rng));
        }

        for (Tensor* g : glist_mut) g->fill(0.0);
        double batch_loss = 0.0;
        double scale = 1.0 / static_cast<double>(config.batch_size);
        try {
            for (const TrainExample* e : batch) {
                SentenceTrace trace = forward(params, e->words, vocab, true, &rng);
                if (config.head == TrainConfig::Head::Sentence) {
                    batch_loss += scale * sentence_loss(trace, e->gold_dist);
                    backward_sentence(params, trace, e->gold_dist, grads, scale);
                } else {
                    batch_loss += scale * word_loss(trace, e->word_tags);
                    backward_word(params, trace, e->word_tags, grads, scale);
                }
            }
        } catch (const std::runtime_error& e) {
            std::ostringstream msg;
            msg << "training aborted at step " << step << " (batch ids:";
            for (const TrainExample* ex : batch) msg << " " << ex->id;
            msg << "): " << e.what();
            throw std::runtime_error(msg.str());
        }
        if (!std::isfinite(batch_loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at step " << step << " (batch ids:";
            for (const TrainExample* ex : batch) msg << " " << ex->id;
            msg << ")";
            throw std::runtime_error(msg.str());
        }
        result.loss_trace.push_back(batch_loss);

        std::vector<const Tensor*> glist(glist_mut.begin(), glist_mut.end());
        adam_step(adam_cfg, adam, plist, glist);

        if (dev && config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
            double metric = dev_metric(config.head, params, vocab, labels, *dev);
            result.dev_metrics.emplace_back(step + 1, metric);
            std::cerr << "step " << (step + 1) << " dev metric " << metric << "\n";
        }
    }
    result.params = std::move(params);
    return result;
}

// Continued training on in-domain data with fresh optimizer moments.
inline TrainResult fine_tune(const TrainConfig& base_config, const ModelParams& params,
                             const MixedCorpus& corpus, const CharVocab& vocab,
                             const std::vector<std::string>& labels,
                             std::int64_t steps = 2000,
                             const std::vector<TrainExample>* dev = nullptr) {
    TrainConfig cfg = base_config;
    cfg.steps = steps;
    return train(cfg, corpus, vocab, labels, params, dev);
}

// ---- random hyperparameter search ----

struct SearchSpace {
    int n1_min = 30, n1_max = 100;
    int n2_min = 50, n2_max = 150;
    int lstm_min = 15, lstm_max = 60;
    double dropout_min = 0.1, dropout_max = 0.4;
};

struct TrialResult {
    ModelConfig config;
    std::uint64_t seed = 0;
    double dev_metric = 0.0;
};

struct SearchResult {
    TrialResult best;
    std::vector<TrialResult> trials;
    ModelParams best_params;
};

inline SearchResult random_search(const SearchSpace& space, int k,
                                  const TrainConfig& budget, const MixedCorpus& corpus,
                                  const std::vector<TrainExample>& dev,
                                  const CharVocab& vocab,
                                  const std::vector<std::string>& labels) {
    if (k < 1) throw std::invalid_argument("random_search: k >= 1");
    Rng rng(budget.seed);
    SearchResult result;
    result.best_params = ModelParams::zeros(ModelConfig{}, 1, 1, 1);
    double best = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < k; ++trial) {
        ModelConfig cfg;
        cfg.n1 = space.n1_min + rng.uniform_int(space.n1_max - space.n1_min + 1);
        cfg.n2 = space.n2_min + rng.uniform_int(space.n2_max - space.n2_min + 1);
        cfg.lstm = space.lstm_min + rng.uniform_int(space.lstm_max - space.lstm_min + 1);
        cfg.dropout = rng.uniform(space.dropout_min, space.dropout_max);

        TrainConfig trial_cfg = budget;
        trial_cfg.seed = rng.fork_seed();
        trial_cfg.dropout = cfg.dropout;

        Rng init_rng(trial_cfg.seed);
        ModelParams init = ModelParams::init(cfg, vocab.d, vocab.size(),
                                             static_cast<int>(labels.size()), init_rng);
        TrainResult trained = train(trial_cfg, corpus, vocab, labels, std::move(init), &dev);
        double metric = dev_metric(budget.head, trained.params, vocab, labels, dev);

        TrialResult tr{cfg, trial_cfg.seed, metric};
        result.trials.push_back(tr);
        std::cerr << "trial " << trial << ": n1=" << cfg.n1 << " n2=" << cfg.n2
                  << " lstm=" << cfg.lstm << " dropout=" << cfg.dropout
                  << " dev=" << metric << "\n";
        if (metric > best) {
            best = metric;
            result.best = tr;
            result.best_params = std::move(trained.params);
        }
    }
    return result;
}

}  // namespace langid
