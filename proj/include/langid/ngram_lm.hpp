// Character n-gram language models with Witten-Bell smoothing, a Bayes
// classifier over them (uniform class prior), mixture models for
// out-of-domain data, and a log-likelihood-ratio rejection test for the
// undetermined class.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "langid/evaluator.hpp"
#include "langid/text_pipeline.hpp"

namespace langid {

// Symbols are codepoints; specials sit just above the Unicode range.
using Sym = char32_t;
constexpr Sym kUnkSym = 0x110000;
constexpr Sym kBosSym = 0x110001;
constexpr Sym kEosSym = 0x110002;
using SymString = std::u32string;

struct NgramModel {
    struct Dist {
        std::int64_t total = 0;
        std::map<Sym, std::int64_t> next;
    };

    int order = 1;
    // Keyed by context (most recent symbol last); all lengths 0..order-1.
    std::unordered_map<SymString, Dist> counts;
    std::set<Sym> vocab;  // observed symbols, including the end marker

    // Predictable outcomes: observed symbols plus UNK.
    std::int64_t omega_size() const {
        return static_cast<std::int64_t>(vocab.size()) + 1;
    }

    Sym map_sym(char32_t cp) const { return vocab.count(cp) ? cp : kUnkSym; }

    // Event stream for one tweet: tokens joined with single spaces, then
    // the end marker. Unknown characters collapse to UNK.
    std::vector<Sym> stream(const NormalizedText& text) const {
        std::vector<Sym> out;
        for (char32_t cp : text.joined()) out.push_back(map_sym(cp));
        out.push_back(kEosSym);
        return out;
    }

    void add_text(const NormalizedText& text) {
        std::u32string chars = text.joined();
        SymString hist(static_cast<std::size_t>(order - 1), kBosSym);
        auto emit = [&](Sym w) {
            for (int k = 0; k < order; ++k) {
                counts_for(hist.substr(hist.size() - static_cast<std::size_t>(k)), w);
            }
            vocab.insert(w);
            if (order > 1) hist = hist.substr(1) + w;
        };
        for (char32_t cp : chars) emit(cp);
        emit(kEosSym);
        vocab.erase(kBosSym);  // begin marker is context only
    }

    // Witten-Bell: P(w|c) = (count(c,w) + T(c) P(w|c')) / (count(c) + T(c)),
    // T(c) = distinct continuations of c. Unseen contexts defer to the
    // backoff distribution; the chain ends in the uniform over omega.
    double cond_prob(const SymString& ctx, Sym w) const {
        if (ctx.empty()) {
            auto it = counts.find(SymString());
            if (it == counts.end() || it->second.total == 0) {
                return 1.0 / static_cast<double>(omega_size());
            }
            const Dist& d = it->second;
            double T = static_cast<double>(d.next.size());
            double base = 1.0 / static_cast<double>(omega_size());
            return (count_of(d, w) + T * base) / (static_cast<double>(d.total) + T);
        }
        double backoff = cond_prob(ctx.substr(1), w);
        auto it = counts.find(ctx);
        if (it == counts.end() || it->second.total == 0) return backoff;
        const Dist& d = it->second;
        double T = static_cast<double>(d.next.size());
        return (count_of(d, w) + T * backoff) / (static_cast<double>(d.total) + T);
    }

    // Conditional probability of each event in the tweet, in order.
    std::vector<double> event_probs(const NormalizedText& text) const {
        std::vector<double> out;
        SymString hist(static_cast<std::size_t>(order - 1), kBosSym);
        for (Sym w : stream(text)) {
            out.push_back(cond_prob(hist, w));
            if (order > 1) hist = hist.substr(1) + w;
        }
        return out;
    }

  private:
    void counts_for(const SymString& ctx, Sym w) {
        Dist& d = counts[ctx];
        d.total += 1;
        d.next[w] += 1;
    }

    static double count_of(const Dist& d, Sym w) {
        auto it = d.next.find(w);
        return it == d.next.end() ? 0.0 : static_cast<double>(it->second);
    }
};

inline NgramModel train_lm(const std::vector<NormalizedText>& corpus, int n) {
    if (n < 1) throw std::invalid_argument("train_lm: order must be >= 1");
    if (corpus.empty()) throw std::invalid_argument("train_lm: empty corpus");
    NgramModel model;
    model.order = n;
    for (const NormalizedText& text : corpus) model.add_text(text);
    return model;
}

// Component models mixed at the probability level, event by event.
struct InterpolatedModel {
    std::vector<NgramModel> components;
    std::vector<double> weights;

    void validate() const {
        if (components.size() != weights.size() || components.size() < 2) {
            throw std::invalid_argument("InterpolatedModel: needs >= 2 weighted components");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("InterpolatedModel: negative weight");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("InterpolatedModel: weights must sum to 1");
        }
    }

    std::vector<double> event_probs(const NormalizedText& text) const {
        std::vector<double> mixed;
        for (std::size_t k = 0; k < components.size(); ++k) {
            std::vector<double> p = components[k].event_probs(text);
            if (mixed.empty()) mixed.assign(p.size(), 0.0);
            for (std::size_t i = 0; i < p.size(); ++i) mixed[i] += weights[k] * p[i];
        }
        return mixed;
    }
};

using AnyModel = std::variant<NgramModel, InterpolatedModel>;

inline std::vector<double> event_probs(const AnyModel& model,
                                       const NormalizedText& text) {
    return std::visit([&](const auto& m) { return m.event_probs(text); }, model);
}

inline double log_prob(const AnyModel& model, const NormalizedText& text) {
    double total = 0.0;
    for (double p : event_probs(model, text)) total += std::log(p);
    return total;
}

inline double log_prob(const NgramModel& model, const NormalizedText& text) {
    double total = 0.0;
    for (double p : model.event_probs(text)) total += std::log(p);
    return total;
}

inline std::size_t num_events(const NormalizedText& text) {
    return text.joined().size() + 1;  // characters plus the end marker
}

// exp of mean negative log probability per character event.
template <typename Model>
double perplexity(const Model& model, const std::vector<NormalizedText>& texts) {
    double total = 0.0;
    std::size_t events = 0;
    for (const NormalizedText& t : texts) {
        total += log_prob(model, t);
        events += num_events(t);
    }
    if (events == 0) throw std::invalid_argument("perplexity: no events");
    return std::exp(-total / static_cast<double>(events));
}

// argmax of log p(text | language); uniform prior; ties go to the
// lexicographically first language code.
inline std::string classify(const std::map<std::string, AnyModel>& models,
                            const NormalizedText& text) {
    if (models.empty()) throw std::invalid_argument("classify: no models");
    std::string best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (const auto& [lang, model] : models) {
        double ll = log_prob(model, text);
        if (ll > best_ll) {
            best_ll = ll;
            best = lang;
        }
    }
    return best;
}

struct RejectionModel {
    double tau = -std::numeric_limits<double>::infinity();
    NgramModel und_model;
};

// Per-event-normalized log likelihood ratio against the 'und' model, so
// the threshold is length-invariant.
inline double rejection_llr(const AnyModel& best_model, const NgramModel& und_model,
                            const NormalizedText& text) {
    double llr = log_prob(best_model, text) - log_prob(und_model, text);
    return llr / static_cast<double>(num_events(text));
}

inline std::string classify_with_rejection(
    const std::map<std::string, AnyModel>& models, const RejectionModel& rejection,
    const NormalizedText& text) {
    std::map<std::string, AnyModel> candidates;
    for (const auto& [lang, model] : models) {
        if (lang != kUndLabel) candidates.emplace(lang, model);
    }
    std::string best = classify(candidates, text);
    double llr = rejection_llr(candidates.at(best), rejection.und_model, text);
    return llr < rejection.tau ? kUndLabel : best;
}

// Sweeps the observed LLR values (plus sentinels) and keeps the threshold
// with the best macro-F1 on the dev set; smallest maximizer wins.
inline double tune_threshold(
    const std::map<std::string, AnyModel>& models, const NgramModel& und_model,
    const std::vector<std::pair<GoldLabel, NormalizedText>>& dev) {
    const double inf = std::numeric_limits<double>::infinity();
    bool has_und = false;
    for (const auto& [gold, text] : dev) {
        if (gold.kind == GoldLabel::Kind::Und) has_und = true;
    }
    if (!has_und) {
        std::cerr << "warning: no 'und' examples in dev set; rejection "
                     "threshold set to -inf\n";
        return -inf;
    }

    std::map<std::string, AnyModel> candidates;
    for (const auto& [lang, model] : models) {
        if (lang != kUndLabel) candidates.emplace(lang, model);
    }
    std::vector<GoldLabel> gold;
    std::vector<std::string> best_lang;
    std::vector<double> llr;
    for (const auto& [g, text] : dev) {
        std::string lang = classify(candidates, text);
        gold.push_back(g);
        best_lang.push_back(lang);
        llr.push_back(rejection_llr(candidates.at(lang), und_model, text));
    }

    std::vector<double> taus = llr;
    taus.push_back(-inf);
    taus.push_back(inf);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    double best_tau = -inf, best_f1 = -1.0;
    for (double tau : taus) {
        std::vector<std::vector<std::string>> preds;
        preds.reserve(llr.size());
        for (std::size_t i = 0; i < llr.size(); ++i) {
            preds.push_back({llr[i] < tau ? kUndLabel : best_lang[i]});
        }
        double f1 = score_tweetlid(gold, preds).macro_f1();
        if (f1 > best_f1) {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    return best_tau;
}

// Mean held-out per-character perplexity over 5 deterministic folds
// (example index mod 5); smallest order wins ties.
inline int select_order(const std::vector<NormalizedText>& corpus,
                        std::vector<int> candidate_orders) {
    if (corpus.size() < 5) {
        throw std::invalid_argument("select_order: corpus must have >= 5 examples");
    }
    if (candidate_orders.empty()) {
        throw std::invalid_argument("select_order: no candidate orders");
    }
    std::sort(candidate_orders.begin(), candidate_orders.end());
    candidate_orders.erase(
        std::unique(candidate_orders.begin(), candidate_orders.end()),
        candidate_orders.end());

    int best_n = candidate_orders.front();
    double best_ppl = std::numeric_limits<double>::infinity();
    for (int n : candidate_orders) {
        double sum = 0.0;
        for (int fold = 0; fold < 5; ++fold) {
            std::vector<NormalizedText> train, held;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                (static_cast<int>(i % 5) == fold ? held : train).push_back(corpus[i]);
            }
            sum += perplexity(train_lm(train, n), held);
        }
        double mean = sum / 5.0;
        if (mean < best_ppl) {
            best_ppl = mean;
            best_n = n;
        }
    }
    return best_n;
}

// Mixture weights minimizing dev perplexity: 0.01-step grid for two
// components, EM otherwise. Near-ties prefer the most balanced weights.
inline std::vector<double> fit_interpolation(
    const std::vector<NormalizedText>& dev,
    const std::vector<NgramModel>& components) {
    if (components.size() < 2) {
        throw std::invalid_argument("fit_interpolation: needs >= 2 components");
    }
    if (dev.empty()) throw std::invalid_argument("fit_interpolation: empty dev");

    // Per-event probabilities of every component over the whole dev set.
    std::vector<std::vector<double>> probs(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        for (const NormalizedText& t : dev) {
            std::vector<double> p = components[k].event_probs(t);
            probs[k].insert(probs[k].end(), p.begin(), p.end());
        }
    }
    std::size_t n_events = probs[0].size();

    if (components.size() == 2) {
        double best_obj = std::numeric_limits<double>::infinity();
        double best_l1 = 0.5;
        for (int step = 0; step <= 100; ++step) {
            double l1 = step / 100.0;
            double ll = 0.0;
            for (std::size_t i = 0; i < n_events; ++i) {
                ll += std::log(l1 * probs[0][i] + (1.0 - l1) * probs[1][i]);
            }
            double obj = -ll;
            bool better = obj < best_obj * (1.0 - 1e-12) - 1e-300;
            bool tie = std::fabs(obj - best_obj) <= 1e-12 * std::fabs(best_obj);
            if (better || (tie && std::fabs(l1 - 0.5) < std::fabs(best_l1 - 0.5))) {
                best_obj = obj;
                best_l1 = l1;
            }
        }
        return {best_l1, 1.0 - best_l1};
    }

    // EM for three or more components.
    std::vector<double> lambda(components.size(), 1.0 / components.size());
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> resp(components.size(), 0.0);
        for (std::size_t i = 0; i < n_events; ++i) {
            double denom = 0.0;
            for (std::size_t k = 0; k < components.size(); ++k) {
                denom += lambda[k] * probs[k][i];
            }
            for (std::size_t k = 0; k < components.size(); ++k) {
                resp[k] += lambda[k] * probs[k][i] / denom;
            }
        }
        double delta = 0.0;
        for (std::size_t k = 0; k < components.size(); ++k) {
            double next = resp[k] / static_cast<double>(n_events);
            delta = std::max(delta, std::fabs(next - lambda[k]));
            lambda[k] = next;
        }
        if (delta < 1e-12) break;
    }
    return lambda;
}

// ---- classifier bundle and its text serialization ----

struct NgramClassifier {
    std::map<std::string, AnyModel> models;  // may include 'und'
    std::optional<double> rejection_tau;

    std::string predict(const NormalizedText& text) const {
        if (rejection_tau.has_value() && models.count(kUndLabel)) {
            RejectionModel rej;
            rej.tau = *rejection_tau;
            rej.und_model = std::get<NgramModel>(models.at(kUndLabel));
            return classify_with_rejection(models, rej, text);
        }
        return classify(models, text);
    }

    // Softmax over log-likelihoods: the posterior under a uniform prior.
    std::map<std::string, double> posteriors(const NormalizedText& text) const {
        std::map<std::string, double> ll;
        double mx = -std::numeric_limits<double>::infinity();
        for (const auto& [lang, model] : models) {
            ll[lang] = log_prob(model, text);
            mx = std::max(mx, ll[lang]);
        }
        double sum = 0.0;
        for (auto& [lang, v] : ll) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (auto& [lang, v] : ll) v /= sum;
        return ll;
    }
};

namespace detail {

inline std::string sym_to_text(Sym s) {
    if (s == kUnkSym) return "U";
    if (s == kBosSym) return "B";
    if (s == kEosSym) return "E";
    std::ostringstream os;
    os << std::hex << static_cast<std::uint32_t>(s);
    return os.str();
}

inline Sym sym_from_text(const std::string& t) {
    if (t == "U") return kUnkSym;
    if (t == "B") return kBosSym;
    if (t == "E") return kEosSym;
    return static_cast<Sym>(std::stoul(t, nullptr, 16));
}

inline std::string ctx_to_text(const SymString& ctx) {
    if (ctx.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (i) out += ",";
        out += sym_to_text(ctx[i]);
    }
    return out;
}

inline SymString ctx_from_text(const std::string& t) {
    if (t == "-") return {};
    SymString out;
    std::istringstream ss(t);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(sym_from_text(part));
    return out;
}

inline void write_model_block(std::ostream& out, const std::string& lang,
                              double weight, const NgramModel& m) {
    out << "model " << lang << " " << std::setprecision(17) << weight << "\n";
    out << "order " << m.order << "\n";
    out << "vocab " << m.vocab.size();
    for (Sym s : m.vocab) out << " " << sym_to_text(s);
    out << "\n";
    std::vector<SymString> ctxs;
    ctxs.reserve(m.counts.size());
    for (const auto& [ctx, dist] : m.counts) ctxs.push_back(ctx);
    std::sort(ctxs.begin(), ctxs.end(), [](const SymString& a, const SymString& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    out << "counts " << ctxs.size() << "\n";
    for (const SymString& ctx : ctxs) {
        const NgramModel::Dist& d = m.counts.at(ctx);
        out << ctx_to_text(ctx);
        for (const auto& [sym, cnt] : d.next) {
            out << " " << sym_to_text(sym) << ":" << cnt;
        }
        out << "\n";
    }
    out << "end\n";
}

inline NgramModel read_model_block(std::istream& in) {
    NgramModel m;
    std::string line, key;
    if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated block");
    {
        std::istringstream ss(line);
        ss >> key >> m.order;
        if (key != "order" || m.order < 1) throw std::runtime_error("ngram file: bad order line");
    }
    if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated block");
    {
        std::istringstream ss(line);
        std::size_t n = 0;
        ss >> key >> n;
        if (key != "vocab") throw std::runtime_error("ngram file: bad vocab line");
        std::string tok;
        for (std::size_t i = 0; i < n; ++i) {
            ss >> tok;
            m.vocab.insert(sym_from_text(tok));
        }
    }
    std::size_t n_lines = 0;
    if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated block");
    {
        std::istringstream ss(line);
        ss >> key >> n_lines;
        if (key != "counts") throw std::runtime_error("ngram file: bad counts line");
    }
    for (std::size_t i = 0; i < n_lines; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated counts");
        std::istringstream ss(line);
        std::string ctx_text;
        ss >> ctx_text;
        NgramModel::Dist& d = m.counts[ctx_from_text(ctx_text)];
        std::string pair;
        while (ss >> pair) {
            auto colon = pair.rfind(':');
            if (colon == std::string::npos) throw std::runtime_error("ngram file: bad count pair");
            Sym s = sym_from_text(pair.substr(0, colon));
            std::int64_t c = std::stoll(pair.substr(colon + 1));
            d.next[s] = c;
            d.total += c;
        }
    }
    if (!std::getline(in, line) || line != "end") {
        throw std::runtime_error("ngram file: missing block end");
    }
    return m;
}

}  // namespace detail

inline void save_ngram_classifier(std::ostream& out, const NgramClassifier& cls) {
    out << "ngramlm v1\n";
    out << "languages " << cls.models.size();
    for (const auto& [lang, model] : cls.models) out << " " << lang;
    out << "\n";
    if (cls.rejection_tau.has_value()) {
        out << "rejection " << std::setprecision(17) << *cls.rejection_tau << "\n";
    } else {
        out << "rejection none\n";
    }
    for (const auto& [lang, model] : cls.models) {
        if (std::holds_alternative<NgramModel>(model)) {
            detail::write_model_block(out, lang, 1.0, std::get<NgramModel>(model));
        } else {
            const auto& mix = std::get<InterpolatedModel>(model);
            for (std::size_t k = 0; k < mix.components.size(); ++k) {
                detail::write_model_block(out, lang, mix.weights[k], mix.components[k]);
            }
        }
    }
}

inline void save_ngram_classifier(const std::string& path, const NgramClassifier& cls) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write ngram model file: " + path);
    save_ngram_classifier(out, cls);
}

inline NgramClassifier load_ngram_classifier(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "ngramlm v1") {
        throw std::runtime_error("ngram file: bad magic/version");
    }
    if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated header");
    // languages line is informational; blocks are authoritative
    if (line.rfind("languages ", 0) != 0) {
        throw std::runtime_error("ngram file: bad languages line");
    }
    NgramClassifier cls;
    if (!std::getline(in, line)) throw std::runtime_error("ngram file: truncated header");
    {
        std::istringstream ss(line);
        std::string key, value;
        ss >> key >> value;
        if (key != "rejection") throw std::runtime_error("ngram file: bad rejection line");
        if (value != "none") cls.rejection_tau = std::stod(value);
    }

    std::map<std::string, std::vector<std::pair<double, NgramModel>>> blocks;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key, lang;
        double weight = 0.0;
        ss >> key >> lang >> weight;
        if (key != "model" || !ss) throw std::runtime_error("ngram file: bad model line: " + line);
        blocks[lang].emplace_back(weight, detail::read_model_block(in));
    }
    for (auto& [lang, parts] : blocks) {
        if (parts.size() == 1) {
            if (std::fabs(parts[0].first - 1.0) > 1e-12) {
                throw std::runtime_error("ngram file: single component weight != 1 for " + lang);
            }
            cls.models.emplace(lang, std::move(parts[0].second));
        } else {
            InterpolatedModel mix;
            for (auto& [w, m] : parts) {
                mix.weights.push_back(w);
                mix.components.push_back(std::move(m));
            }
            mix.validate();
            cls.models.emplace(lang, std::move(mix));
        }
    }
    if (cls.models.empty()) throw std::runtime_error("ngram file: no models");
    return cls;
}

inline NgramClassifier load_ngram_classifier(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open ngram model file: " + path);
    return load_ngram_classifier(in);
}

}  // namespace langid
