#pragma once

// A seeded extractive summariser with dropout-style token masking.
//
// The "model" is a salience weight per token learned from the labeled set;
// a summary is the single highest-scoring sentence of the document. A
// stochastic pass suppresses each vocabulary type of the document with
// probability p and breaks score ties with the same seeded generator, so
// documents the model knows nothing about produce maximally scattered
// samples.

#include "bas/learner.hpp"
#include "bas/metrics.hpp"

#include <cctype>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace bas {

struct SalienceTable {
    std::unordered_map<std::string, double> weights;
    std::size_t fitted_on = 0;

    [[nodiscard]] double weight(const std::string& token) const {
        auto it = weights.find(token);
        return it == weights.end() ? 0.0 : it->second;
    }
};

/// weight(t) = r(t) / (1 + d(t)), r = #references containing t,
/// d = #document texts containing t. Tokens absent from every reference are
/// not stored (weight 0).
inline SalienceTable fit_salience(std::span<const LabeledExample> labeled) {
    if (labeled.empty()) throw ContractError("fit_salience needs a non-empty labeled set");
    std::unordered_map<std::string, std::size_t> in_ref, in_doc;
    auto count_types = [](const std::string& text, std::unordered_map<std::string, std::size_t>& into) {
        auto tokens = tokenize(text);
        std::unordered_set<std::string> types(tokens.begin(), tokens.end());
        for (const auto& t : types) ++into[t];
    };
    for (const auto& ex : labeled) {
        count_types(ex.summary, in_ref);
        count_types(ex.text, in_doc);
    }
    SalienceTable table;
    table.fitted_on = labeled.size();
    for (const auto& [token, r] : in_ref) {
        auto it = in_doc.find(token);
        const std::size_t d = it == in_doc.end() ? 0 : it->second;
        table.weights.emplace(token, static_cast<double>(r) / (1.0 + static_cast<double>(d)));
    }
    return table;
}

/// A document split into sentences on runs of [.?!], with tokens mapped to
/// vocabulary types in first-occurrence order.
struct PreparedText {
    std::vector<std::string> sentences;
    std::vector<std::vector<std::size_t>> sentence_types;  // type index per token position
    std::vector<std::string> vocabulary;

    explicit PreparedText(std::string_view text) {
        std::unordered_map<std::string, std::size_t> type_of;
        auto flush = [&](std::size_t begin, std::size_t end) {
            while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
            while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
            if (begin == end) return;
            sentences.emplace_back(text.substr(begin, end - begin));
            auto& ids = sentence_types.emplace_back();
            for (auto& tok : tokenize(sentences.back())) {
                auto [it, fresh] = type_of.emplace(tok, vocabulary.size());
                if (fresh) vocabulary.push_back(std::move(tok));
                ids.push_back(it->second);
            }
        };
        std::size_t start = 0;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '.' || text[i] == '?' || text[i] == '!') {
                while (i + 1 < text.size() && (text[i + 1] == '.' || text[i + 1] == '?' || text[i + 1] == '!')) ++i;
                flush(start, i + 1);
                start = i + 1;
            }
        }
        flush(start, text.size());
    }
};

namespace detail {

/// Mean weight of the unsuppressed tokens of every sentence.
inline std::vector<double> sentence_scores(const SalienceTable& table, const PreparedText& doc,
                                           const std::vector<bool>* suppressed) {
    std::vector<double> type_weight(doc.vocabulary.size());
    for (std::size_t t = 0; t < doc.vocabulary.size(); ++t) type_weight[t] = table.weight(doc.vocabulary[t]);
    std::vector<double> scores;
    scores.reserve(doc.sentences.size());
    for (const auto& types : doc.sentence_types) {
        double sum = 0.0;
        std::size_t kept = 0;
        for (auto t : types) {
            if (suppressed && (*suppressed)[t]) continue;
            sum += type_weight[t];
            ++kept;
        }
        scores.push_back(kept == 0 ? 0.0 : sum / static_cast<double>(kept));
    }
    return scores;
}

inline std::vector<std::size_t> argmax_all(const std::vector<double>& scores) {
    std::vector<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (best.empty() || scores[i] > scores[best.front()]) {
            best.assign(1, i);
        } else if (scores[i] == scores[best.front()]) {
            best.push_back(i);
        }
    }
    return best;
}

}  // namespace detail

/// Highest-scoring sentence; ties go to the earliest. `suppressed` is
/// indexed by PreparedText vocabulary type.
inline std::string summarize(const SalienceTable& table, const PreparedText& doc,
                             const std::vector<bool>* suppressed = nullptr) {
    if (doc.sentences.empty()) return {};
    return doc.sentences[detail::argmax_all(detail::sentence_scores(table, doc, suppressed)).front()];
}

inline std::string summarize(const SalienceTable& table, std::string_view text) {
    return summarize(table, PreparedText(text));
}

/// One dropout-style pass. The generator seeded with `sub_seed` first draws
/// one suppression decision per vocabulary type (first-occurrence order);
/// when p > 0, a tie at the top score is then broken by a uniform draw.
/// With p = 0 this is exactly summarize().
inline std::string stochastic_summarize(const SalienceTable& table, const PreparedText& doc, double p, Seed sub_seed) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
    if (doc.sentences.empty()) return {};
    Rng rng(sub_seed);
    std::vector<bool> suppressed(doc.vocabulary.size());
    for (std::size_t t = 0; t < suppressed.size(); ++t) suppressed[t] = rng.bernoulli(p);
    const auto best = detail::argmax_all(detail::sentence_scores(table, doc, &suppressed));
    if (p == 0.0 || best.size() == 1) return doc.sentences[best.front()];
    return doc.sentences[best[rng.below(best.size())]];
}

inline std::string stochastic_summarize(const SalienceTable& table, std::string_view text, double p, Seed sub_seed) {
    return stochastic_summarize(table, PreparedText(text), p, sub_seed);
}

/// In-process learner over SalienceTable. Model tokens are "toy-<generation>".
class ToyLearner final : public Learner {
public:
    ModelHandle train(std::span<const LabeledExample> labeled, std::span<const LabeledExample> /*validation*/,
                      const LearnerConfig& config) override {
        if (labeled.empty()) throw ContractError("train needs a non-empty labeled set");
        config.validate();
        table_ = std::make_shared<const SalienceTable>(fit_salience(labeled));
        config_ = config;
        generation_ = trained_ ? generation_ + 1 : 0;
        trained_ = true;
        return current();
    }

    std::string generate(const ModelHandle& model, const std::string& text) override {
        return summarize(checked(model), PreparedText(text));
    }

    StochasticBatch generate_stochastic(const ModelHandle& model, const std::string& doc_id, const std::string& text,
                                        std::size_t n, Seed seed) override {
        if (n < 2) throw ArityError("stochastic generation needs n >= 2, got " + std::to_string(n));
        const auto& table = checked(model);
        const PreparedText doc(text);
        StochasticBatch batch{doc_id, {}};
        batch.summaries.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            batch.summaries.push_back(stochastic_summarize(table, doc, config_.dropout_rate, mc_sub_seed(seed, doc_id, j)));
        }
        return batch;
    }

    [[nodiscard]] bool concurrent() const noexcept override { return true; }

    [[nodiscard]] const SalienceTable* table() const noexcept { return table_.get(); }

private:
    [[nodiscard]] ModelHandle current() const {
        return ModelHandle{"toy-" + std::to_string(generation_), generation_, 1};
    }

    const SalienceTable& checked(const ModelHandle& model) const {
        if (!trained_) throw ProtocolError("no model has been trained");
        if (model.token != current().token) throw ProtocolError("stale model handle '" + model.token + "'");
        return *table_;
    }

    std::shared_ptr<const SalienceTable> table_;
    LearnerConfig config_;
    std::size_t generation_ = 0;
    bool trained_ = false;
};

}  // namespace bas
