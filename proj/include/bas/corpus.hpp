#pragma once

// Dataset ingestion, pool bookkeeping and the annotation oracle.
//
// A corpus file holds one JSON object per line with string fields `id`,
// `text` and (optionally) `summary`. Annotation "reveals" that summary, which
// stands in for a human writing it.

#include "bas/error.hpp"
#include "bas/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace bas {

struct Document {
    std::string id;
    std::string text;
    std::optional<std::string> reference;

    /// Empty or whitespace-only text. Such documents are legal; they model
    /// content-free inputs and must reach the noise filter.
    [[nodiscard]] bool blank() const noexcept {
        return std::all_of(text.begin(), text.end(),
                           [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
    }

    bool operator==(const Document&) const = default;
};

struct LabeledExample {
    std::string doc_id;
    std::string text;
    std::string summary;

    bool operator==(const LabeledExample&) const = default;
};

/// Immutable document collection with id lookup.
class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
        index_.reserve(docs_.size());
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            if (!index_.emplace(docs_[i].id, i).second) {
                throw ValidationError("duplicate document id '" + docs_[i].id + "'");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return docs_.empty(); }
    [[nodiscard]] const Document& operator[](std::size_t i) const { return docs_[i]; }
    [[nodiscard]] std::span<const Document> documents() const noexcept { return docs_; }
    [[nodiscard]] auto begin() const noexcept { return docs_.begin(); }
    [[nodiscard]] auto end() const noexcept { return docs_.end(); }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const {
        if (auto it = index_.find(id); it != index_.end()) return it->second;
        return std::nullopt;
    }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline Document parse_corpus_record(const std::string& line, std::size_t line_number) {
    auto fail = [&](const std::string& why) -> ParseError {
        return ParseError("corpus line " + std::to_string(line_number) + ": " + why);
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw fail(e.what());
    }
    if (!j.is_object()) throw fail("record is not an object");
    auto field = [&](const char* name, bool required) -> std::optional<std::string> {
        auto it = j.find(name);
        if (it == j.end() || it->is_null()) {
            if (required) throw fail(std::string("missing field '") + name + "'");
            return std::nullopt;
        }
        if (!it->is_string()) throw fail(std::string("field '") + name + "' is not a string");
        return it->get<std::string>();
    };
    Document doc;
    doc.id = *field("id", true);
    doc.text = *field("text", true);
    doc.reference = field("summary", false);
    return doc;
}

inline nlohmann::ordered_json to_json(const Document& doc) {
    nlohmann::ordered_json j;
    j["id"] = doc.id;
    j["text"] = doc.text;
    if (doc.reference) j["summary"] = *doc.reference;
    return j;
}

/// Reads a corpus file. Blank lines are skipped; a trailing '\r' is ignored.
inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file '" + path + "'");
    std::vector<Document> docs;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        docs.push_back(parse_corpus_record(line, line_number));
    }
    return Corpus(std::move(docs));
}

inline void save_corpus(const std::string& path, std::span<const Document> docs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus file '" + path + "'");
    for (const auto& d : docs) out << to_json(d).dump() << '\n';
}

/// The U / L / V partition of a corpus together with the budget counters.
///
/// U is kept as sorted corpus indices so sampling is a pure function of the
/// seed. L keeps acquisition order. The corpus is shared and immutable.
class PoolState {
public:
    PoolState(std::shared_ptr<const Corpus> corpus, std::size_t budget, std::size_t warm_start_size)
        : corpus_(std::move(corpus)), budget_(budget), warm_start_size_(warm_start_size) {}

    [[nodiscard]] const Corpus& corpus() const noexcept { return *corpus_; }
    [[nodiscard]] const std::shared_ptr<const Corpus>& shared_corpus() const noexcept { return corpus_; }

    [[nodiscard]] const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
    [[nodiscard]] const std::vector<LabeledExample>& labeled() const noexcept { return labeled_; }
    [[nodiscard]] const std::vector<LabeledExample>& validation() const noexcept { return validation_; }

    [[nodiscard]] std::size_t u() const noexcept { return unlabeled_.size(); }
    [[nodiscard]] std::size_t l() const noexcept { return labeled_.size(); }
    [[nodiscard]] std::size_t v() const noexcept { return validation_.size(); }
    [[nodiscard]] std::size_t budget() const noexcept { return budget_; }
    [[nodiscard]] std::size_t warm_start_size() const noexcept { return warm_start_size_; }

    [[nodiscard]] bool in_unlabeled(std::size_t corpus_index) const {
        return std::binary_search(unlabeled_.begin(), unlabeled_.end(), corpus_index);
    }

    [[nodiscard]] std::vector<std::string> unlabeled_ids() const {
        std::vector<std::string> ids;
        ids.reserve(unlabeled_.size());
        for (auto i : unlabeled_) ids.push_back((*corpus_)[i].id);
        return ids;
    }

private:
    friend PoolState initialize_pool(std::shared_ptr<const Corpus>, std::size_t, std::size_t, Seed,
                                     std::size_t);
    friend PoolState annotate(PoolState, std::span<const std::string>);

    std::shared_ptr<const Corpus> corpus_;
    std::vector<std::size_t> unlabeled_;
    std::vector<LabeledExample> labeled_;
    std::vector<LabeledExample> validation_;
    std::size_t budget_ = 0;
    std::size_t warm_start_size_ = 0;
};

namespace detail {

inline LabeledExample reveal(const Document& doc) {
    if (!doc.reference) throw MissingLabel("document '" + doc.id + "' has no reference summary");
    return LabeledExample{doc.id, doc.text, *doc.reference};
}

}  // namespace detail

/// Draws V (first) and then the warm-start part of L uniformly without
/// replacement; everything else stays in U. `budget` defaults to s0 when
/// the caller has no budget notion.
inline PoolState initialize_pool(std::shared_ptr<const Corpus> corpus, std::size_t v, std::size_t s0,
                                 Seed seed, std::size_t budget = 0) {
    if (!corpus) throw ConfigError("initialize_pool: null corpus");
    if (v + s0 > corpus->size()) {
        throw ConfigError("v + s0 = " + std::to_string(v + s0) + " exceeds corpus size " +
                          std::to_string(corpus->size()));
    }
    PoolState pool(corpus, std::max(budget, s0), s0);
    Rng rng(seed);
    const auto picks = rng.sample_indices(corpus->size(), v + s0);
    std::vector<bool> taken(corpus->size(), false);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const auto& doc = (*corpus)[picks[i]];
        (i < v ? pool.validation_ : pool.labeled_).push_back(detail::reveal(doc));
        taken[picks[i]] = true;
    }
    pool.unlabeled_.reserve(corpus->size() - picks.size());
    for (std::size_t i = 0; i < corpus->size(); ++i) {
        if (!taken[i]) pool.unlabeled_.push_back(i);
    }
    return pool;
}

/// Moves `ids` from U into L (in the given order) with their references
/// revealed. Validates the whole batch before mutating anything.
inline PoolState annotate(PoolState pool, std::span<const std::string> ids) {
    std::vector<std::size_t> indices;
    indices.reserve(ids.size());
    std::unordered_set<std::size_t> seen;
    for (const auto& id : ids) {
        auto idx = pool.corpus().find(id);
        if (!idx) throw InvalidAcquisition("unknown document id '" + id + "'");
        if (!pool.in_unlabeled(*idx) || !seen.insert(*idx).second) {
            throw InvalidAcquisition("document '" + id + "' is not in the unlabeled pool");
        }
        if (!pool.corpus()[*idx].reference) {
            throw MissingLabel("document '" + id + "' has no reference summary");
        }
        indices.push_back(*idx);
    }
    for (auto idx : indices) pool.labeled_.push_back(detail::reveal(pool.corpus()[idx]));
    std::sort(indices.begin(), indices.end());
    std::vector<std::size_t> rest;
    rest.reserve(pool.unlabeled_.size() - indices.size());
    std::set_difference(pool.unlabeled_.begin(), pool.unlabeled_.end(), indices.begin(), indices.end(),
                        std::back_inserter(rest));
    pool.unlabeled_ = std::move(rest);
    return pool;
}

/// Uniform sample of min(k, u) documents from U, in draw order.
/// Nothing is removed: unselected candidates simply remain in U.
inline std::vector<Document> sample_candidates(const PoolState& pool, std::size_t k, Seed seed) {
    Rng rng(seed);
    std::vector<Document> out;
    for (auto pos : rng.sample_indices(pool.u(), k)) out.push_back(pool.corpus()[pool.unlabeled()[pos]]);
    return out;
}

}  // namespace bas
