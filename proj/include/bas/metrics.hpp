#pragma once

// Exact n-gram text metrics: tokenisation, sentence BLEU, BLEUVar and
// ROUGE-1/2/L F-scores. No smoothing, stemming or stopword removal.

#include "bas/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bas {

using TokenSequence = std::vector<std::string>;

/// Lowercases ASCII letters and splits on every maximal run of
/// non-alphanumeric bytes. Bytes >= 0x80 count as non-alphanumeric.
inline TokenSequence tokenize(std::string_view text) {
    TokenSequence tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (alnum) {
            current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace detail {

struct NgramLess {
    bool operator()(std::span<const std::string> a, std::span<const std::string> b) const {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    }
};

// Keys view into the token sequence passed to count_ngrams.
using NgramCounts = std::map<std::span<const std::string>, std::size_t, NgramLess>;

inline NgramCounts count_ngrams(const TokenSequence& seq, std::size_t n) {
    NgramCounts counts;
    if (n == 0 || seq.size() < n) return counts;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::span<const std::string>(seq.data() + i, n)];
    return counts;
}

/// Sum over candidate n-grams of min(count_cand, count_ref).
inline std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, c] : cand) {
        if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(c, it->second);
    }
    return overlap;
}

}  // namespace detail

inline constexpr std::size_t kBleuMaxOrder = 4;

/// Sentence-level BLEU against a single reference.
///
/// Orders 1..M with M = min(4, |candidate|, |reference|), uniform weights,
/// standard brevity penalty. Any zero precision (or M = 0) gives 0.
inline double bleu(const TokenSequence& candidate, const TokenSequence& reference) {
    const std::size_t max_order = std::min({kBleuMaxOrder, candidate.size(), reference.size()});
    if (max_order == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_order; ++n) {
        const auto cand = detail::count_ngrams(candidate, n);
        const auto ref = detail::count_ngrams(reference, n);
        const std::size_t overlap = detail::clipped_overlap(cand, ref);
        if (overlap == 0) return 0.0;
        const auto total = static_cast<double>(candidate.size() - n + 1);
        log_sum += std::log(static_cast<double>(overlap) / total);
    }
    const double geo_mean = std::exp(log_sum / static_cast<double>(max_order));
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * geo_mean;
}

struct BleuVarScore {
    double value = 0.0;
    std::size_t n_samples = 0;
    /// Row-major N x N directed BLEU values, entry (i, j) = BLEU(y_i, y_j).
    /// Diagonal is left at 1.
    std::optional<std::vector<double>> pair_matrix;
};

/// Mean squared complement of directed pairwise BLEU over N >= 2 samples:
///   1 / (N (N - 1)) * sum_{i != j} (1 - BLEU(y_i, y_j))^2
/// Both directions are evaluated since BLEU is asymmetric.
inline BleuVarScore bleuvar_tokens(std::span<const TokenSequence> samples, bool keep_matrix = false) {
    const std::size_t n = samples.size();
    if (n < 2) throw ArityError("bleuvar needs at least 2 summaries, got " + std::to_string(n));
    BleuVarScore score;
    score.n_samples = n;
    if (keep_matrix) score.pair_matrix.emplace(n * n, 1.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double b = bleu(samples[i], samples[j]);
            if (keep_matrix) (*score.pair_matrix)[i * n + j] = b;
            sum += (1.0 - b) * (1.0 - b);
        }
    }
    score.value = sum / static_cast<double>(n * (n - 1));
    return score;
}

inline BleuVarScore bleuvar(std::span<const std::string> summaries, bool keep_matrix = false) {
    if (summaries.size() < 2) {
        throw ArityError("bleuvar needs at least 2 summaries, got " + std::to_string(summaries.size()));
    }
    std::vector<TokenSequence> tokens;
    tokens.reserve(summaries.size());
    for (const auto& s : summaries) tokens.push_back(tokenize(s));
    return bleuvar_tokens(tokens, keep_matrix);
}

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const RougeScore&) const = default;
};

namespace detail {

inline RougeScore make_rouge(std::size_t hits, std::size_t cand_total, std::size_t ref_total) {
    RougeScore s;
    if (cand_total == 0 || ref_total == 0 || hits == 0) return s;
    s.precision = static_cast<double>(hits) / static_cast<double>(cand_total);
    s.recall = static_cast<double>(hits) / static_cast<double>(ref_total);
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

}  // namespace detail

/// ROUGE-N with clipped n-gram counts.
inline RougeScore rouge_n(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n) {
    if (n == 0) throw DomainError("rouge_n order must be >= 1");
    const auto cand = detail::count_ngrams(candidate, n);
    const auto ref = detail::count_ngrams(reference, n);
    const std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    const std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
    return detail::make_rouge(detail::clipped_overlap(cand, ref), cand_total, ref_total);
}

inline std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline RougeScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
    return detail::make_rouge(lcs_length(candidate, reference), candidate.size(), reference.size());
}

}  // namespace bas
