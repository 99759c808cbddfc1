#pragma once

// Selection strategies: BLEUVar ranking behind an uncertainty threshold,
// and the uniform random baseline.

#include "bas/corpus.hpp"
#include "bas/learner.hpp"
#include "bas/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace bas {

struct UncertaintyRecord {
    std::string doc_id;
    double bleuvar = 0.0;
    std::vector<std::string> summaries;
    bool filtered = false;
};

enum class PolicyKind { random, bas };

struct AcquisitionPolicy {
    PolicyKind kind = PolicyKind::bas;
    std::size_t k = 100;
    std::size_t s = 10;
    std::size_t n = 10;
    double tau = 0.96;

    void validate() const {
        if (s < 1) throw ConfigError("s must be >= 1");
        if (kind == PolicyKind::bas) {
            if (s > k) throw ConfigError("s must not exceed k for the bas policy");
            if (n < 2) throw ConfigError("n must be >= 2");
            if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
        }
    }
};

inline const char* to_string(PolicyKind kind) { return kind == PolicyKind::bas ? "bas" : "random"; }

inline PolicyKind parse_policy_kind(const std::string& s) {
    if (s == "bas") return PolicyKind::bas;
    if (s == "random") return PolicyKind::random;
    throw ConfigError("unknown policy '" + s + "' (expected bas or random)");
}

struct ScoringResult {
    std::vector<UncertaintyRecord> records;
    std::size_t generations = 0;
    std::size_t bleu_evaluations = 0;
    double generation_seconds = 0.0;  // summed over workers
    double bleu_seconds = 0.0;        // summed over workers
};

/// One record per candidate, in input order. Documents are scored on up to
/// `workers` threads when the learner allows it; each output slot is
/// written by exactly one worker, so results do not depend on scheduling.
inline ScoringResult score_candidates(Learner& learner, const ModelHandle& model, std::span<const Document> candidates,
                                      std::size_t n, Seed seed, std::size_t workers = 1) {
    if (n < 2) throw ArityError("score_candidates needs n >= 2, got " + std::to_string(n));
    using clock = std::chrono::steady_clock;
    ScoringResult result;
    result.records.resize(candidates.size());
    std::vector<double> gen_time(candidates.size()), bleu_time(candidates.size());

    auto score_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& doc = candidates[i];
            const auto t0 = clock::now();
            auto batch = learner.generate_stochastic(model, doc.id, doc.text, n, seed);
            const auto t1 = clock::now();
            if (batch.summaries.size() != n) {
                throw ProtocolError("learner returned " + std::to_string(batch.summaries.size()) + " summaries, expected " +
                                    std::to_string(n));
            }
            const double value = bleuvar(batch.summaries).value;
            const auto t2 = clock::now();
            result.records[i] = UncertaintyRecord{doc.id, value, std::move(batch.summaries), false};
            gen_time[i] = std::chrono::duration<double>(t1 - t0).count();
            bleu_time[i] = std::chrono::duration<double>(t2 - t1).count();
        }
    };

    const std::size_t threads = learner.concurrent() ? std::clamp<std::size_t>(workers, 1, candidates.size()) : 1;
    if (threads <= 1) {
        score_range(0, candidates.size());
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::jthread> pool;
        const std::size_t chunk = (candidates.size() + threads - 1) / threads;
        for (std::size_t w = 0; w < threads; ++w) {
            const std::size_t begin = std::min(candidates.size(), w * chunk);
            const std::size_t end = std::min(candidates.size(), begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    score_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    result.generations = candidates.size() * n;
    result.bleu_evaluations = candidates.size() * n * (n - 1);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        result.generation_seconds += gen_time[i];
        result.bleu_seconds += bleu_time[i];
    }
    return result;
}

/// Flags records strictly above the threshold.
inline void apply_threshold(std::span<UncertaintyRecord> records, double tau) {
    for (auto& r : records) r.filtered = r.bleuvar > tau;
}

/// Top min(s, survivors) ids by BLEUVar descending (ties by id ascending)
/// among records with bleuvar <= tau.
inline std::vector<std::string> select(std::span<const UncertaintyRecord> records, std::size_t s, double tau) {
    if (s < 1) throw DomainError("select needs s >= 1");
    std::vector<const UncertaintyRecord*> survivors;
    for (const auto& r : records) {
        if (!(r.bleuvar > tau)) survivors.push_back(&r);
    }
    std::sort(survivors.begin(), survivors.end(), [](const UncertaintyRecord* a, const UncertaintyRecord* b) {
        if (a->bleuvar != b->bleuvar) return a->bleuvar > b->bleuvar;
        return a->doc_id < b->doc_id;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < survivors.size() && i < s; ++i) ids.push_back(survivors[i]->doc_id);
    return ids;
}

inline std::vector<std::string> random_select(const PoolState& pool, std::size_t s, Seed seed) {
    if (s < 1) throw DomainError("random_select needs s >= 1");
    std::vector<std::string> ids;
    for (const auto& d : sample_candidates(pool, s, seed)) ids.push_back(d.id);
    return ids;
}

}  // namespace bas
