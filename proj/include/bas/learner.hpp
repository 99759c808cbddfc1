#pragma once

// The learner contract shared by the in-process toy learner and external
// learners spoken to over the wire protocol.

#include "bas/corpus.hpp"
#include "bas/error.hpp"
#include "bas/rng.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bas {

struct LearnerConfig {
    std::size_t beam_size = 3;
    std::size_t max_epochs = 10;
    std::size_t patience = 4;
    double dropout_rate = 0.1;
    Seed base_seed = 0;

    void validate() const {
        if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
        if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    }

    bool operator==(const LearnerConfig&) const = default;
};

/// Opaque reference to a model held by a learner. Valid until the next
/// train call on the same learner.
struct ModelHandle {
    std::string token;
    std::size_t generation = 0;
    std::size_t epochs = 0;

    bool operator==(const ModelHandle&) const = default;
};

struct StochasticBatch {
    std::string doc_id;
    std::vector<std::string> summaries;

    bool operator==(const StochasticBatch&) const = default;
};

class Learner {
public:
    virtual ~Learner() = default;

    /// Trains from the pristine initial state on all of `labeled`.
    virtual ModelHandle train(std::span<const LabeledExample> labeled, std::span<const LabeledExample> validation,
                              const LearnerConfig& config) = 0;

    /// Deterministic generation (stochasticity off).
    virtual std::string generate(const ModelHandle& model, const std::string& text) = 0;

    /// n >= 2 samples with stochasticity on; sample j is driven by
    /// mc_sub_seed(seed, doc_id, j).
    virtual StochasticBatch generate_stochastic(const ModelHandle& model, const std::string& doc_id,
                                                const std::string& text, std::size_t n, Seed seed) = 0;

    /// True when generate/generate_stochastic may be called from several
    /// threads at once (never concurrently with train).
    [[nodiscard]] virtual bool concurrent() const noexcept { return false; }
};

}  // namespace bas
