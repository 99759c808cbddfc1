#pragma once

// The active summarization driver: warm start, then learning steps that
// alternate acquisition and retraining from scratch until the training
// budget is spent.

#include "bas/acquisition.hpp"
#include "bas/corpus.hpp"
#include "bas/csv.hpp"
#include "bas/learner.hpp"
#include "bas/metrics.hpp"
#include "bas/protocol.hpp"
#include "bas/toy_learner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bas {

struct ExperimentConfig {
    std::string name = "run";
    std::size_t b = 800;
    std::size_t v = 100;
    std::size_t s0 = 50;
    AcquisitionPolicy policy;
    LearnerConfig learner;
    std::optional<Seed> learner_seed;  // defaults to a stream of `seed`
    std::string learner_cmd;           // empty: built-in toy learner
    Seed seed = 0;
    bool eval_every_step = false;
    std::string test_path;
    std::size_t workers = 1;
    std::size_t max_empty_steps = 10;

    void validate() const {
        if (s0 > b) throw ConfigError("s0 must not exceed b");
        if (s0 == 0 && b > 0) throw ConfigError("s0 must be >= 1 (the warm start trains on it)");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (max_empty_steps < 1) throw ConfigError("max_empty_steps must be >= 1");
        policy.validate();
        learner.validate();
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::size_t to_count(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        if (!value.empty() && value.front() == '-') throw std::invalid_argument(value);
        x = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': expected a non-negative integer, got '" + value + "'");
    }
    if (pos != value.size()) throw ConfigError("'" + key + "': expected a non-negative integer, got '" + value + "'");
    return static_cast<std::size_t>(x);
}

inline double to_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos == value.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "': expected a number, got '" + value + "'");
}

inline bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("'" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are rejected.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "name") c.name = value;
    else if (key == "b") c.b = to_count(key, value);
    else if (key == "v") c.v = to_count(key, value);
    else if (key == "s0") c.s0 = to_count(key, value);
    else if (key == "policy") c.policy.kind = parse_policy_kind(value);
    else if (key == "k") c.policy.k = to_count(key, value);
    else if (key == "s") c.policy.s = to_count(key, value);
    else if (key == "n") c.policy.n = to_count(key, value);
    else if (key == "tau") c.policy.tau = to_real(key, value);
    else if (key == "seed") c.seed = to_count(key, value);
    else if (key == "eval_every_step") c.eval_every_step = to_bool(key, value);
    else if (key == "test") c.test_path = value;
    else if (key == "beam_size") c.learner.beam_size = to_count(key, value);
    else if (key == "max_epochs") c.learner.max_epochs = to_count(key, value);
    else if (key == "patience") c.learner.patience = to_count(key, value);
    else if (key == "dropout_rate") c.learner.dropout_rate = to_real(key, value);
    else if (key == "learner_seed") c.learner_seed = to_count(key, value);
    else if (key == "learner_cmd") c.learner_cmd = value;
    else if (key == "workers") c.workers = to_count(key, value);
    else if (key == "max_empty_steps") c.max_empty_steps = to_count(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat `key = value` document; '#' starts a comment line.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_number) + ": expected key = value");
        }
        apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    return parse_config(in, std::move(base));
}

/// Every key with its effective value, in a fixed order; parse_config of
/// this text reproduces the configuration.
inline std::string resolved(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "name = " << c.name << '\n'
        << "b = " << c.b << '\n'
        << "v = " << c.v << '\n'
        << "s0 = " << c.s0 << '\n'
        << "policy = " << to_string(c.policy.kind) << '\n'
        << "k = " << c.policy.k << '\n'
        << "s = " << c.policy.s << '\n'
        << "n = " << c.policy.n << '\n'
        << "tau = " << csv::format(c.policy.tau) << '\n'
        << "seed = " << c.seed << '\n'
        << "eval_every_step = " << (c.eval_every_step ? "true" : "false") << '\n'
        << "test = " << c.test_path << '\n'
        << "beam_size = " << c.learner.beam_size << '\n'
        << "max_epochs = " << c.learner.max_epochs << '\n'
        << "patience = " << c.learner.patience << '\n'
        << "dropout_rate = " << csv::format(c.learner.dropout_rate) << '\n';
    if (c.learner_seed) out << "learner_seed = " << *c.learner_seed << '\n';
    out << "learner_cmd = " << c.learner_cmd << '\n'
        << "workers = " << c.workers << '\n'
        << "max_empty_steps = " << c.max_empty_steps << '\n';
    return out.str();
}

/// Built-in toy learner for an empty command, otherwise a child process.
/// "self" runs `<self_exe> learner`.
inline std::unique_ptr<Learner> make_learner(const std::string& command, const std::string& self_exe = {}) {
    if (command.empty()) return std::make_unique<ToyLearner>();
    if (command == "self") {
        if (self_exe.empty()) throw ConfigError("learner_cmd 'self' needs the executable path");
        return std::make_unique<protocol::ProcessLearner>("'" + self_exe + "' learner");
    }
    return std::make_unique<protocol::ProcessLearner>(command);
}

struct EvalScores {
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;

    bool operator==(const EvalScores&) const = default;
};

/// Mean ROUGE-1/2/L F1 of deterministic summaries over the documents of
/// `test` that carry a reference.
inline EvalScores evaluate(Learner& learner, const ModelHandle& model, const Corpus& test) {
    EvalScores sum;
    std::size_t count = 0;
    for (const auto& doc : test) {
        if (!doc.reference) continue;
        const auto cand = tokenize(learner.generate(model, doc.text));
        const auto ref = tokenize(*doc.reference);
        sum.rouge1 += rouge_n(cand, ref, 1).f1;
        sum.rouge2 += rouge_n(cand, ref, 2).f1;
        sum.rougeL += rouge_l(cand, ref).f1;
        ++count;
    }
    if (count == 0) return sum;
    const double d = static_cast<double>(count);
    return {sum.rouge1 / d, sum.rouge2 / d, sum.rougeL / d};
}

struct StepTimings {
    double scoring_seconds = 0.0;
    double generation_seconds = 0.0;  // scoring_seconds split by measured share
    double bleu_seconds = 0.0;
    double training_seconds = 0.0;
    double total_seconds = 0.0;  // excludes evaluation
    double eval_seconds = 0.0;
};

struct StepRecord {
    std::size_t step = 0;
    std::size_t candidates = 0;  // |K|
    std::vector<std::string> selected_ids;
    std::vector<std::string> filtered_ids;
    std::size_t labeled_size_after = 0;
    double mean_selected_bleuvar = std::nan("");
    bool trained = false;
    StepTimings timings;
    std::optional<EvalScores> eval;
};

struct UncertaintyRow {
    std::size_t step = 0;
    std::string doc_id;
    double bleuvar = 0.0;
    bool selected = false;
    bool filtered = false;
};

struct RunResult {
    ExperimentConfig config;
    StepRecord warm_start;  // step 0
    std::vector<StepRecord> steps;
    std::vector<UncertaintyRow> uncertainty;
    bool aborted = false;
    std::string abort_reason;
};

/// Sequential state machine over one pool and one learner.
class Engine {
public:
    using clock = std::chrono::steady_clock;

    Engine(ExperimentConfig config, std::shared_ptr<const Corpus> corpus, Learner& learner,
           std::shared_ptr<const Corpus> test = nullptr)
        : config_(std::move(config)), corpus_(std::move(corpus)), test_(std::move(test)), learner_(learner) {
        config_.validate();
        learner_config_ = config_.learner;
        learner_config_.base_seed = config_.learner_seed.value_or(derive_seed(config_.seed, "learner"));
    }

    /// Splits the pool and trains M_0 on the warm-start sample.
    StepRecord warm_start() {
        const auto t0 = clock::now();
        pool_.emplace(initialize_pool(corpus_, config_.v, config_.s0, derive_seed(config_.seed, "pool-split"), config_.b));
        StepRecord rec;
        rec.step = 0;
        for (const auto& ex : pool_->labeled()) rec.selected_ids.push_back(ex.doc_id);
        if (pool_->l() > 0) {
            const auto t1 = clock::now();
            model_ = learner_.train(pool_->labeled(), pool_->validation(), learner_config_);
            rec.timings.training_seconds = seconds(t1, clock::now());
            rec.trained = true;
        }
        rec.labeled_size_after = pool_->l();
        rec.timings.total_seconds = seconds(t0, clock::now());
        maybe_evaluate(rec);
        return rec;
    }

    [[nodiscard]] bool finished() const {
        return !pool_ || pool_->l() >= config_.b || pool_->u() == 0 || empty_streak_ >= config_.max_empty_steps;
    }

    /// One acquisition + retraining round. Requires l < b.
    StepRecord learning_step() {
        if (!pool_ || !model_) throw ContractError("learning_step before warm_start");
        if (pool_->l() >= config_.b) throw ContractError("training budget already exhausted");
        const auto t0 = clock::now();
        const std::size_t step = ++step_index_;
        const std::size_t quota = std::min(config_.policy.s, config_.b - pool_->l());
        StepRecord rec;
        rec.step = step;

        if (config_.policy.kind == PolicyKind::random) {
            rec.selected_ids = random_select(*pool_, quota, derive_seed(config_.seed, "random-select", step));
        } else {
            const auto candidates = sample_candidates(*pool_, config_.policy.k, derive_seed(config_.seed, "candidates", step));
            rec.candidates = candidates.size();
            const auto ts = clock::now();
            auto scored = score_candidates(learner_, *model_, candidates, config_.policy.n,
                                           derive_seed(config_.seed, "mc", step), config_.workers);
            rec.timings.scoring_seconds = seconds(ts, clock::now());
            const double measured = scored.generation_seconds + scored.bleu_seconds;
            const double gen_share = measured > 0.0 ? scored.generation_seconds / measured : 1.0;
            rec.timings.generation_seconds = rec.timings.scoring_seconds * gen_share;
            rec.timings.bleu_seconds = rec.timings.scoring_seconds - rec.timings.generation_seconds;

            apply_threshold(scored.records, config_.policy.tau);
            rec.selected_ids = select(scored.records, quota, config_.policy.tau);
            double sum = 0.0;
            for (const auto& r : scored.records) {
                const bool chosen = std::find(rec.selected_ids.begin(), rec.selected_ids.end(), r.doc_id) != rec.selected_ids.end();
                if (r.filtered) rec.filtered_ids.push_back(r.doc_id);
                if (chosen) sum += r.bleuvar;
                uncertainty_.push_back({step, r.doc_id, r.bleuvar, chosen, r.filtered});
            }
            if (!rec.selected_ids.empty()) rec.mean_selected_bleuvar = sum / static_cast<double>(rec.selected_ids.size());
        }

        if (rec.selected_ids.empty()) {
            ++empty_streak_;
        } else {
            empty_streak_ = 0;
            pool_ = annotate(std::move(*pool_), rec.selected_ids);
            const auto tt = clock::now();
            model_ = learner_.train(pool_->labeled(), pool_->validation(), learner_config_);
            rec.timings.training_seconds = seconds(tt, clock::now());
            rec.trained = true;
        }
        rec.labeled_size_after = pool_->l();
        rec.timings.total_seconds = seconds(t0, clock::now());
        if (rec.trained) maybe_evaluate(rec);
        else if (!trajectory_eval_.empty()) rec.eval = trajectory_eval_.back();
        return rec;
    }

    RunResult run() {
        RunResult result;
        result.config = config_;
        result.warm_start = warm_start();
        while (!finished()) result.steps.push_back(learning_step());
        if (empty_streak_ >= config_.max_empty_steps) {
            result.aborted = true;
            result.abort_reason = std::to_string(empty_streak_) + " consecutive steps selected nothing (every candidate above tau = " +
                                  csv::format(config_.policy.tau) + ")";
        }
        result.uncertainty = std::move(uncertainty_);
        uncertainty_.clear();
        return result;
    }

    [[nodiscard]] const PoolState& pool() const {
        if (!pool_) throw ContractError("pool not initialised");
        return *pool_;
    }
    [[nodiscard]] const std::optional<ModelHandle>& model() const noexcept { return model_; }
    [[nodiscard]] const ExperimentConfig& config() const noexcept { return config_; }
    [[nodiscard]] const LearnerConfig& learner_config() const noexcept { return learner_config_; }

private:
    static double seconds(clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

    void maybe_evaluate(StepRecord& rec) {
        if (!config_.eval_every_step || !test_ || !model_) return;
        const auto t0 = clock::now();
        rec.eval = evaluate(learner_, *model_, *test_);
        rec.timings.eval_seconds = seconds(t0, clock::now());
        trajectory_eval_.push_back(*rec.eval);
    }

    ExperimentConfig config_;
    LearnerConfig learner_config_;
    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<const Corpus> test_;
    Learner& learner_;
    std::optional<PoolState> pool_;
    std::optional<ModelHandle> model_;
    std::size_t step_index_ = 0;
    std::size_t empty_streak_ = 0;
    std::vector<UncertaintyRow> uncertainty_;
    std::vector<EvalScores> trajectory_eval_;
};

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(';');
        out += ids[i];
    }
    return out;
}

inline void trajectory_row(std::ostream& out, const StepRecord& r, const char* policy) {
    csv::write_row(out, {std::to_string(r.step), policy, std::to_string(r.candidates), std::to_string(r.selected_ids.size()),
                         std::to_string(r.filtered_ids.size()), std::to_string(r.labeled_size_after),
                         csv::format(r.mean_selected_bleuvar), r.eval ? csv::format(r.eval->rouge1) : "",
                         r.eval ? csv::format(r.eval->rouge2) : "", r.eval ? csv::format(r.eval->rougeL) : "",
                         join_ids(r.selected_ids)});
}

}  // namespace detail

/// Deterministic per-step summary (no wall-clock values); step 0 is the
/// warm start.
inline void write_trajectory(std::ostream& out, const RunResult& run) {
    csv::write_row(out, {"step", "policy", "candidates", "selected", "filtered", "labeled_size", "mean_selected_bleuvar",
                         "rouge1", "rouge2", "rougeL", "selected_ids"});
    detail::trajectory_row(out, run.warm_start, "warm_start");
    for (const auto& r : run.steps) detail::trajectory_row(out, r, to_string(run.config.policy.kind));
}

inline const std::vector<std::string>& timing_header() {
    static const std::vector<std::string> header{"step", "k", "n", "candidates", "trained", "scoring_seconds",
                                                 "generation_seconds", "bleu_seconds", "training_seconds",
                                                 "total_seconds", "eval_seconds"};
    return header;
}

inline std::vector<std::string> timing_fields(const StepRecord& r, const ExperimentConfig& c) {
    const bool bas = c.policy.kind == PolicyKind::bas && r.step > 0;
    return {std::to_string(r.step),
            std::to_string(bas ? c.policy.k : 0),
            std::to_string(bas ? c.policy.n : 0),
            std::to_string(r.candidates),
            r.trained ? "1" : "0",
            csv::format(r.timings.scoring_seconds),
            csv::format(r.timings.generation_seconds),
            csv::format(r.timings.bleu_seconds),
            csv::format(r.timings.training_seconds),
            csv::format(r.timings.total_seconds),
            csv::format(r.timings.eval_seconds)};
}

inline void write_timings(std::ostream& out, const RunResult& run) {
    csv::write_row(out, timing_header());
    csv::write_row(out, timing_fields(run.warm_start, run.config));
    for (const auto& r : run.steps) csv::write_row(out, timing_fields(r, run.config));
}

inline void write_uncertainty(std::ostream& out, const std::vector<UncertaintyRow>& rows) {
    csv::write_row(out, {"step", "doc_id", "bleuvar", "selected", "filtered"});
    for (const auto& r : rows) {
        csv::write_row(out, {std::to_string(r.step), r.doc_id, csv::format(r.bleuvar), r.selected ? "1" : "0",
                             r.filtered ? "1" : "0"});
    }
}

/// trajectory.csv, uncertainty.csv, timings.csv and config.resolved.
inline void write_run_outputs(const std::filesystem::path& dir, const RunResult& run) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw IoError("cannot write '" + (dir / name).string() + "'");
        return f;
    };
    {
        auto f = open("trajectory.csv");
        write_trajectory(f, run);
    }
    {
        auto f = open("uncertainty.csv");
        write_uncertainty(f, run.uncertainty);
    }
    {
        auto f = open("timings.csv");
        write_timings(f, run);
    }
    {
        auto f = open("config.resolved");
        f << resolved(run.config);
    }
}

}  // namespace bas
