// Command-line front end: run, experiment, score, calibrate, cost, synth
// and learner (protocol server mode).

#include "bas/bas.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

std::string self_exe() {
    std::error_code ec;
    auto p = fs::read_symlink("/proc/self/exe", ec);
    return ec ? std::string{} : p.string();
}

std::shared_ptr<const bas::Corpus> load_shared(const std::string& path) {
    return std::make_shared<const bas::Corpus>(bas::load_corpus(path));
}

/// id -> summary from a line-delimited file of {"id", "summary"} records.
std::vector<std::pair<std::string, std::string>> load_summaries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bas::IoError("cannot open '" + path + "'");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const auto& s = j.contains("summary") ? j.at("summary") : j.at("text");
            out.emplace_back(j.at("id").get<std::string>(), s.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw bas::ParseError(path + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

int cmd_score(const std::string& cand_path, const std::string& ref_path, const std::string& metric) {
    std::map<std::string, std::string> refs;
    for (auto& [id, s] : load_summaries(ref_path)) refs[id] = s;
    if (metric == "bleu") {
        bas::csv::write_row(std::cout, {"id", "bleu"});
    } else {
        bas::csv::write_row(std::cout, {"id", "precision", "recall", "f1"});
    }
    for (const auto& [id, s] : load_summaries(cand_path)) {
        auto it = refs.find(id);
        if (it == refs.end()) throw bas::ValidationError("no reference for candidate '" + id + "'");
        const auto c = bas::tokenize(s), r = bas::tokenize(it->second);
        if (metric == "bleu") {
            bas::csv::write_row(std::cout, {id, bas::csv::format(bas::bleu(c, r))});
            continue;
        }
        const auto score = metric == "rouge1"   ? bas::rouge_n(c, r, 1)
                           : metric == "rouge2" ? bas::rouge_n(c, r, 2)
                                                : bas::rouge_l(c, r);
        bas::csv::write_row(std::cout, {id, bas::csv::format(score.precision), bas::csv::format(score.recall),
                                        bas::csv::format(score.f1)});
    }
    return 0;
}

int cmd_run(const std::string& corpus_path, const std::string& config_path, const std::string& out_dir,
            const std::string& learner_cmd, const std::vector<std::string>& overrides) {
    bas::ExperimentConfig config;
    if (!config_path.empty()) config = bas::load_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw bas::ConfigError("--set expects key=value, got '" + kv + "'");
        bas::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!learner_cmd.empty()) config.learner_cmd = learner_cmd;
    auto corpus = load_shared(corpus_path);
    std::shared_ptr<const bas::Corpus> test;
    if (!config.test_path.empty()) test = load_shared(config.test_path);
    auto learner = bas::make_learner(config.learner_cmd, self_exe());
    bas::Engine engine(config, corpus, *learner, test);
    const auto result = engine.run();
    bas::write_run_outputs(out_dir, result);
    std::cerr << "run '" << config.name << "': " << result.steps.size() << " learning steps, l = "
              << (result.steps.empty() ? result.warm_start.labeled_size_after : result.steps.back().labeled_size_after)
              << '\n';
    if (result.aborted) {
        std::cerr << "aborted: " << result.abort_reason << '\n';
        return 3;
    }
    return 0;
}

int cmd_experiment(const std::string& matrix_path, const std::string& out_dir, std::size_t workers,
                   const std::string& corpus_override, const std::string& learner_cmd) {
    auto matrix = bas::load_matrix(matrix_path);
    if (!corpus_override.empty()) matrix.corpus_path = corpus_override;
    if (matrix.corpus_path.empty()) throw bas::ConfigError("matrix file names no corpus (and no --corpus given)");
    if (!learner_cmd.empty()) matrix.base.learner_cmd = learner_cmd;
    auto corpus = load_shared(matrix.corpus_path);
    std::shared_ptr<const bas::Corpus> test;
    if (!matrix.base.test_path.empty()) test = load_shared(matrix.base.test_path);
    const auto exe = self_exe();
    const auto report = bas::run_matrix(matrix, corpus, test, workers, [&](const bas::ExperimentConfig& c) {
        return bas::make_learner(c.learner_cmd, exe);
    });
    for (const auto& p : bas::emit_report(report, out_dir)) std::cerr << "wrote " << p.string() << '\n';
    for (const auto& cell : report.cells) {
        if (cell.failed) std::cerr << "cell " << cell.strategy << " seed " << cell.seed << " failed: " << cell.error << '\n';
    }
    return report.incomplete ? 2 : 0;
}

std::string timings_path_for(const std::string& path) {
    const auto t = bas::csv::read_file(path);
    if (t.column("scoring_seconds")) return path;
    const auto sibling = fs::path(path).parent_path() / "timings.csv";
    if (fs::exists(sibling)) return sibling.string();
    throw bas::ParseError("'" + path + "' has no timing columns and no sibling timings.csv");
}

int cmd_calibrate(const std::vector<std::string>& paths) {
    std::vector<bas::CostObservation> obs;
    double warm_sum = 0.0;
    std::size_t warm_count = 0;
    for (const auto& p : paths) {
        const auto t = bas::csv::read_file(timings_path_for(p));
        const auto c_step = t.require("step"), c_k = t.require("candidates"), c_n = t.require("n"),
                   c_tr = t.require("trained"), c_sc = t.require("scoring_seconds"),
                   c_tt = t.require("training_seconds");
        const auto c_gen = t.column("generation_seconds"), c_bl = t.column("bleu_seconds");
        for (const auto& row : t.rows) {
            const auto step = std::stoull(row[c_step]);
            const double training = bas::csv::parse_double(row[c_tt]);
            if (step == 0) {
                warm_sum += training;
                ++warm_count;
                continue;
            }
            const auto k = std::stoull(row[c_k]);
            if (k == 0 || row[c_tr] != "1") continue;
            bas::CostObservation o;
            o.k = k;
            o.n = std::stoull(row[c_n]);
            o.scoring_seconds = bas::csv::parse_double(row[c_sc]);
            o.training_seconds = training;
            if (c_gen && c_bl) {
                o.generation_seconds = bas::csv::parse_double(row[*c_gen]);
                o.bleu_seconds = bas::csv::parse_double(row[*c_bl]);
            }
            obs.push_back(o);
        }
    }
    const auto cal = bas::calibrate(obs, warm_count ? std::optional<double>(warm_sum / warm_count) : std::nullopt);
    std::cout << "c_sum = " << bas::csv::format(cal.constants.c_sum) << '\n'
              << "c_bl = " << bas::csv::format(cal.constants.c_bl) << '\n'
              << "c_train = " << bas::csv::format(cal.constants.c_train) << '\n'
              << "c_train0 = " << bas::csv::format(cal.constants.c_train0) << '\n'
              << "intercept = " << bas::csv::format(cal.intercept) << '\n'
              << "separable = " << (cal.separable ? "true" : "false") << '\n'
              << "observations = " << obs.size() << '\n'
              << "rmse = " << bas::csv::format(cal.rmse) << '\n';
    for (std::size_t i = 0; i < cal.residuals.size(); ++i) {
        std::cout << "residual." << i << " = " << bas::csv::format(cal.residuals[i]) << "  # k=" << obs[i].k
                  << " n=" << obs[i].n << '\n';
    }
    return 0;
}

bas::CostConstants load_constants(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw bas::IoError("cannot open constants file '" + path + "'");
    bas::CostConstants c;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = bas::detail::trim(line.substr(0, eq));
        const auto value = bas::detail::trim(line.substr(eq + 1));
        if (key == "c_sum") c.c_sum = bas::detail::to_real(key, value);
        else if (key == "c_bl") c.c_bl = bas::detail::to_real(key, value);
        else if (key == "c_train") c.c_train = bas::detail::to_real(key, value);
        else if (key == "c_train0") c.c_train0 = bas::detail::to_real(key, value);
    }
    return c;
}

int cmd_synth(const std::string& out, const std::string& test_out, const std::string& classes_out, std::size_t docs,
              std::size_t test_docs, std::size_t topics, double flat_rate, double garbage_rate, bas::Seed seed) {
    bas::synth::World world({topics, 6, 400, seed});
    bas::synth::SampleConfig sc;
    sc.documents = docs;
    sc.flat_rate = flat_rate;
    sc.garbage_rate = garbage_rate;
    sc.seed = seed;
    const auto pool = world.sample(sc);
    bas::save_corpus(out, pool.documents);
    if (!classes_out.empty()) {
        std::ofstream f(classes_out);
        bas::csv::write_row(f, {"id", "class", "topic"});
        for (std::size_t i = 0; i < pool.documents.size(); ++i) {
            bas::csv::write_row(f, {pool.documents[i].id, bas::synth::to_string(pool.classes[i]),
                                    std::to_string(pool.topics[i])});
        }
    }
    if (!test_out.empty() && test_docs > 0) {
        sc.documents = test_docs;
        sc.garbage_rate = 0.0;
        sc.id_prefix = "test";
        sc.seed = bas::derive_seed(seed, "test");
        bas::save_corpus(test_out, world.sample(sc).documents);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian active summarization: acquisition loop, metrics, cost model and reports"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one active learning trajectory");
    std::string corpus, config, out, learner_cmd;
    std::vector<std::string> overrides;
    run->add_option("--corpus", corpus, "Corpus file (one JSON record per line)")->required();
    run->add_option("--config", config, "Flat key = value configuration file");
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--learner-cmd", learner_cmd, "External learner command line, or 'self'");
    run->add_option("--set", overrides, "Override a config key (key=value), repeatable");

    auto* exp = app.add_subcommand("experiment", "Run a strategy x seed matrix and emit the report");
    std::string matrix;
    std::size_t workers = 1;
    exp->add_option("--matrix", matrix, "JSON matrix file")->required();
    exp->add_option("--out", out, "Report directory")->required();
    exp->add_option("--workers", workers, "Cells run in parallel")->check(CLI::PositiveNumber);
    exp->add_option("--corpus", corpus, "Override the matrix corpus path");
    exp->add_option("--learner-cmd", learner_cmd, "External learner command line, or 'self'");

    auto* score = app.add_subcommand("score", "Score candidate summaries against references");
    std::string candidates, references, metric;
    score->add_option("--candidates", candidates, "Records with id and summary")->required();
    score->add_option("--references", references, "Records with id and summary")->required();
    score->add_option("--metric", metric, "bleu | rouge1 | rouge2 | rougeL")
        ->required()
        ->check(CLI::IsMember({"bleu", "rouge1", "rouge2", "rougeL"}));

    auto* cal = app.add_subcommand("calibrate", "Fit cost-model constants to recorded step timings");
    std::vector<std::string> trajectories;
    cal->add_option("--trajectory", trajectories, "timings.csv (or trajectory.csv beside one), repeatable")->required();

    auto* cost = app.add_subcommand("cost", "Predict the total cost of a run");
    std::size_t k = 0, n = 0, s = 0, b = 0;
    std::string constants;
    cost->add_option("--k", k)->required();
    cost->add_option("--n", n)->required();
    cost->add_option("--s", s)->required();
    cost->add_option("--b", b)->required();
    cost->add_option("--constants", constants, "key = value file with c_sum, c_bl, c_train, c_train0")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic peaked/flat/garbage corpus");
    std::string test_out, classes_out;
    std::size_t docs = 2000, test_docs = 1000, topics = 60;
    double flat_rate = 0.25, garbage_rate = 0.06;
    bas::Seed seed = 1;
    synth->add_option("--out", out, "Pool corpus file")->required();
    synth->add_option("--test-out", test_out, "Held-out test corpus file");
    synth->add_option("--classes-out", classes_out, "CSV of id,class,topic for the pool");
    synth->add_option("--docs", docs);
    synth->add_option("--test-docs", test_docs);
    synth->add_option("--topics", topics);
    synth->add_option("--flat-rate", flat_rate);
    synth->add_option("--garbage-rate", garbage_rate);
    synth->add_option("--seed", seed);

    auto* learner = app.add_subcommand("learner", "Serve the toy learner over the line protocol on stdin/stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(corpus, config, out, learner_cmd, overrides);
        if (*exp) return cmd_experiment(matrix, out, workers, corpus, learner_cmd);
        if (*score) return cmd_score(candidates, references, metric);
        if (*cal) return cmd_calibrate(trajectories);
        if (*cost) {
            std::cout << bas::csv::format(bas::total_cost(k, n, s, b, load_constants(constants))) << '\n';
            return 0;
        }
        if (*synth) return cmd_synth(out, test_out, classes_out, docs, test_docs, topics, flat_rate, garbage_rate, seed);
        if (*learner) {
            bas::ToyLearner toy;
            bas::protocol::Server server(toy);
            server.serve(std::cin, std::cout);
            return 0;
        }
    } catch (const bas::Error& e) {
        std::cerr << "error (" << e.code() << "): " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
