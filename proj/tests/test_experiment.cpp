#include "bas/experiment.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

namespace {

bas::StepRecord point(std::size_t step, std::size_t l, double r1) {
    bas::StepRecord r;
    r.step = step;
    r.labeled_size_after = l;
    r.trained = true;
    r.eval = bas::EvalScores{r1, r1 / 2, r1 / 3};
    return r;
}

bas::Cell cell(const std::string& strategy, bas::Seed seed, const std::vector<std::pair<std::size_t, double>>& pts,
               std::size_t b = 300) {
    bas::Cell c;
    c.strategy = strategy;
    c.seed = seed;
    c.config.b = b;
    c.config.policy.kind = strategy.rfind("bas", 0) == 0 ? bas::PolicyKind::bas : bas::PolicyKind::random;
    c.run.warm_start = point(0, pts.front().first, pts.front().second);
    for (std::size_t i = 1; i < pts.size(); ++i) c.run.steps.push_back(point(i, pts[i].first, pts[i].second));
    return c;
}

/// Random report: per-seed curves on a shared l grid with a few repeated l.
bas::ComparisonReport random_report(bas::Rng& rng, std::size_t strategies, std::size_t seeds) {
    bas::ComparisonReport r;
    for (std::size_t s = 0; s < strategies; ++s) {
        const std::string name = (s % 2 ? "random-" : "bas-") + std::to_string(s);
        r.strategies.push_back(name);
        for (std::size_t seed = 0; seed < seeds; ++seed) {
            std::vector<std::pair<std::size_t, double>> pts;
            std::size_t l = 50;
            for (int i = 0; i < 26; ++i) {
                pts.emplace_back(l, rng.uniform01());
                if (rng.below(5)) l += 10;
            }
            r.cells.push_back(cell(name, seed, pts, l));
        }
    }
    return r;
}

TEST(Aggregate, MatchesRecomputationFromRawRuns) {
    bas::Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        auto report = random_report(rng, 3, 1 + rng.below(5));
        bas::aggregate(report, {150});
        for (const auto& strategy : report.strategies) {
            for (const auto& metric : bas::curve_metrics()) {
                // Independent pass: last value per (seed, l), then mean and
                // population std over seeds per l.
                std::map<std::size_t, std::vector<double>> by_l;
                for (const auto& c : report.cells) {
                    if (c.strategy != strategy) continue;
                    std::map<std::size_t, double> last;
                    last[c.run.warm_start.labeled_size_after] = bas::metric_of(*c.run.warm_start.eval, metric);
                    for (const auto& s : c.run.steps) last[s.labeled_size_after] = bas::metric_of(*s.eval, metric);
                    for (const auto& [l, x] : last) by_l[l].push_back(x);
                }
                const auto pts = report.curve(strategy, metric);
                ASSERT_EQ(pts.size(), by_l.size());
                std::size_t i = 0;
                for (const auto& [l, xs] : by_l) {
                    double mean = 0.0, var = 0.0;
                    for (double x : xs) mean += x;
                    mean /= static_cast<double>(xs.size());
                    for (double x : xs) var += (x - mean) * (x - mean);
                    ASSERT_EQ(pts[i].labeled_size, l);
                    ASSERT_EQ(pts[i].seeds, xs.size());
                    ASSERT_NEAR(pts[i].mean, mean, 1e-12);
                    ASSERT_NEAR(pts[i].std, std::sqrt(var / static_cast<double>(xs.size())), 1e-12);
                    ++i;
                }
                // Best-so-far at cap 150 is the max of the mean curve over l <= 150.
                double best = -1.0;
                for (const auto& p : pts) {
                    if (p.labeled_size <= 150) best = std::max(best, p.mean);
                }
                const auto it = std::find_if(report.best.begin(), report.best.end(), [&](const bas::BestScore& b) {
                    return b.strategy == strategy && b.metric == metric && b.cap == 150;
                });
                ASSERT_NE(it, report.best.end());
                ASSERT_EQ(it->best_mean, best);
            }
        }
    }
}

TEST(Aggregate, SingleSeedHasZeroStd) {
    bas::ComparisonReport r;
    r.strategies = {"bas-100"};
    r.cells.push_back(cell("bas-100", 1, {{50, 0.2}, {60, 0.3}, {70, 0.25}}, 70));
    bas::aggregate(r, {150});
    const auto pts = r.curve("bas-100", "rouge1");
    ASSERT_EQ(pts.size(), 3u);
    for (const auto& p : pts) EXPECT_EQ(p.std, 0.0);
    EXPECT_EQ(pts[1].mean, 0.3);
    // Caps are 150 and b = 70; both cover the whole curve.
    for (const auto& b : r.best) {
        if (b.metric == "rouge1") {
            EXPECT_EQ(b.best_mean, 0.3);
        }
        EXPECT_EQ(b.std_over_seeds, 0.0);
    }
}

TEST(Aggregate, BestStdIsOverPerSeedBests) {
    bas::ComparisonReport r;
    r.strategies = {"bas-100"};
    r.cells.push_back(cell("bas-100", 1, {{50, 0.2}, {100, 0.6}, {200, 0.9}}, 200));
    r.cells.push_back(cell("bas-100", 2, {{50, 0.4}, {100, 0.4}, {200, 0.5}}, 200));
    bas::aggregate(r, {150});
    const auto it = std::find_if(r.best.begin(), r.best.end(),
                                 [](const bas::BestScore& b) { return b.metric == "rouge1" && b.cap == 150; });
    ASSERT_NE(it, r.best.end());
    EXPECT_NEAR(it->best_mean, 0.5, 1e-15);       // mean curve (0.3, 0.5)
    EXPECT_NEAR(it->std_over_seeds, 0.1, 1e-15);  // seed bests 0.6 and 0.4
    const auto full = std::find_if(r.best.begin(), r.best.end(),
                                   [](const bas::BestScore& b) { return b.metric == "rouge1" && b.cap == 200; });
    ASSERT_NE(full, r.best.end());
    EXPECT_NEAR(full->best_mean, 0.7, 1e-15);
}

TEST(Aggregate, FailedCellsMarkIncomplete) {
    bas::ComparisonReport r;
    r.strategies = {"bas-100"};
    r.cells.push_back(cell("bas-100", 1, {{50, 0.2}}));
    auto bad = cell("bas-100", 2, {{50, 0.9}});
    bad.failed = true;
    r.cells.push_back(bad);
    bas::aggregate(r, {150});
    EXPECT_TRUE(r.incomplete);
    EXPECT_EQ(r.curve("bas-100", "rouge1").front().mean, 0.2);
}

TEST(RunPoints, RepeatedLCollapses) {
    bas::RunResult run;
    run.warm_start = point(0, 50, 0.1);
    run.steps = {point(1, 60, 0.2), point(2, 60, 0.2), point(3, 70, 0.3)};
    run.steps[1].trained = false;
    const auto pts = bas::run_points(run);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts[1].first, 60u);
    EXPECT_EQ(pts[2].first, 70u);
}

TEST(Report, CurvesRoundTrip) {
    bas::Rng rng(9);
    auto report = random_report(rng, 2, 3);
    bas::aggregate(report, {150});
    std::stringstream ss;
    bas::write_curves(ss, report);
    const auto back = bas::read_curves(ss);
    ASSERT_EQ(back.size(), report.curves.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].strategy, report.curves[i].strategy);
        EXPECT_EQ(back[i].labeled_size, report.curves[i].labeled_size);
        EXPECT_EQ(back[i].mean, report.curves[i].mean);
        EXPECT_EQ(back[i].std, report.curves[i].std);
    }
}

TEST(Report, HistogramBins) {
    EXPECT_EQ(bas::histogram_bin(0.0), 0u);
    EXPECT_EQ(bas::histogram_bin(-1.0), 0u);
    EXPECT_EQ(bas::histogram_bin(0.0499), 0u);
    EXPECT_EQ(bas::histogram_bin(0.05), 1u);
    EXPECT_EQ(bas::histogram_bin(0.5), 10u);
    EXPECT_EQ(bas::histogram_bin(0.999), 19u);
    EXPECT_EQ(bas::histogram_bin(1.0), 19u);
}

TEST(Report, HistogramCountsSelectedRowsOnly) {
    bas::ComparisonReport r;
    r.strategies = {"bas-100", "random"};
    auto c = cell("bas-100", 1, {{50, 0.2}, {60, 0.3}});
    c.config.policy.k = 100;
    c.run.uncertainty = {{1, "a", 0.01, true, false}, {1, "b", 0.02, true, false}, {1, "c", 0.5, true, false},
                         {1, "d", 1.0, true, false},  {1, "e", 0.3, false, false}, {1, "f", 0.99, false, true}};
    r.cells.push_back(c);
    r.cells.push_back(cell("random", 1, {{50, 0.2}, {60, 0.25}}));
    bas::aggregate(r, {150});
    support::TempDir dir;
    bas::emit_report(r, dir.path());
    const auto t = bas::csv::read_file(dir / "uncertainty_hist.csv");
    ASSERT_EQ(t.rows.size(), bas::kHistogramBins);  // random contributes no rows
    std::vector<std::size_t> want(20, 0);
    want[0] = 2;
    want[10] = 1;
    want[19] = 1;
    const auto cb = t.require("bin"), cc = t.require("count"), ck = t.require("k");
    for (const auto& row : t.rows) {
        EXPECT_EQ(row[ck], "100");
        EXPECT_EQ(std::stoull(row[cc]), want[std::stoull(row[cb])]) << "bin " << row[cb];
    }
}

bas::Matrix small_matrix() {
    bas::Matrix m;
    m.base.b = 80;
    m.base.v = 20;
    m.base.s0 = 40;
    m.base.policy.s = 20;
    m.base.policy.k = 60;
    m.strategies = {{"bas-60", {{"policy", "bas"}}}, {"random", {{"policy", "random"}}}};
    m.seeds = {1, 2};
    return m;
}

TEST(RunMatrix, EmitsFullReport) {
    auto data = support::synth_data(400, 60, 5);
    const auto report = bas::run_matrix(small_matrix(), data.pool_corpus, data.test_corpus, 2,
                                        [](const bas::ExperimentConfig&) { return std::make_unique<bas::ToyLearner>(); });
    ASSERT_EQ(report.cells.size(), 4u);
    EXPECT_FALSE(report.incomplete);
    EXPECT_EQ(report.cells[0].strategy, "bas-60");
    EXPECT_EQ(report.cells[3].seed, 2u);
    for (const auto& c : report.cells) {
        EXPECT_FALSE(c.failed) << c.error;
        EXPECT_EQ(c.run.steps.size(), 2u);
        EXPECT_TRUE(c.config.eval_every_step);
    }
    const auto pts = report.curve("random", "rougeL");
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts.front().labeled_size, 40u);
    EXPECT_EQ(pts.back().labeled_size, 80u);

    support::TempDir dir;
    const auto files = bas::emit_report(report, dir.path());
    std::size_t svgs = 0, csvs = 0;
    for (const auto& f : files) {
        EXPECT_TRUE(std::filesystem::exists(f));
        svgs += f.extension() == ".svg";
        csvs += f.extension() == ".csv";
    }
    EXPECT_EQ(svgs, 3u);
    EXPECT_EQ(csvs, 4u);
    const auto svg = support::read_file(dir / "curve_rouge1.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("bas-60"), std::string::npos);
    const auto timings = bas::csv::read_file(dir / "timings.csv");
    EXPECT_EQ(timings.rows.size(), 4u * 3u);
    EXPECT_TRUE(timings.column("strategy"));
}

TEST(RunMatrix, FailedCellsAreFlagged) {
    auto data = support::synth_data(400, 30, 6);
    const auto report = bas::run_matrix(small_matrix(), data.pool_corpus, data.test_corpus, 1,
                                        [](const bas::ExperimentConfig& c) -> std::unique_ptr<bas::Learner> {
                                            if (c.seed == 2) throw bas::TransportError("learner would not start");
                                            return std::make_unique<bas::ToyLearner>();
                                        });
    EXPECT_TRUE(report.incomplete);
    std::size_t failed = 0;
    for (const auto& c : report.cells) {
        if (c.failed) {
            ++failed;
            EXPECT_NE(c.error.find("would not start"), std::string::npos);
        }
    }
    EXPECT_EQ(failed, 2u);
    EXPECT_EQ(report.curve("bas-60", "rouge1").front().seeds, 1u);
    support::TempDir dir;
    bas::emit_report(report, dir.path());
    EXPECT_NE(support::read_file(dir / "cells.txt").find("report incomplete"), std::string::npos);
}

TEST(LoadMatrix, ParsesAndResolvesPaths) {
    support::TempDir dir;
    support::write_file(dir / "m.json", R"({
        "corpus": "pool.jsonl", "test": "/abs/test.jsonl",
        "base": {"b": 300, "tau": 0.92, "dropout_rate": 0.1},
        "strategies": [{"name": "bas-100", "policy": "bas", "k": 100}, {"name": "random", "policy": "random"}],
        "seeds": [1, 2, 3], "caps": [150, 200]})");
    const auto m = bas::load_matrix((dir / "m.json").string());
    EXPECT_EQ(m.corpus_path, (dir / "pool.jsonl").string());
    EXPECT_EQ(m.test_path, "/abs/test.jsonl");
    EXPECT_EQ(m.base.b, 300u);
    EXPECT_EQ(m.base.policy.tau, 0.92);
    EXPECT_EQ(m.seeds, (std::vector<bas::Seed>{1, 2, 3}));
    EXPECT_EQ(m.caps, (std::vector<std::size_t>{150, 200}));
    const auto c = m.cell_config(m.strategies[0], 3);
    EXPECT_EQ(c.name, "bas-100");
    EXPECT_EQ(c.policy.k, 100u);
    EXPECT_EQ(c.seed, 3u);
    EXPECT_EQ(c.learner.dropout_rate, 0.1);
    EXPECT_EQ(m.cell_config(m.strategies[1], 1).policy.kind, bas::PolicyKind::random);
}

TEST(LoadMatrix, Errors) {
    support::TempDir dir;
    EXPECT_THROW(bas::load_matrix((dir / "missing.json").string()), bas::IoError);
    support::write_file(dir / "a.json", "{");
    EXPECT_THROW(bas::load_matrix((dir / "a.json").string()), bas::ParseError);
    support::write_file(dir / "b.json", R"({"strategies": [], "seeds": [1]})");
    EXPECT_THROW(bas::load_matrix((dir / "b.json").string()), bas::ConfigError);
    support::write_file(dir / "c.json", R"({"strategies": [{"name": "x", "bogus": 1}], "seeds": [1]})");
    const auto m = bas::load_matrix((dir / "c.json").string());
    EXPECT_THROW(m.cell_config(m.strategies[0], 1), bas::ConfigError);
    support::write_file(dir / "d.json", R"({"strategies": [{"name": "x"}]})");
    EXPECT_THROW(bas::load_matrix((dir / "d.json").string()), bas::ConfigError);
}

}  // namespace
