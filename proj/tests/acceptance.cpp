// Acceptance suite: one PASS / FAIL line per criterion, exit status 1 if
// any criterion fails. Tolerances and runtime limits are pinned below.

#include "bas/bas.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <thread>

namespace {

constexpr double kMetricTol = 1e-12;
constexpr std::size_t kMetricCases = 2000;
constexpr double kMetricSeconds = 10.0;
constexpr double kHandCaseTol = 1e-12;
constexpr double kHandCaseSeconds = 1.0;
constexpr double kLoopSeconds = 120.0;
constexpr double kComparisonSeconds = 1800.0;
constexpr double kFinalSlack = 0.005;
constexpr double kPlantedRelTol = 1e-9;
constexpr double kGarbageEps = 1e-4;

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

int failures = 0;

void report(const char* verdict, const std::string& name, const std::string& detail) {
    std::printf("%-12s %-22s %s\n", verdict, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

void check(bool ok, const std::string& name, const std::string& detail) {
    if (!ok) ++failures;
    report(ok ? "PASS" : "FAIL", name, detail);
}

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

std::vector<std::string> random_tokens(bas::Rng& rng) {
    std::vector<std::string> t;
    for (std::size_t i = 0, len = rng.below(16); i < len; ++i) t.push_back("t" + std::to_string(rng.below(10)));
    return t;
}

void metric_exactness() {
    const auto t0 = clock_type::now();
    bas::Rng rng(1);
    double worst = 0.0;
    std::size_t nonzero_bleu = 0;
    for (std::size_t i = 0; i < kMetricCases; ++i) {
        const auto c = random_tokens(rng);
        auto r = random_tokens(rng);
        if (i % 2) {
            // Perturbed copy so high-order matches occur.
            r = c;
            for (auto& tok : r) {
                if (rng.below(4) == 0) tok = "t" + std::to_string(rng.below(10));
            }
        }
        const double b = bas::bleu(c, r);
        nonzero_bleu += b > 0.0;
        worst = std::max(worst, std::abs(b - oracle::bleu(c, r)));
        for (std::size_t n = 1; n <= 4; ++n) {
            const auto got = bas::rouge_n(c, r, n);
            const auto want = oracle::rouge_n(c, r, n);
            worst = std::max({worst, std::abs(got.precision - want.p), std::abs(got.recall - want.r), std::abs(got.f1 - want.f)});
        }
        const auto gl = bas::rouge_l(c, r);
        const auto wl = oracle::rouge_l(c, r);
        worst = std::max({worst, std::abs(gl.precision - wl.p), std::abs(gl.recall - wl.r), std::abs(gl.f1 - wl.f)});
        worst = std::max(worst, std::abs(static_cast<double>(bas::lcs_length(c, r)) - static_cast<double>(oracle::lcs(c, r))));
    }
    const double secs = since(t0);
    check(worst <= kMetricTol && nonzero_bleu > kMetricCases / 10 && secs < kMetricSeconds, "metric-exactness",
          fmt("%zu pairs, max |diff| = %.3g (tol %.0e), nonzero BLEU in %zu, %.2f s (limit %.0f s)", kMetricCases, worst,
              kMetricTol, nonzero_bleu, secs, kMetricSeconds));
}

void bleuvar_hand_cases() {
    const auto t0 = clock_type::now();
    const std::vector<std::string> same{"the cat sat on the mat", "the cat sat on the mat", "the cat sat on the mat"};
    const std::vector<std::string> disjoint{"alpha beta gamma", "delta epsilon zeta"};
    const std::vector<std::string> aab{"the cat sat on the mat", "the cat sat on the mat", "a dog ran in the park"};
    const double v0 = bas::bleuvar(same).value, v1 = bas::bleuvar(disjoint).value, v2 = bas::bleuvar(aab).value;
    const double secs = since(t0);
    const bool ok = std::abs(v0) <= kHandCaseTol && std::abs(v1 - 1.0) <= kHandCaseTol &&
                    std::abs(v2 - 4.0 / 6.0) <= kHandCaseTol && secs < kHandCaseSeconds;
    check(ok, "bleuvar-hand-cases",
          fmt("identical %.3g, disjoint pair %.15g, (A,A,B) %.15g vs 4/6 (tol %.0e), %.4f s", v0, v1, v2, kHandCaseTol, secs));
}

void loop_arithmetic(const support::SynthData& data, double tau) {
    const auto t0 = clock_type::now();
    bas::ExperimentConfig c;
    c.b = 800;
    c.s0 = 50;
    c.policy.s = 10;
    c.policy.tau = tau;
    c.seed = 11;
    c.workers = std::max(1u, std::thread::hardware_concurrency());
    bas::ToyLearner learner;
    bas::Engine engine(c, data.pool_corpus, learner);
    const auto run = engine.run();
    std::size_t empty = 0;
    for (const auto& s : run.steps) empty += s.selected_ids.empty();
    const double secs = since(t0);
    check(run.steps.size() == 75 && engine.pool().l() == 800 && empty == 0 && !run.aborted && secs < kLoopSeconds,
          "loop-arithmetic",
          fmt("%zu learning steps (want 75), final l = %zu (want 800), %zu empty steps, %zu-doc pool, %.1f s (limit %.0f s)",
              run.steps.size(), engine.pool().l(), empty, data.pool.documents.size(), secs, kLoopSeconds));
}

void determinism(const support::SynthData& data, double tau) {
    support::TempDir dir("bas-accept");
    auto once = [&](const std::string& sub, std::size_t workers) {
        bas::ExperimentConfig c;
        c.b = 200;
        c.policy.tau = tau;
        c.seed = 5;
        c.eval_every_step = true;
        c.workers = workers;
        bas::ToyLearner learner;
        bas::Engine engine(c, data.pool_corpus, learner, data.test_corpus);
        bas::write_run_outputs(dir / sub, engine.run());
        return support::read_file(dir / sub / "trajectory.csv");
    };
    const auto a = once("a", 1);
    const auto b = once("b", 1);
    const auto c = once("c", std::max(2u, std::thread::hardware_concurrency()));
    check(!a.empty() && a == b && a == c, "determinism",
          fmt("trajectory.csv %zu bytes; repeat run %s, parallel scoring %s", a.size(), a == b ? "identical" : "DIFFERS",
              a == c ? "identical" : "DIFFERS"));
}

struct Comparison {
    bas::ComparisonReport report;
    double seconds = 0.0;
};

Comparison run_comparison(const support::SynthData& data, double tau) {
    bas::Matrix m;
    m.base.b = 300;
    m.base.s0 = 50;
    m.base.v = 100;
    m.base.policy.s = 10;
    m.base.policy.n = 10;
    m.base.policy.tau = tau;
    m.base.learner.dropout_rate = 0.1;
    m.strategies = {{"bas-50", {{"policy", "bas"}, {"k", "50"}}},
                    {"bas-100", {{"policy", "bas"}, {"k", "100"}}},
                    {"bas-200", {{"policy", "bas"}, {"k", "200"}}},
                    {"random", {{"policy", "random"}}}};
    m.seeds = {1, 2, 3, 4, 5};
    const auto t0 = clock_type::now();
    Comparison out;
    out.report = bas::run_matrix(m, data.pool_corpus, data.test_corpus, std::max(1u, std::thread::hardware_concurrency()),
                                 [](const bas::ExperimentConfig&) { return std::make_unique<bas::ToyLearner>(); });
    out.seconds = since(t0);
    return out;
}

const bas::Cell& cell_of(const bas::ComparisonReport& r, const std::string& strategy, bas::Seed seed) {
    for (const auto& c : r.cells) {
        if (c.strategy == strategy && c.seed == seed) return c;
    }
    throw std::runtime_error("no cell " + strategy);
}

std::map<std::size_t, double> rouge1_curve(const bas::Cell& c) {
    std::map<std::size_t, double> out;
    for (const auto& [l, e] : bas::run_points(c.run)) out[l] = e.rouge1;
    return out;
}

double final_rouge1(const bas::Cell& c) { return rouge1_curve(c).rbegin()->second; }

void bas_vs_random(const Comparison& cmp) {
    const auto& r = cmp.report;
    std::size_t winning_seeds = 0;
    std::string per_seed;
    double bas_final = 0.0, rnd_final = 0.0;
    bool complete = !r.incomplete;
    for (bas::Seed seed : {1, 2, 3}) {
        const auto b = rouge1_curve(cell_of(r, "bas-100", seed));
        const auto x = rouge1_curve(cell_of(r, "random", seed));
        std::size_t points = 0, behind = 0;
        for (const auto& [l, v] : x) {
            if (l > 150) continue;
            ++points;
            const auto it = b.find(l);
            if (it == b.end() || it->second < v) ++behind;
        }
        complete = complete && points > 0;
        winning_seeds += behind == 0;
        per_seed += fmt(" seed %u: %zu/%zu points behind;", static_cast<unsigned>(seed), behind, points);
        bas_final += b.rbegin()->second / 3.0;
        rnd_final += x.rbegin()->second / 3.0;
    }
    check(complete && winning_seeds >= 2 && bas_final >= rnd_final - kFinalSlack && cmp.seconds < kComparisonSeconds,
          "bas-vs-random",
          fmt("BAS-100 >= random at every l <= 150 in %zu/3 seeds (need 2);%s final ROUGE-1 %.4f vs %.4f (slack %.3f); "
              "matrix %.0f s (limit %.0f s)",
              winning_seeds, per_seed.c_str(), bas_final, rnd_final, kFinalSlack, cmp.seconds, kComparisonSeconds));
}

double mean_selected_bleuvar(const bas::Cell& c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : c.run.uncertainty) {
        if (!row.selected) continue;
        sum += row.bleuvar;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : std::nan("");
}

void k_shift(const Comparison& cmp) {
    std::size_t ok = 0;
    std::string detail;
    for (bas::Seed seed : {1, 2, 3}) {
        const double m50 = mean_selected_bleuvar(cell_of(cmp.report, "bas-50", seed));
        const double m200 = mean_selected_bleuvar(cell_of(cmp.report, "bas-200", seed));
        ok += m200 > m50;
        detail += fmt("seed %u: k=200 %.4f vs k=50 %.4f; ", static_cast<unsigned>(seed), m200, m50);
    }
    check(ok == 3, "k-shift", detail + "mean selected BLEUVar, strict in every seed");
}

void noise_filter(const Comparison& cmp, const support::SynthData& data, double tau) {
    std::set<std::string> garbage;
    for (std::size_t i = 0; i < data.pool.documents.size(); ++i) {
        if (data.pool.classes[i] == bas::synth::DocClass::garbage) garbage.insert(data.pool.documents[i].id);
    }
    // Counts documents placed in L by acquisition steps; the warm-start
    // sample is drawn before any scoring happens.
    auto acquired_garbage = [&](const bas::Cell& c) {
        std::size_t n = 0;
        for (const auto& s : c.run.steps) {
            for (const auto& id : s.selected_ids) n += garbage.count(id);
        }
        return n;
    };
    std::size_t bas_garbage = 0, rnd_garbage = 0, bas_filtered = 0;
    for (bas::Seed seed : {1, 2, 3}) {
        const auto& b = cell_of(cmp.report, "bas-100", seed);
        bas_garbage += acquired_garbage(b);
        rnd_garbage += acquired_garbage(cell_of(cmp.report, "random", seed));
        for (const auto& s : b.run.steps) {
            for (const auto& id : s.filtered_ids) bas_filtered += garbage.count(id);
        }
    }
    check(bas_garbage == 0 && rnd_garbage >= 1, "noise-filter",
          fmt("tau = %.4f; garbage acquired over 3 seeds: BAS-100 %zu (want 0, %zu garbage candidates filtered), "
              "random %zu (want >= 1); pool garbage rate %.3f",
              tau, bas_garbage, bas_filtered, rnd_garbage, static_cast<double>(garbage.size()) / data.pool.documents.size()));
}

void cost_model() {
    bool algebra = true;
    const bas::CostConstants c{0.5, 0.25, 8.0, 2.0};  // dyadic: products are exact
    bas::CostConstants c_no0 = c;
    c_no0.c_train0 = 0.0;
    for (std::size_t k = 1; k <= 64 && algebra; ++k) {
        for (std::size_t n = 1; n <= 16; ++n) {
            algebra = algebra && bas::scoring_cost(2 * k, n, c) == 2 * bas::scoring_cost(k, n, c);
            algebra = algebra && bas::scoring_cost(k + 3, n, c) == bas::scoring_cost(k, n, c) + bas::scoring_cost(3, n, c);
            const double d2 = bas::scoring_cost(k, n + 2, c) - 2 * bas::scoring_cost(k, n + 1, c) + bas::scoring_cost(k, n, c);
            algebra = algebra && d2 == 2.0 * static_cast<double>(k) * c.c_bl;
            algebra = algebra && bas::total_cost(k, n, 2 * n, 800, c_no0) == bas::total_cost(k, n, n, 800, c_no0) / 2;
            algebra = algebra && bas::total_cost(k, n, n, 1600, c_no0) == 2 * bas::total_cost(k, n, n, 800, c_no0);
        }
    }

    const bas::CostConstants planted{0.0123, 0.000456, 37.5, 80.0};
    std::vector<bas::CostObservation> obs;
    for (std::size_t k : {50, 100, 200, 500}) {
        for (std::size_t n : {4, 10, 16}) obs.push_back({k, n, 1.75 + bas::scoring_cost(k, n, planted), 37.5, {}, {}});
    }
    const auto cal = bas::calibrate(obs, 80.0);
    const double rel = std::max({std::abs(cal.constants.c_sum / planted.c_sum - 1), std::abs(cal.constants.c_bl / planted.c_bl - 1),
                                 std::abs(cal.intercept / 1.75 - 1), std::abs(cal.constants.c_train / planted.c_train - 1)});

    // Four (k, scoring seconds per step) points at n = 10, with total
    // seconds per step for the training share.
    const double table[4][3] = {{50, 150, 1144}, {100, 210, 1196}, {200, 370, 1434}, {500, 1280, 2113}};
    std::vector<bas::CostObservation> pub;
    for (const auto& row : table) pub.push_back({static_cast<std::size_t>(row[0]), 10, row[1], row[2] - row[1], {}, {}});
    bool fitted = false, monotone = false;
    std::string residuals;
    try {
        const auto pc = bas::calibrate(pub);
        fitted = pc.residuals.size() == 4;
        monotone = pc.constants.c_sum > 0.0;
        double prev = -1e300;
        for (std::size_t k = 1; k <= 2000; ++k) {
            const double p = pc.predict_scoring(k, 10);
            monotone = monotone && p > prev;
            prev = p;
        }
        for (std::size_t i = 0; i < pc.residuals.size(); ++i) residuals += fmt(" k=%zu:%+.1f", pub[i].k, pc.residuals[i]);
        residuals += fmt(" (per-summary %.4f s, intercept %.1f s, rmse %.1f s)", pc.constants.c_sum, pc.intercept, pc.rmse);
    } catch (const bas::Error& e) {
        residuals = std::string(" calibration failed: ") + e.what();
    }
    check(algebra && rel <= kPlantedRelTol && fitted && monotone, "cost-model",
          fmt("algebra %s; planted recovery max rel err %.2g (tol %.0e); published timings fit %s, %s; residuals",
              algebra ? "exact" : "NOT exact", rel, kPlantedRelTol, fitted ? "ok" : "FAILED", monotone ? "monotone" : "NOT monotone") +
              residuals);
}

void variance(const Comparison& cmp) {
    std::vector<double> b, x;
    for (bas::Seed seed : {1, 2, 3, 4, 5}) {
        b.push_back(final_rouge1(cell_of(cmp.report, "bas-200", seed)));
        x.push_back(final_rouge1(cell_of(cmp.report, "random", seed)));
    }
    const auto [mb, sb] = bas::mean_and_population_std(b);
    const auto [mx, sx] = bas::mean_and_population_std(x);
    // Approximate standard error of a sample std is sigma / sqrt(2N).
    const double n2 = 2.0 * static_cast<double>(b.size());
    const double se = std::sqrt(sb * sb / n2 + sx * sx / n2);
    const std::string detail = fmt("final ROUGE-1 over 5 seeds: BAS-200 %.4f +- %.4f, random %.4f +- %.4f (se of diff %.4f)",
                                   mb, sb, mx, sx, se);
    if (sb <= sx) {
        check(true, "variance-reduction", detail);
    } else if (sb - sx < se) {
        report("INCONCLUSIVE", "variance-reduction", detail + "; difference within sampling error, not counted as failure");
    } else {
        check(false, "variance-reduction", detail);
    }
}

}  // namespace

int main() {
    try {
        metric_exactness();
        bleuvar_hand_cases();
        cost_model();

        const auto data = support::synth_data(2000, 1000, 1);
        const double tau = oracle::garbage_tau(300, 10, kGarbageEps);
        loop_arithmetic(data, tau);
        determinism(data, tau);

        const auto cmp = run_comparison(data, tau);
        for (const auto& c : cmp.report.cells) {
            if (c.failed) std::printf("cell %s seed %u failed: %s\n", c.strategy.c_str(), static_cast<unsigned>(c.seed), c.error.c_str());
        }
        bas_vs_random(cmp);
        k_shift(cmp);
        noise_filter(cmp, data, tau);
        variance(cmp);
    } catch (const std::exception& e) {
        std::printf("FAIL         acceptance-harness     %s\n", e.what());
        return 1;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
