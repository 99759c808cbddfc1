#pragma once

// Strategy x seed experiment matrix, aggregation into learning curves and
// the CSV / SVG report.

#include "bas/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace bas {

inline const std::vector<std::string>& curve_metrics() {
    static const std::vector<std::string> m{"rouge1", "rouge2", "rougeL"};
    return m;
}

inline double metric_of(const EvalScores& e, const std::string& metric) {
    if (metric == "rouge1") return e.rouge1;
    if (metric == "rouge2") return e.rouge2;
    if (metric == "rougeL") return e.rougeL;
    throw DomainError("unknown metric '" + metric + "'");
}

struct Strategy {
    std::string name;
    std::vector<std::pair<std::string, std::string>> settings;  // applied over the base config
};

struct Matrix {
    ExperimentConfig base;
    std::vector<Strategy> strategies;
    std::vector<Seed> seeds;
    std::string corpus_path;
    std::string test_path;
    std::vector<std::size_t> caps{150};  // budget caps for the best-score table; b is always added

    [[nodiscard]] ExperimentConfig cell_config(const Strategy& st, Seed seed) const {
        ExperimentConfig c = base;
        for (const auto& [k, v] : st.settings) apply_setting(c, k, v);
        c.name = st.name;
        c.seed = seed;
        c.eval_every_step = true;
        return c;
    }
};

namespace detail {

inline std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return csv::format(v.get<double>());
    throw ConfigError("matrix values must be scalars");
}

}  // namespace detail

/// JSON matrix file:
///   {"corpus": "...", "test": "...", "base": {key: value...},
///    "strategies": [{"name": "bas-100", "policy": "bas", "k": 100}, ...],
///    "seeds": [1, 2, 3], "caps": [150]}
/// Relative paths resolve against the matrix file's directory.
inline Matrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("matrix file: ") + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
        return (dir / p).string();
    };
    Matrix m;
    if (j.contains("base")) {
        for (const auto& [k, v] : j.at("base").items()) apply_setting(m.base, k, detail::json_scalar(v));
    }
    if (!j.contains("strategies") || !j.at("strategies").is_array() || j.at("strategies").empty()) {
        throw ConfigError("matrix needs a non-empty 'strategies' array");
    }
    for (const auto& sj : j.at("strategies")) {
        Strategy st;
        for (const auto& [k, v] : sj.items()) {
            if (k == "name") st.name = detail::json_scalar(v);
            else st.settings.emplace_back(k, detail::json_scalar(v));
        }
        if (st.name.empty()) throw ConfigError("every strategy needs a name");
        m.strategies.push_back(std::move(st));
    }
    if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty()) {
        throw ConfigError("matrix needs a non-empty 'seeds' array");
    }
    for (const auto& s : j.at("seeds")) m.seeds.push_back(s.get<Seed>());
    if (j.contains("caps")) m.caps = j.at("caps").get<std::vector<std::size_t>>();
    m.corpus_path = resolve(j.value("corpus", std::string{}));
    m.test_path = resolve(j.value("test", std::string{}));
    if (!m.test_path.empty()) m.base.test_path = m.test_path;
    return m;
}

struct CurvePoint {
    std::string strategy;
    std::string metric;
    std::size_t labeled_size = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t seeds = 0;

    bool operator==(const CurvePoint&) const = default;
};

struct BestScore {
    std::string strategy;
    std::string metric;
    std::size_t cap = 0;
    double best_mean = 0.0;      // max of the mean curve over l <= cap
    double std_over_seeds = 0.0; // population std of per-seed best scores
};

struct Cell {
    std::string strategy;
    Seed seed = 0;
    ExperimentConfig config;
    RunResult run;
    bool failed = false;
    std::string error;
};

struct ComparisonReport {
    std::vector<std::string> strategies;
    std::vector<Cell> cells;
    std::vector<CurvePoint> curves;
    std::vector<BestScore> best;
    bool incomplete = false;

    [[nodiscard]] std::vector<CurvePoint> curve(const std::string& strategy, const std::string& metric) const {
        std::vector<CurvePoint> pts;
        for (const auto& p : curves) {
            if (p.strategy == strategy && p.metric == metric) pts.push_back(p);
        }
        return pts;
    }
};

/// (l, metric) points of one run: warm start plus every evaluated step.
/// Steps that acquired nothing repeat l and collapse into one point.
inline std::vector<std::pair<std::size_t, EvalScores>> run_points(const RunResult& run) {
    std::vector<std::pair<std::size_t, EvalScores>> pts;
    auto push = [&](const StepRecord& r) {
        if (!r.eval) return;
        if (!pts.empty() && pts.back().first == r.labeled_size_after) {
            pts.back().second = *r.eval;
        } else {
            pts.emplace_back(r.labeled_size_after, *r.eval);
        }
    };
    push(run.warm_start);
    for (const auto& r : run.steps) push(r);
    return pts;
}

inline std::pair<double, double> mean_and_population_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Curves and best-score table from finished cells. Failed cells are ignored
/// and mark the report incomplete.
inline void aggregate(ComparisonReport& report, const std::vector<std::size_t>& caps) {
    report.curves.clear();
    report.best.clear();
    for (const auto& strategy : report.strategies) {
        std::vector<std::vector<std::pair<std::size_t, EvalScores>>> per_seed;
        std::size_t budget = 0;
        for (const auto& cell : report.cells) {
            if (cell.strategy != strategy) continue;
            if (cell.failed) {
                report.incomplete = true;
                continue;
            }
            per_seed.push_back(run_points(cell.run));
            budget = std::max(budget, cell.config.b);
        }
        std::vector<std::size_t> all_caps = caps;
        all_caps.push_back(budget);
        std::sort(all_caps.begin(), all_caps.end());
        all_caps.erase(std::unique(all_caps.begin(), all_caps.end()), all_caps.end());

        for (const auto& metric : curve_metrics()) {
            std::map<std::size_t, std::vector<double>> by_l;
            for (const auto& pts : per_seed) {
                for (const auto& [l, e] : pts) by_l[l].push_back(metric_of(e, metric));
            }
            for (const auto& [l, xs] : by_l) {
                const auto [mean, sd] = mean_and_population_std(xs);
                report.curves.push_back({strategy, metric, l, mean, sd, xs.size()});
            }
            for (auto cap : all_caps) {
                BestScore b{strategy, metric, cap, -1.0, 0.0};
                for (const auto& [l, xs] : by_l) {
                    if (l > cap) continue;
                    b.best_mean = std::max(b.best_mean, mean_and_population_std(xs).first);
                }
                std::vector<double> seed_best;
                for (const auto& pts : per_seed) {
                    double best = -1.0;
                    for (const auto& [l, e] : pts) {
                        if (l <= cap) best = std::max(best, metric_of(e, metric));
                    }
                    if (best >= 0.0) seed_best.push_back(best);
                }
                if (b.best_mean < 0.0) continue;
                b.std_over_seeds = mean_and_population_std(seed_best).second;
                report.best.push_back(b);
            }
        }
    }
}

using LearnerFactory = std::function<std::unique_ptr<Learner>(const ExperimentConfig&)>;

/// Runs every strategy x seed cell (up to `workers` at a time) with
/// per-step evaluation on. Cells are stored in matrix order regardless of
/// completion order.
inline ComparisonReport run_matrix(const Matrix& matrix, std::shared_ptr<const Corpus> corpus,
                                   std::shared_ptr<const Corpus> test, std::size_t workers,
                                   const LearnerFactory& factory) {
    if (matrix.strategies.empty()) throw ConfigError("run_matrix needs at least one strategy");
    if (matrix.seeds.empty()) throw ConfigError("run_matrix needs at least one seed");
    ComparisonReport report;
    for (const auto& st : matrix.strategies) {
        report.strategies.push_back(st.name);
        for (auto seed : matrix.seeds) {
            Cell cell;
            cell.strategy = st.name;
            cell.seed = seed;
            cell.config = matrix.cell_config(st, seed);
            report.cells.push_back(std::move(cell));
        }
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < report.cells.size(); i = next++) {
            auto& cell = report.cells[i];
            try {
                auto learner = factory(cell.config);
                Engine engine(cell.config, corpus, *learner, test);
                cell.run = engine.run();
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(workers, 1, report.cells.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    aggregate(report, matrix.caps);
    return report;
}

// ---------------------------------------------------------------------------
// Report output

inline constexpr std::size_t kHistogramBins = 20;

inline std::size_t histogram_bin(double x) {
    if (!(x > 0.0)) return 0;
    return std::min(kHistogramBins - 1, static_cast<std::size_t>(x * static_cast<double>(kHistogramBins)));
}

inline void write_curves(std::ostream& out, const ComparisonReport& r) {
    csv::write_row(out, {"strategy", "metric", "l", "mean", "std", "seeds"});
    for (const auto& p : r.curves) {
        csv::write_row(out, {p.strategy, p.metric, std::to_string(p.labeled_size), csv::format(p.mean), csv::format(p.std),
                             std::to_string(p.seeds)});
    }
}

inline std::vector<CurvePoint> read_curves(std::istream& in) {
    const auto t = csv::read(in);
    const auto cs = t.require("strategy"), cm = t.require("metric"), cl = t.require("l"), cmean = t.require("mean"),
               cstd = t.require("std"), cseeds = t.require("seeds");
    std::vector<CurvePoint> pts;
    for (const auto& row : t.rows) {
        pts.push_back({row[cs], row[cm], static_cast<std::size_t>(std::stoull(row[cl])), csv::parse_double(row[cmean]),
                       csv::parse_double(row[cstd]), static_cast<std::size_t>(std::stoull(row[cseeds]))});
    }
    return pts;
}

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            case '-':
                // "--" is illegal inside XML comments.
                out += (!out.empty() && out.back() == '-') ? "&#45;" : "-";
                break;
            default: out.push_back(c);
        }
    }
    return out;
}

inline std::string fmt_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

}  // namespace detail

/// Line plot of mean curves with shaded +-std bands; the plotted numbers are
/// repeated in a comment so the file diffs meaningfully.
inline std::string render_svg(const ComparisonReport& r, const std::string& metric) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    const double width = 720, height = 440, left = 70, right = 170, top = 30, bottom = 55;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& p : r.curves) {
        if (p.metric != metric) continue;
        x_min = std::min(x_min, static_cast<double>(p.labeled_size));
        x_max = std::max(x_max, static_cast<double>(p.labeled_size));
        y_min = std::min(y_min, p.mean - p.std);
        y_max = std::max(y_max, p.mean + p.std);
    }
    if (x_min > x_max) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    if (x_max == x_min) x_max = x_min + 1;
    const double pad = std::max(1e-6, (y_max - y_min) * 0.05);
    y_min = std::max(0.0, y_min - pad);
    y_max = std::min(1.0, y_max + pad);
    if (y_max <= y_min) y_max = y_min + 1e-3;
    const double pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
        << width << ' ' << height << "\">\n";
    svg << "<!-- data: strategy,metric,l,mean,std\n";
    for (const auto& p : r.curves) {
        if (p.metric == metric) {
            svg << detail::svg_escape(p.strategy) << ',' << metric << ',' << p.labeled_size << ',' << csv::format(p.mean) << ','
                << csv::format(p.std) << '\n';
        }
    }
    svg << "-->\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<g stroke=\"#333\" stroke-width=\"1\">\n"
        << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n</g>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x_min + (x_max - x_min) * i / 5.0, yv = y_min + (y_max - y_min) * i / 5.0;
        svg << "<text x=\"" << detail::fmt_fixed(sx(xv), 1) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
            << detail::fmt_fixed(xv, 0) << "</text>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << detail::fmt_fixed(sy(yv) + 4, 1) << "\" text-anchor=\"end\">"
            << detail::fmt_fixed(yv, 3) << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">labeled examples</text>\n";
    svg << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
        << ")\">" << metric << " F1</text>\n</g>\n";

    for (std::size_t si = 0; si < r.strategies.size(); ++si) {
        const auto pts = r.curve(r.strategies[si], metric);
        if (pts.empty()) continue;
        const char* color = colors[si % (sizeof colors / sizeof *colors)];
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
        for (const auto& p : pts) {
            svg << detail::fmt_fixed(sx(static_cast<double>(p.labeled_size)), 2) << ','
                << detail::fmt_fixed(sy(std::min(1.0, p.mean + p.std)), 2) << ' ';
        }
        for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
            svg << detail::fmt_fixed(sx(static_cast<double>(it->labeled_size)), 2) << ','
                << detail::fmt_fixed(sy(std::max(0.0, it->mean - it->std)), 2) << ' ';
        }
        svg << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : pts) {
            svg << detail::fmt_fixed(sx(static_cast<double>(p.labeled_size)), 2) << ',' << detail::fmt_fixed(sy(p.mean), 2) << ' ';
        }
        svg << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(si);
        svg << "<line x1=\"" << left + pw + 14 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 38 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << left + pw + 44 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">" << detail::svg_escape(r.strategies[si])
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

/// curves.csv, best.csv, timings.csv, uncertainty_hist.csv and
/// curve_<metric>.svg for each metric.
inline std::vector<std::filesystem::path> emit_report(const ComparisonReport& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& name) {
        const auto path = dir / name;
        std::ofstream f(path);
        if (!f) throw IoError("cannot write '" + path.string() + "'");
        written.push_back(path);
        return f;
    };
    {
        auto f = open("curves.csv");
        write_curves(f, r);
    }
    {
        auto f = open("best.csv");
        csv::write_row(f, {"strategy", "metric", "cap", "best_mean", "std_over_seeds"});
        for (const auto& b : r.best) {
            csv::write_row(f, {b.strategy, b.metric, std::to_string(b.cap), csv::format(b.best_mean),
                               csv::format(b.std_over_seeds)});
        }
    }
    {
        auto f = open("timings.csv");
        auto header = timing_header();
        header.insert(header.begin(), {"strategy", "seed"});
        csv::write_row(f, header);
        for (const auto& cell : r.cells) {
            if (cell.failed) continue;
            auto emit = [&](const StepRecord& s) {
                auto fields = timing_fields(s, cell.config);
                fields.insert(fields.begin(), {cell.strategy, std::to_string(cell.seed)});
                csv::write_row(f, fields);
            };
            emit(cell.run.warm_start);
            for (const auto& s : cell.run.steps) emit(s);
        }
    }
    {
        auto f = open("uncertainty_hist.csv");
        csv::write_row(f, {"strategy", "k", "bin", "bin_lo", "bin_hi", "count"});
        for (const auto& strategy : r.strategies) {
            std::vector<std::size_t> counts(kHistogramBins, 0);
            std::size_t k = 0;
            bool bas = false;
            for (const auto& cell : r.cells) {
                if (cell.strategy != strategy || cell.failed) continue;
                bas = cell.config.policy.kind == PolicyKind::bas;
                k = cell.config.policy.k;
                for (const auto& row : cell.run.uncertainty) {
                    if (row.selected) ++counts[histogram_bin(row.bleuvar)];
                }
            }
            if (!bas) continue;
            for (std::size_t b = 0; b < kHistogramBins; ++b) {
                csv::write_row(f, {strategy, std::to_string(k), std::to_string(b),
                                   csv::format(static_cast<double>(b) / kHistogramBins),
                                   csv::format(static_cast<double>(b + 1) / kHistogramBins), std::to_string(counts[b])});
            }
        }
    }
    for (const auto& metric : curve_metrics()) {
        auto f = open("curve_" + metric + ".svg");
        f << render_svg(r, metric);
    }
    {
        std::ofstream f(dir / "cells.txt");
        for (const auto& cell : r.cells) {
            f << cell.strategy << " seed=" << cell.seed << ' '
              << (cell.failed ? "FAILED: " + cell.error
                              : (cell.run.aborted ? "ABORTED: " + cell.run.abort_reason
                                                  : "ok steps=" + std::to_string(cell.run.steps.size())))
              << '\n';
        }
        if (r.incomplete) f << "report incomplete: at least one cell failed\n";
    }
    return written;
}

}  // namespace bas
