#pragma once

// Analytic cost of an active summarization run and calibration of its
// constants from measured step timings.
//
//   scoring:  C(k, n) = k n [C_sum + (n - 1) C_bl]
//   total:    C_BAS(k, n, s) = (b / s) (C(k, n) + C_train) + C_train0
//
// With k = u the scoring term is the cost of ranking the whole pool.

#include "bas/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace bas {

struct CostConstants {
    double c_sum = 0.0;     // seconds per generated summary
    double c_bl = 0.0;      // seconds per directed BLEU evaluation
    double c_train = 0.0;   // seconds per training phase
    double c_train0 = 0.0;  // seconds for the warm-start training
};

inline double scoring_cost(std::size_t k, std::size_t n, const CostConstants& c) {
    if (k == 0 || n == 0) return 0.0;
    const double kd = static_cast<double>(k), nd = static_cast<double>(n);
    return kd * nd * (c.c_sum + (nd - 1.0) * c.c_bl);
}

/// b / s is taken as a real ratio (number of learning steps).
inline double total_cost(std::size_t k, std::size_t n, std::size_t s, std::size_t b, const CostConstants& c) {
    if (s == 0) throw DomainError("total_cost: s must be >= 1");
    const double steps = static_cast<double>(b) / static_cast<double>(s);
    return steps * (scoring_cost(k, n, c) + c.c_train) + c.c_train0;
}

struct CostObservation {
    std::size_t k = 0;
    std::size_t n = 0;
    double scoring_seconds = 0.0;
    double training_seconds = 0.0;
    std::optional<double> generation_seconds;  // optional split of scoring_seconds
    std::optional<double> bleu_seconds;
};

struct Calibration {
    CostConstants constants;
    double intercept = 0.0;  // fixed per-step scoring overhead
    /// False when every observation shares one n: then only the combined
    /// per-summary cost is identifiable and it is reported as c_sum.
    bool separable = true;
    std::vector<double> residuals;  // observed - predicted scoring seconds
    double rmse = 0.0;

    [[nodiscard]] double predict_scoring(std::size_t k, std::size_t n) const {
        return intercept + scoring_cost(k, n, constants);
    }
};

namespace detail {

/// Least squares with rank check; returns nullopt when rank-deficient.
inline std::optional<Eigen::VectorXd> lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < a.cols()) return std::nullopt;
    return Eigen::VectorXd(qr.solve(y));
}

}  // namespace detail

/// Fits C_sum and C_bl (plus a per-step intercept) to scoring times;
/// C_train is the mean training time. When every observation carries the
/// generation / BLEU split, each constant is fitted to its own share.
inline Calibration calibrate(std::span<const CostObservation> obs, std::optional<double> warm_start_seconds = std::nullopt) {
    if (obs.size() < 2) throw CalibrationError("calibration needs at least 2 observations");
    std::set<std::size_t> ks, ns;
    for (const auto& o : obs) {
        ks.insert(o.k);
        ns.insert(o.n);
    }
    if (ks.size() < 2) throw CalibrationError("calibration needs observations with at least 2 distinct k");

    const auto m = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd gen_col(m), bleu_col(m), scoring(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const double kd = static_cast<double>(o.k), nd = static_cast<double>(o.n);
        gen_col(i) = kd * nd;
        bleu_col(i) = kd * nd * std::max(0.0, nd - 1.0);
        scoring(i) = o.scoring_seconds;
    }
    Calibration cal;
    const bool split = std::all_of(obs.begin(), obs.end(),
                                   [](const CostObservation& o) { return o.generation_seconds && o.bleu_seconds; });
    if (split) {
        Eigen::VectorXd gen(m), bl(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            gen(i) = *obs[static_cast<std::size_t>(i)].generation_seconds;
            bl(i) = *obs[static_cast<std::size_t>(i)].bleu_seconds;
        }
        Eigen::MatrixXd a(m, 2);
        a.col(0).setOnes();
        a.col(1) = gen_col;
        const auto g = detail::lstsq(a, gen);
        a.col(1) = bleu_col;
        const auto b = detail::lstsq(a, bl);
        if (!g || !b) throw CalibrationError("degenerate calibration design");
        cal.intercept = (*g)(0) + (*b)(0);
        cal.constants.c_sum = (*g)(1);
        cal.constants.c_bl = (*b)(1);
    } else {
        Eigen::MatrixXd a(m, 3);
        a.col(0).setOnes();
        a.col(1) = gen_col;
        a.col(2) = bleu_col;
        if (auto x = ns.size() > 1 ? detail::lstsq(a, scoring) : std::nullopt) {
            cal.intercept = (*x)(0);
            cal.constants.c_sum = (*x)(1);
            cal.constants.c_bl = (*x)(2);
        } else {
            // One n: k n C_sum and k n (n - 1) C_bl are collinear.
            Eigen::MatrixXd a2(m, 2);
            a2.col(0).setOnes();
            a2.col(1) = gen_col;
            const auto x2 = detail::lstsq(a2, scoring);
            if (!x2) throw CalibrationError("degenerate calibration design");
            cal.intercept = (*x2)(0);
            cal.constants.c_sum = (*x2)(1);
            cal.constants.c_bl = 0.0;
            cal.separable = false;
        }
    }
    double train_sum = 0.0;
    for (const auto& o : obs) train_sum += o.training_seconds;
    cal.constants.c_train = train_sum / static_cast<double>(obs.size());
    cal.constants.c_train0 = warm_start_seconds.value_or(0.0);

    double sq = 0.0;
    for (const auto& o : obs) {
        const double r = o.scoring_seconds - cal.predict_scoring(o.k, o.n);
        cal.residuals.push_back(r);
        sq += r * r;
    }
    cal.rmse = std::sqrt(sq / static_cast<double>(obs.size()));
    return cal;
}

}  // namespace bas
