#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sbindex/ingest.hpp"

namespace sbindex {

/// One point of the empirical survival function: p = |{i : A_i >= x}| / n.
/// The >= convention keeps p > 0 at the sample maximum.
struct CcdfPoint {
    double x;  // asset value, billions of USD
    double p;  // empirical survival fraction, in (0, 1]
};

enum class WindowMode { assets, quantile, automatic };

std::string window_mode_name(WindowMode mode);

/// The intermediate fitting range. In assets mode lo/hi bound the asset value
/// (billions of USD); in quantile mode they bound the survival fraction p.
struct FitWindow {
    WindowMode mode = WindowMode::assets;
    double lo = 50.0;
    double hi = 1000.0;

    static FitWindow assets(double lo, double hi) { return {WindowMode::assets, lo, hi}; }
    static FitWindow quantile(double lo, double hi) { return {WindowMode::quantile, lo, hi}; }
    static FitWindow automatic() { return {WindowMode::automatic, 0.0, 0.0}; }
};

/// Default window, below the multi-trillion cliff and above the small-firm
/// flattening. Recorded in every output.
inline FitWindow default_window() { return FitWindow::assets(50.0, 1000.0); }

constexpr std::size_t kMinFitPoints = 10;

/// Candidate grid searched by the automatic window mode (assets bounds, $B).
const std::vector<double>& auto_window_lo_grid();
const std::vector<double>& auto_window_hi_grid();

struct ParetoFit {
    double a = 0.0;     // intercept: natural log of c, with x in billions of USD
    double b = 0.0;     // tail exponent (-slope); > 0 for a proper tail
    double se_a = 0.0;  // standard errors from the OLS covariance
    double se_b = 0.0;
    std::size_t n_fit = 0;  // points used (one per distinct asset value)
    FitWindow window;       // concrete window the fit ran on
    double ssr = 0.0;       // sum of squared log-space residuals
    double ks = 0.0;        // max |min(1, c x^-b) - p| over the fitted points
    bool nonpositive_b = false;  // diagnostic flag, fit returned anyway
};

/// Builds the empirical CCDF of a snapshot: one point per distinct positive
/// asset value, sorted by descending x, p strictly increasing down the list.
/// Zero-asset records contribute to n but produce no point; their count is
/// reported through excluded_nonpositive when given.
std::vector<CcdfPoint> empirical_ccdf(const Snapshot& snapshot,
                                      std::size_t* excluded_nonpositive = nullptr);

struct WindowSelection {
    std::vector<CcdfPoint> points;  // selected subset, descending x
    FitWindow window;               // resolved window (auto -> chosen assets bounds)
};

/// Selects the fitting subset. Automatic mode scans the fixed candidate grid
/// and keeps the window minimizing the in-window KS distance of its own OLS
/// fit, ties broken toward the widest window. Throws DataError when fewer
/// than kMinFitPoints points survive.
WindowSelection select_window(const std::vector<CcdfPoint>& points, const FitWindow& window);

/// Ordinary least squares of ln p on ln x over the selected points:
/// a = intercept, b = -slope, standard errors from the usual OLS covariance
/// with residual variance SSR/(n_fit - 2).
ParetoFit fit_pareto(const std::vector<CcdfPoint>& selected, const FitWindow& window);
ParetoFit fit_pareto(const std::vector<CcdfPoint>& selected);

/// Hill estimator of the tail exponent from the top-k order statistics.
/// Cross-check diagnostic only; requires 5 <= k < n.
double hill_estimate(std::vector<double> assets, std::size_t k);

/// min(1, exp(a) * x^-b): the fitted survival function, clamped to 1.
double fitted_ccdf(const ParetoFit& fit, double x);
double fitted_ccdf(double a, double b, double x);

nlohmann::json fit_to_json(int year, const ParetoFit& fit);
nlohmann::json window_to_json(const FitWindow& window);
FitWindow window_from_json(const nlohmann::json& j);

/// Parses CLI window descriptors: "assets:50:1000", "quantile:0.05:0.5", "auto".
FitWindow parse_window_spec(const std::string& spec);

}  // namespace sbindex
