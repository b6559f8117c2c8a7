#include "sbindex/tailfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"

namespace sbindex {

namespace {

std::string window_bounds(const FitWindow& w) {
    std::ostringstream os;
    os << window_mode_name(w.mode) << ":[" << w.lo << ", " << w.hi << "]";
    return os.str();
}

struct OlsFit {
    double a, b, se_a, se_b, ssr;
};

// Core OLS of y = ln p on x = ln x. Callers guarantee >= 2 points.
OlsFit ols_loglog(const std::vector<CcdfPoint>& pts) {
    const std::size_t n = pts.size();
    double sx = 0.0, sy = 0.0;
    for (const auto& p : pts) {
        sx += std::log(p.x);
        sy += std::log(p.p);
    }
    const double xbar = sx / static_cast<double>(n);
    const double ybar = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = std::log(p.x) - xbar;
        const double dy = std::log(p.p) - ybar;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    // Equal asset values leave only accumulation noise in sxx; the threshold
    // is relative so a genuinely narrow window still fits.
    const double design_scale = std::max(xbar * xbar, 1.0);
    if (sxx <= 1e-24 * static_cast<double>(n) * design_scale) {
        throw NumericError("singular fit: all selected asset values are equal");
    }
    const double slope = sxy / sxx;
    const double intercept = ybar - slope * xbar;
    double ssr = 0.0;
    for (const auto& p : pts) {
        const double r = std::log(p.p) - (intercept + slope * std::log(p.x));
        ssr += r * r;
    }
    const double dof = static_cast<double>(n) - 2.0;
    const double var = dof > 0.0 ? ssr / dof : 0.0;
    OlsFit fit;
    fit.a = intercept;
    fit.b = -slope;
    fit.se_b = std::sqrt(var / sxx);
    fit.se_a = std::sqrt(var * (1.0 / static_cast<double>(n) + xbar * xbar / sxx));
    fit.ssr = ssr;
    return fit;
}

double ks_distance(double a, double b, const std::vector<CcdfPoint>& pts) {
    double ks = 0.0;
    for (const auto& p : pts) {
        ks = std::max(ks, std::abs(fitted_ccdf(a, b, p.x) - p.p));
    }
    return ks;
}

std::vector<CcdfPoint> filter_assets(const std::vector<CcdfPoint>& points, double lo, double hi) {
    std::vector<CcdfPoint> out;
    for (const auto& p : points) {
        if (p.x >= lo && p.x <= hi) out.push_back(p);
    }
    return out;
}

}  // namespace

std::string window_mode_name(WindowMode mode) {
    switch (mode) {
        case WindowMode::assets: return "assets";
        case WindowMode::quantile: return "quantile";
        case WindowMode::automatic: return "auto";
    }
    return "?";
}

const std::vector<double>& auto_window_lo_grid() {
    static const std::vector<double> grid{20.0, 50.0, 100.0};
    return grid;
}

const std::vector<double>& auto_window_hi_grid() {
    static const std::vector<double> grid{500.0, 1000.0, 2000.0};
    return grid;
}

std::vector<CcdfPoint> empirical_ccdf(const Snapshot& snapshot, std::size_t* excluded_nonpositive) {
    const std::size_t n = snapshot.n();
    if (n == 0) throw DataError("empirical CCDF of an empty snapshot");

    std::vector<double> values;
    values.reserve(n);
    std::size_t excluded = 0;
    for (const auto& rec : snapshot.records) {
        if (rec.assets > 0.0) {
            values.push_back(rec.assets);
        } else {
            ++excluded;
        }
    }
    if (excluded_nonpositive) *excluded_nonpositive = excluded;
    if (values.empty()) {
        throw DataError("empirical CCDF: all asset values are non-positive");
    }

    std::sort(values.begin(), values.end(), std::greater<>());
    std::vector<CcdfPoint> points;
    std::size_t count_geq = 0;
    for (std::size_t i = 0; i < values.size();) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        count_geq += j - i;  // firms with assets >= values[i]
        points.push_back({values[i], static_cast<double>(count_geq) / static_cast<double>(n)});
        i = j;
    }
    return points;
}

WindowSelection select_window(const std::vector<CcdfPoint>& points, const FitWindow& window) {
    if (window.mode == WindowMode::automatic) {
        // Scan the fixed grid; keep the candidate with the smallest in-window
        // KS distance, breaking ties toward the widest window, then lower lo.
        bool found = false;
        double best_ks = std::numeric_limits<double>::infinity();
        FitWindow best_window;
        std::vector<CcdfPoint> best_points;
        for (double lo : auto_window_lo_grid()) {
            for (double hi : auto_window_hi_grid()) {
                auto selected = filter_assets(points, lo, hi);
                if (selected.size() < kMinFitPoints) continue;
                const OlsFit fit = ols_loglog(selected);
                const double ks = ks_distance(fit.a, fit.b, selected);
                const double width = hi - lo;
                const double best_width = best_window.hi - best_window.lo;
                const bool better = !found || ks < best_ks ||
                                    (ks == best_ks && (width > best_width ||
                                                       (width == best_width && lo < best_window.lo)));
                if (better) {
                    found = true;
                    best_ks = ks;
                    best_window = {WindowMode::automatic, lo, hi};
                    best_points = std::move(selected);
                }
            }
        }
        if (!found) {
            throw DataError("auto window: no grid candidate selects at least " +
                            std::to_string(kMinFitPoints) + " points");
        }
        return {std::move(best_points), best_window};
    }

    if (!(window.lo < window.hi)) {
        throw UsageError("window bounds must satisfy lo < hi, got " + window_bounds(window));
    }
    std::vector<CcdfPoint> selected;
    if (window.mode == WindowMode::assets) {
        selected = filter_assets(points, window.lo, window.hi);
    } else {
        if (window.lo < 0.0 || window.hi > 1.0) {
            throw UsageError("quantile window bounds must lie in [0, 1], got " + window_bounds(window));
        }
        for (const auto& p : points) {
            if (p.p >= window.lo && p.p <= window.hi) selected.push_back(p);
        }
    }
    if (selected.size() < kMinFitPoints) {
        throw DataError("insufficient data: window " + window_bounds(window) + " selected " +
                        std::to_string(selected.size()) + " points (at least " +
                        std::to_string(kMinFitPoints) + " required)");
    }
    return {std::move(selected), window};
}

ParetoFit fit_pareto(const std::vector<CcdfPoint>& selected, const FitWindow& window) {
    if (selected.size() < kMinFitPoints) {
        throw DataError("fit requires at least " + std::to_string(kMinFitPoints) +
                        " points, got " + std::to_string(selected.size()));
    }
    for (const auto& p : selected) {
        if (!(p.x > 0.0) || !(p.p > 0.0)) {
            throw DataError("fit requires x > 0 and p > 0 for every point");
        }
    }
    const OlsFit ols = ols_loglog(selected);
    ParetoFit fit;
    fit.a = ols.a;
    fit.b = ols.b;
    fit.se_a = ols.se_a;
    fit.se_b = ols.se_b;
    fit.n_fit = selected.size();
    fit.window = window;
    fit.ssr = ols.ssr;
    fit.ks = ks_distance(ols.a, ols.b, selected);
    fit.nonpositive_b = !(fit.b > 0.0);
    return fit;
}

ParetoFit fit_pareto(const std::vector<CcdfPoint>& selected) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : selected) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    return fit_pareto(selected, FitWindow::assets(lo, hi));
}

double hill_estimate(std::vector<double> assets, std::size_t k) {
    const std::size_t n = assets.size();
    if (k < 5 || k >= n) {
        throw UsageError("hill estimator requires 5 <= k < n, got k=" + std::to_string(k) +
                         ", n=" + std::to_string(n));
    }
    std::sort(assets.begin(), assets.end(), std::greater<>());
    if (!(assets[k] > 0.0)) {
        throw DataError("hill estimator requires positive order statistics");
    }
    const double log_ref = std::log(assets[k]);
    double mean_spacing = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mean_spacing += std::log(assets[i]) - log_ref;
    }
    mean_spacing /= static_cast<double>(k);
    if (mean_spacing == 0.0) {
        throw NumericError("degenerate data: zero log-spacings in the upper tail");
    }
    return 1.0 / mean_spacing;
}

double fitted_ccdf(double a, double b, double x) {
    return std::min(1.0, std::exp(a) * std::pow(x, -b));
}

double fitted_ccdf(const ParetoFit& fit, double x) {
    return fitted_ccdf(fit.a, fit.b, x);
}

nlohmann::json window_to_json(const FitWindow& window) {
    return {{"mode", window_mode_name(window.mode)}, {"lo", window.lo}, {"hi", window.hi}};
}

FitWindow window_from_json(const nlohmann::json& j) {
    FitWindow w;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "assets") w.mode = WindowMode::assets;
    else if (mode == "quantile") w.mode = WindowMode::quantile;
    else if (mode == "auto") w.mode = WindowMode::automatic;
    else throw DataError("unknown window mode '" + mode + "'");
    w.lo = j.at("lo").get<double>();
    w.hi = j.at("hi").get<double>();
    return w;
}

nlohmann::json fit_to_json(int year, const ParetoFit& fit) {
    nlohmann::json j;
    j["year"] = year;
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["se_a"] = fit.se_a;
    j["se_b"] = fit.se_b;
    j["n_fit"] = fit.n_fit;
    j["window"] = window_to_json(fit.window);
    j["ssr"] = fit.ssr;
    j["ks"] = fit.ks;
    if (fit.nonpositive_b) j["nonpositive_b"] = true;
    j["ccdf_convention"] = "geq";  // p counts firms with assets >= x
    return j;
}

FitWindow parse_window_spec(const std::string& spec) {
    if (spec == "auto") return FitWindow::automatic();
    const auto first = spec.find(':');
    const auto second = spec.find(':', first == std::string::npos ? first : first + 1);
    if (first == std::string::npos || second == std::string::npos) {
        throw UsageError("bad window spec '" + spec +
                         "' (expected assets:LO:HI, quantile:LO:HI or auto)");
    }
    const std::string mode = spec.substr(0, first);
    const auto parse_bound = [&](const std::string& field) {
        try {
            std::size_t pos = 0;
            const double value = std::stod(field, &pos);
            if (pos != field.size()) throw std::invalid_argument(field);
            return value;
        } catch (const std::exception&) {
            throw UsageError("bad window bound '" + field + "' in '" + spec + "'");
        }
    };
    const double lo = parse_bound(spec.substr(first + 1, second - first - 1));
    const double hi = parse_bound(spec.substr(second + 1));
    if (mode == "assets") return FitWindow::assets(lo, hi);
    if (mode == "quantile") return FitWindow::quantile(lo, hi);
    throw UsageError("unknown window mode '" + mode + "' (expected assets, quantile or auto)");
}

}  // namespace sbindex
