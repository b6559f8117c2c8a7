#include "sbindex/missingmass.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"

namespace sbindex {

namespace {

// Relative margin for "fitted exceeds empirical": keeps exact-equality data
// (fit generated from the data, or vice versa) on the no-crossing side.
constexpr double kCrossingMargin = 1e-9;

bool fitted_exceeds(const ParetoFit& fit, const CcdfPoint& point) {
    return fitted_ccdf(fit, point.x) > point.p * (1.0 + kCrossingMargin);
}

struct PointEvaluation {
    double x_c = 0.0;
    double x_max = 0.0;
    double theoretical = 0.0;
    double empirical = 0.0;
    double i_sb = 0.0;
    bool no_missing_tail = false;
};

// Shared core of the point estimate and the per-corner evaluations: given
// coefficients and a fixed x_c, compute I_SB with the no-missing-tail clamp.
double isb_at(double a, double b, double n, double x_c, double empirical) {
    const double x_max = std::exp((std::log(n) + a) / b);
    if (!std::isfinite(x_max)) {
        throw NumericError("extrapolation cutoff overflows: fitted tail exponent too small");
    }
    if (x_c >= x_max) return 0.0;
    return pareto_tail_assets(a, b, n, x_c, x_max) - empirical;
}

PointEvaluation evaluate_point(const Snapshot& snapshot, const ParetoFit& fit,
                               const CutoffRule& rule) {
    const std::size_t n = snapshot.n();
    if (n == 0) throw DataError("missing mass of an empty snapshot");

    PointEvaluation ev;
    ev.x_max = extrapolation_cutoff(fit, n);

    bool crossed = true;
    if (rule.kind == CutoffRule::Kind::fixed) {
        if (!(rule.value > 0.0)) throw UsageError("fixed cutoff must be > 0");
        ev.x_c = rule.value;
    } else {
        const auto points = empirical_ccdf(snapshot);
        const Crossing crossing = crossing_cutoff(fit, points);
        crossed = crossing.found;
        ev.x_c = crossed ? crossing.x_c : ev.x_max;
    }

    if (!crossed || ev.x_c >= ev.x_max) {
        // No deficit region: the fit never exceeds the data, or the cutoff
        // sits at or beyond the extrapolation limit.
        ev.no_missing_tail = true;
        ev.x_c = ev.x_max;
        ev.theoretical = 0.0;
        ev.empirical = empirical_tail_assets(snapshot, ev.x_c);
        ev.i_sb = 0.0;
        return ev;
    }

    ev.theoretical = pareto_tail_assets(fit, n, ev.x_c, ev.x_max);
    ev.empirical = empirical_tail_assets(snapshot, ev.x_c);
    ev.i_sb = ev.theoretical - ev.empirical;
    return ev;
}

std::pair<double, double> band_from_corners(const ParetoFit& fit, double n,
                                            const PointEvaluation& point) {
    double lo = point.i_sb;
    double hi = point.i_sb;
    for (double da : {-2.0 * fit.se_a, 2.0 * fit.se_a}) {
        for (double db : {-2.0 * fit.se_b, 2.0 * fit.se_b}) {
            const double b = fit.b + db;
            if (!(b > 0.0)) {
                throw NumericError("confidence band: corner tail exponent is not positive");
            }
            const double corner = isb_at(fit.a + da, b, n, point.x_c, point.empirical);
            lo = std::min(lo, corner);
            hi = std::max(hi, corner);
        }
    }
    return {lo, hi};
}

}  // namespace

std::string CutoffRule::describe() const {
    if (kind == Kind::automatic) return "auto";
    return "fixed:" + format_double(value);
}

CutoffRule parse_cutoff_spec(const std::string& spec) {
    if (spec == "auto") return CutoffRule::automatic();
    try {
        std::size_t pos = 0;
        const double value = std::stod(spec, &pos);
        if (pos != spec.size()) throw std::invalid_argument(spec);
        if (!(value > 0.0)) throw UsageError("cutoff must be > 0, got " + spec);
        return CutoffRule::fixed(value);
    } catch (const std::invalid_argument&) {
        throw UsageError("bad cutoff '" + spec + "' (expected auto or a value in $B)");
    } catch (const std::out_of_range&) {
        throw UsageError("cutoff value out of range: " + spec);
    }
}

std::string band_rule_name(BandRule) { return "corners"; }

BandRule parse_band_spec(const std::string& spec) {
    if (spec == "corners") return BandRule::corners;
    throw UsageError("unknown band rule '" + spec + "' (expected corners)");
}

double extrapolation_cutoff(double a, double b, std::size_t n) {
    if (!(b > 0.0)) {
        throw NumericError("divergent tail: no finite extrapolation cutoff for b <= 0");
    }
    if (n == 0) throw UsageError("extrapolation cutoff requires n >= 1");
    const double x_max = std::exp((std::log(static_cast<double>(n)) + a) / b);
    if (!std::isfinite(x_max)) {
        throw NumericError("extrapolation cutoff overflows: fitted tail exponent too small");
    }
    return x_max;
}

double extrapolation_cutoff(const ParetoFit& fit, std::size_t n) {
    return extrapolation_cutoff(fit.a, fit.b, n);
}

Crossing crossing_cutoff(const ParetoFit& fit, const std::vector<CcdfPoint>& points) {
    if (points.empty()) throw DataError("crossing cutoff needs a non-empty CCDF");

    bool any_exceeded = false;
    double largest = points.front().x;
    for (const auto& p : points) {
        largest = std::max(largest, p.x);
        if (fitted_exceeds(fit, p)) any_exceeded = true;
    }
    if (!any_exceeded) return {0.0, false};

    // Largest point whose strictly-above region is entirely exceeded. The
    // candidate set is closed upward and beyond the maximum observation the
    // empirical survival is zero, so the scan resolves at the largest point.
    return {largest, true};
}

double pareto_tail_assets(double a, double b, double n, double x_c, double x_max) {
    if (!(b > 0.0)) throw NumericError("tail assets: b must be > 0");
    if (!(x_c > 0.0)) throw UsageError("tail assets: x_c must be > 0");
    if (x_c > x_max) throw UsageError("tail assets: x_c must not exceed x_max");
    if (x_c == x_max) return 0.0;

    const double c = std::exp(a);
    const double one_minus_b = 1.0 - b;
    const double log_ratio = std::log(x_max / x_c);
    if (std::abs(one_minus_b) <= 1e-9) {
        return n * c * log_ratio;
    }
    // c*b/(1-b) * (x_max^(1-b) - x_c^(1-b)), written so the two powers never
    // cancel: the expm1 form stays accurate arbitrarily close to b = 1.
    return n * c * b / one_minus_b * std::pow(x_c, one_minus_b) * std::expm1(one_minus_b * log_ratio);
}

double pareto_tail_assets(const ParetoFit& fit, std::size_t n, double x_c, double x_max) {
    return pareto_tail_assets(fit.a, fit.b, static_cast<double>(n), x_c, x_max);
}

double empirical_tail_assets(const Snapshot& snapshot, double x_c) {
    if (!(x_c > 0.0)) throw UsageError("empirical tail assets: x_c must be > 0");
    std::vector<double> tail;
    for (const auto& rec : snapshot.records) {
        if (rec.assets > x_c) tail.push_back(rec.assets);
    }
    std::sort(tail.begin(), tail.end());
    double sum = 0.0;
    for (double v : tail) sum += v;
    return sum;
}

MissingMassEstimate missing_mass(const Snapshot& snapshot, const ParetoFit& fit,
                                 const CutoffRule& rule, BandRule band) {
    const PointEvaluation ev = evaluate_point(snapshot, fit, rule);

    MissingMassEstimate est;
    est.year = snapshot.year;
    est.fit = fit;
    est.x_c = ev.x_c;
    est.x_max = ev.x_max;
    est.theoretical_tail_assets = ev.theoretical;
    est.empirical_tail_assets = ev.empirical;
    est.i_sb = ev.i_sb;
    est.no_missing_tail = ev.no_missing_tail;
    est.negative_flagged = ev.i_sb < 0.0;
    est.total_assets = total_assets(snapshot);
    est.ratio = est.total_assets > 0.0 ? est.i_sb / est.total_assets : 0.0;
    est.ratio_out_of_range = est.ratio < 0.0 || est.ratio > 1.0;
    est.cutoff_rule = rule.describe();
    est.band_rule = band_rule_name(band);

    const auto [lo, hi] = band_from_corners(fit, static_cast<double>(snapshot.n()), ev);
    est.band_lo = lo;
    est.band_hi = hi;
    return est;
}

std::pair<double, double> confidence_band(const Snapshot& snapshot, const ParetoFit& fit,
                                          const CutoffRule& rule) {
    const PointEvaluation ev = evaluate_point(snapshot, fit, rule);
    return band_from_corners(fit, static_cast<double>(snapshot.n()), ev);
}

nlohmann::json estimate_to_json(const MissingMassEstimate& est) {
    nlohmann::json j;
    j["year"] = est.year;
    j["i_sb"] = est.i_sb;
    j["band"] = {est.band_lo, est.band_hi};
    j["x_c"] = est.x_c;
    j["x_max"] = est.x_max;
    j["theoretical_tail_assets"] = est.theoretical_tail_assets;
    j["empirical_tail_assets"] = est.empirical_tail_assets;
    j["total_assets"] = est.total_assets;
    j["ratio"] = est.ratio;
    j["fit"] = fit_to_json(est.year, est.fit);
    j["no_missing_tail"] = est.no_missing_tail;
    j["negative_flagged"] = est.negative_flagged;
    j["ratio_out_of_range"] = est.ratio_out_of_range;
    j["cutoff_rule"] = est.cutoff_rule;
    j["band_rule"] = est.band_rule;
    return j;
}

}  // namespace sbindex
