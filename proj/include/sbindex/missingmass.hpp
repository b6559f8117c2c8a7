#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sbindex/ingest.hpp"
#include "sbindex/tailfit.hpp"

namespace sbindex {

/// How the lower comparison cutoff x_c is chosen: the persistent-crossing
/// scan of the fitted curve against the empirical CCDF, or a fixed value.
struct CutoffRule {
    enum class Kind { automatic, fixed };
    Kind kind = Kind::automatic;
    double value = 0.0;  // fixed cutoff, billions of USD

    static CutoffRule automatic() { return {Kind::automatic, 0.0}; }
    static CutoffRule fixed(double x_c) { return {Kind::fixed, x_c}; }
    std::string describe() const;
};

CutoffRule parse_cutoff_spec(const std::string& spec);  // "auto" or a number in $B

/// Only the four-corner rule is implemented; the parameter exists so the
/// choice is recorded in every output.
enum class BandRule { corners };

std::string band_rule_name(BandRule rule);
BandRule parse_band_spec(const std::string& spec);

struct MissingMassEstimate {
    int year = 0;
    double i_sb = 0.0;     // billions of USD
    double band_lo = 0.0;  // billions of USD
    double band_hi = 0.0;
    double x_c = 0.0;      // lower comparison cutoff, billions of USD
    double x_max = 0.0;    // extrapolation cutoff, billions of USD
    double theoretical_tail_assets = 0.0;
    double empirical_tail_assets = 0.0;
    double total_assets = 0.0;
    double ratio = 0.0;  // i_sb / total_assets
    ParetoFit fit;
    bool no_missing_tail = false;    // fit never exceeds the data, or x_c >= x_max
    bool negative_flagged = false;   // empirical tail exceeded the fit
    bool ratio_out_of_range = false; // ratio outside [0, 1], reported not fatal
    std::string cutoff_rule;
    std::string band_rule;
};

/// x_max = (n * exp(a))^(1/b): the asset level where the extrapolated fit
/// predicts exactly one firm. Throws NumericError for b <= 0 (divergent tail).
double extrapolation_cutoff(const ParetoFit& fit, std::size_t n);
double extrapolation_cutoff(double a, double b, std::size_t n);

struct Crossing {
    double x_c = 0.0;
    bool found = false;  // false: the fitted curve never exceeds the data
};

/// Persistent-crossing scan: the largest CCDF point whose strictly-above
/// region is entirely exceeded by the fitted curve (vacuously the maximum
/// point). found == false when the fitted curve exceeds the empirical
/// survival at no point at all (the no-missing-tail condition).
Crossing crossing_cutoff(const ParetoFit& fit, const std::vector<CcdfPoint>& points);

/// Expected total assets of firms in (x_c, x_max] under the fitted density
/// f(x) = c b x^-(b+1), scaled by n. Closed form, with the b = 1 log branch;
/// the power branch is evaluated via expm1 so both branches agree smoothly.
double pareto_tail_assets(double a, double b, double n, double x_c, double x_max);
double pareto_tail_assets(const ParetoFit& fit, std::size_t n, double x_c, double x_max);

/// Sum of observed assets strictly above x_c, ascending summation order.
double empirical_tail_assets(const Snapshot& snapshot, double x_c);

/// Full point estimate: I_SB = theoretical - empirical tail assets, with the
/// confidence band filled in via the four-corner rule.
MissingMassEstimate missing_mass(const Snapshot& snapshot, const ParetoFit& fit,
                                 const CutoffRule& rule = CutoffRule::automatic(),
                                 BandRule band = BandRule::corners);

/// Re-evaluates the pipeline at the four coefficient corners
/// (a +- 2 se_a) x (b +- 2 se_b), x_c held at the point-estimate value and
/// x_max recomputed per corner; the band spans the corner values plus the
/// point estimate.
std::pair<double, double> confidence_band(const Snapshot& snapshot, const ParetoFit& fit,
                                          const CutoffRule& rule = CutoffRule::automatic());

nlohmann::json estimate_to_json(const MissingMassEstimate& estimate);

}  // namespace sbindex
