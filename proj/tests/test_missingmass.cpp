#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sbindex/errors.hpp"
#include "sbindex/missingmass.hpp"
#include "sbindex/synth.hpp"
#include "sbindex/tailfit.hpp"

using namespace sbindex;

namespace {

Snapshot snapshot_of(std::vector<double> assets, int year = 2015) {
    Snapshot s;
    s.year = year;
    for (std::size_t i = 0; i < assets.size(); ++i) {
        s.records.push_back({year, std::nullopt, "f" + std::to_string(i), "", "", assets[i]});
    }
    return s;
}

// Snapshot whose empirical CCDF lies exactly on ln p = a - b ln x; the top
// point sits exactly at the extrapolation cutoff x_max = (n exp(a))^(1/b).
Snapshot aligned_quantile_snapshot(std::size_t n, double a, double b) {
    std::vector<double> assets(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double p = static_cast<double>(k) / static_cast<double>(n);
        assets[k - 1] = std::exp((a - std::log(p)) / b);
    }
    return snapshot_of(assets);
}

ParetoFit fit_of(const Snapshot& snap, const FitWindow& w) {
    const auto pts = empirical_ccdf(snap);
    const auto sel = select_window(pts, w);
    return fit_pareto(sel.points, sel.window);
}

// Bisection on n c x^-b = 1, independent of the closed-form solution.
double xmax_bisection_oracle(double a, double b, double n) {
    const double c = std::exp(a);
    double lo = 1e-6, hi = 1e12;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (n * c * std::pow(mid, -b) > 1.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("extrapolation_cutoff") {
    ParetoFit fit;
    SUBCASE("n=1, c=1: x_max = 1 for any b") {
        fit.a = 0.0;
        for (double b : {0.5, 1.0, 2.0}) {
            fit.b = b;
            CHECK(extrapolation_cutoff(fit, 1) == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    SUBCASE("n=1000, c=1, b=1: x_max = 1000") {
        fit.a = 0.0;
        fit.b = 1.0;
        CHECK(extrapolation_cutoff(fit, 1000) == doctest::Approx(1000.0).epsilon(1e-12));
    }
    SUBCASE("reference-scale coefficients against the bisection oracle") {
        fit.a = 2.19;
        fit.b = 0.91;
        const double got = extrapolation_cutoff(fit, 2000);
        CHECK(got == doctest::Approx(xmax_bisection_oracle(2.19, 0.91, 2000)).epsilon(1e-9));
        CHECK(got == doctest::Approx(4.71e4).epsilon(0.01));
    }
    SUBCASE("divergent tail") {
        fit.a = 0.0;
        fit.b = 0.0;
        CHECK_THROWS_AS(extrapolation_cutoff(fit, 1000), NumericError);
        fit.b = -0.5;
        CHECK_THROWS_AS(extrapolation_cutoff(fit, 1000), NumericError);
    }
}

TEST_CASE("crossing_cutoff: exact fit never exceeds, no crossing") {
    const auto snap = aligned_quantile_snapshot(2000, 1.5, 0.9);
    const auto pts = empirical_ccdf(snap);
    const auto fit = fit_of(snap, FitWindow::quantile(0.0, 1.0));  // exact recovery
    const auto crossing = crossing_cutoff(fit, pts);
    CHECK_FALSE(crossing.found);
}

TEST_CASE("crossing_cutoff: capped sample crosses near the cap") {
    SynthConfig cfg;
    cfg.n = 2000;
    cfg.b = 0.9;
    cfg.x_min = 1.0;
    cfg.cap = 3000.0;
    cfg.seed = 42;
    const auto sample = capped_pareto_sample(cfg);
    const auto pts = empirical_ccdf(sample.snapshot);
    const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
    const auto crossing = crossing_cutoff(fit, pts);
    REQUIRE(crossing.found);
    CHECK(crossing.x_c >= 0.8 * 3000.0);
    CHECK(crossing.x_c <= 1.2 * 3000.0);

    // Brute-force scan oracle: mark each point where the fitted curve
    // exceeds the empirical survival, then take the largest point whose
    // strictly-above region is entirely exceeded.
    std::vector<CcdfPoint> asc(pts.rbegin(), pts.rend());
    std::vector<bool> exceed(asc.size());
    bool any = false;
    for (std::size_t i = 0; i < asc.size(); ++i) {
        exceed[i] = fitted_ccdf(fit, asc[i].x) > asc[i].p * (1.0 + 1e-9);
        any = any || exceed[i];
    }
    REQUIRE(any);
    double oracle_xc = -1.0;
    bool above_all_exceeded = true;  // vacuously true at the top
    for (std::size_t i = asc.size(); i-- > 0;) {
        if (above_all_exceeded) oracle_xc = std::max(oracle_xc, asc[i].x);
        above_all_exceeded = above_all_exceeded && exceed[i];
    }
    CHECK(crossing.x_c == oracle_xc);
}

TEST_CASE("pareto_tail_assets") {
    SUBCASE("empty interval") {
        CHECK(pareto_tail_assets(0.0, 0.9, 2000.0, 100.0, 100.0) == 0.0);
    }
    SUBCASE("log branch: n=1000, c=1, b=1, [10, 1000] -> 1000 ln 100") {
        const double got = pareto_tail_assets(0.0, 1.0, 1000.0, 10.0, 1000.0);
        CHECK(got == doctest::Approx(1000.0 * std::log(100.0)).epsilon(1e-12));
        const double oracle = oracles::tail_mass_oracle(1.0, 1.0, 1000.0, 10.0, 1000.0);
        CHECK(got == doctest::Approx(oracle).epsilon(1e-9));
    }
    SUBCASE("reference-scale case against both quadrature oracles") {
        const double x_max = extrapolation_cutoff(2.19, 0.91, 2000);
        const double got = pareto_tail_assets(2.19, 0.91, 2000.0, 2000.0, x_max);
        CHECK(got == doctest::Approx(1.18e5).epsilon(0.01));
        const double c = std::exp(2.19);
        CHECK(got ==
              doctest::Approx(pareto_mass_quadrature(c, 0.91, 2000.0, 2000.0, x_max)).epsilon(1e-9));
        CHECK(got ==
              doctest::Approx(oracles::tail_mass_oracle(c, 0.91, 2000.0, 2000.0, x_max)).epsilon(1e-9));
    }
    SUBCASE("argument errors") {
        CHECK_THROWS_AS(pareto_tail_assets(0.0, 0.9, 10.0, 100.0, 50.0), UsageError);
        CHECK_THROWS_AS(pareto_tail_assets(0.0, 0.9, 10.0, 0.0, 50.0), UsageError);
        CHECK_THROWS_AS(pareto_tail_assets(0.0, -0.1, 10.0, 10.0, 50.0), NumericError);
    }
    SUBCASE("branch continuity at b = 1") {
        const double at_one = pareto_tail_assets(0.5, 1.0, 2000.0, 10.0, 5000.0);
        for (double db : {1e-7, -1e-7}) {
            const double near = pareto_tail_assets(0.5, 1.0 + db, 2000.0, 10.0, 5000.0);
            CHECK(std::abs(near - at_one) / std::abs(at_one) < 1e-5);
        }
    }
    SUBCASE("closed form vs quadrature across a randomized grid") {
        Rng rng(2468);
        for (int i = 0; i < 60; ++i) {
            const bool near_one = i < 10;
            const double b = near_one ? 1.0 + (rng.uniform01() * 2.0 - 1.0) * 1e-4
                                      : 0.5 + rng.uniform01();
            const double c = std::exp(rng.uniform01() * 3.0 - 0.5);
            const double x_c = 10.0 * std::exp(rng.uniform01() * std::log(300.0));
            const double x_max = x_c * std::exp(rng.uniform01() * std::log(100.0));
            const double a = std::log(c);
            const double closed = pareto_tail_assets(a, b, 2000.0, x_c, x_max);
            const double quad = pareto_mass_quadrature(c, b, 2000.0, x_c, x_max);
            CHECK(std::abs(closed - quad) <= 1e-9 * std::abs(quad));
        }
    }
}

TEST_CASE("empirical_tail_assets") {
    const auto snap = snapshot_of({1000.0, 2500.0, 3100.0});
    SUBCASE("filtered sum") {
        CHECK(empirical_tail_assets(snap, 2000.0) == 5600.0);
    }
    SUBCASE("cutoff above the maximum") {
        CHECK(empirical_tail_assets(snap, 5000.0) == 0.0);
    }
    SUBCASE("cutoff exactly at a value excludes it (strict >)") {
        CHECK(empirical_tail_assets(snap, 2500.0) == 3100.0);
    }
    SUBCASE("seeded snapshot equals the contract oracle exactly") {
        SynthConfig cfg;
        cfg.n = 2000;
        cfg.seed = 77;
        const auto s = pareto_sample(cfg);
        const double x_c = 5.0;
        // Contract: ascending-order plain sum of the strict tail.
        std::vector<double> tail;
        for (const auto& r : s.records) {
            if (r.assets > x_c) tail.push_back(r.assets);
        }
        std::sort(tail.begin(), tail.end());
        double plain = 0.0;
        for (double v : tail) plain += v;
        const double got = empirical_tail_assets(s, x_c);
        CHECK(got == plain);  // bit-exact against the stated contract
        const double comp = oracles::compensated_sum(tail);
        CHECK(got == doctest::Approx(comp).epsilon(1e-12));
    }
}

TEST_CASE("missing_mass: exact-fit snapshot has zero deficit") {
    const auto snap = aligned_quantile_snapshot(2000, 1.5, 0.9);
    const auto fit = fit_of(snap, FitWindow::quantile(0.0, 1.0));
    const auto est = missing_mass(snap, fit);
    CHECK(est.no_missing_tail);
    CHECK(est.i_sb == 0.0);
    CHECK(est.x_c == est.x_max);
    CHECK(est.band_lo <= 0.0);
    CHECK(est.band_hi >= 0.0);
}

TEST_CASE("missing_mass: capped sample recovers a positive deficit, oracle-exact") {
    SynthConfig cfg;
    cfg.n = 2000;
    cfg.b = 0.9;
    cfg.cap = 3000.0;
    cfg.seed = 42;
    const auto sample = capped_pareto_sample(cfg);
    const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
    const auto est = missing_mass(sample.snapshot, fit);

    CHECK(est.i_sb > 0.0);
    CHECK_FALSE(est.no_missing_tail);

    // Oracle composition: quadrature of the fitted density minus the strict
    // tail sum, at the recorded cutoffs.
    const double quad =
        pareto_mass_quadrature(std::exp(fit.a), fit.b, 2000.0, est.x_c, est.x_max);
    const double emp = empirical_tail_assets(sample.snapshot, est.x_c);
    CHECK(est.i_sb == doctest::Approx(quad - emp).epsilon(1e-9));
    CHECK(est.theoretical_tail_assets == doctest::Approx(quad).epsilon(1e-9));
    CHECK(est.empirical_tail_assets == emp);
    CHECK(est.cutoff_rule == "auto");
    CHECK(est.band_rule == "corners");
    CHECK(est.ratio == est.i_sb / est.total_assets);
}

TEST_CASE("missing_mass: fixed cutoff can push the estimate negative, flagged") {
    // Uncapped heavy-tail sample: the observed tail above a low cutoff beats
    // the extrapolation truncated at x_max for this seed.
    SynthConfig cfg;
    cfg.n = 2000;
    cfg.b = 0.9;
    cfg.seed = 5;
    const auto snap = pareto_sample(cfg);
    const auto fit = fit_of(snap, FitWindow::quantile(0.05, 0.5));
    const auto est = missing_mass(snap, fit, CutoffRule::fixed(50.0));
    CHECK(est.i_sb < 0.0);
    CHECK(est.negative_flagged);
    CHECK(est.ratio < 0.0);
    CHECK(est.ratio_out_of_range);
    CHECK_FALSE(est.no_missing_tail);
    CHECK(est.cutoff_rule == "fixed:50");
    CHECK(est.band_lo <= est.i_sb);
    CHECK(est.band_hi >= est.i_sb);
}

TEST_CASE("confidence_band") {
    SUBCASE("zero standard errors collapse the band") {
        const auto snap = aligned_quantile_snapshot(2000, 1.0, 0.9);
        auto fit = fit_of(snap, FitWindow::quantile(0.0, 1.0));
        REQUIRE(fit.se_a <= 1e-10);
        fit.se_a = 0.0;
        fit.se_b = 0.0;
        const auto est = missing_mass(snap, fit, CutoffRule::fixed(500.0));
        CHECK(est.band_lo == est.i_sb);
        CHECK(est.band_hi == est.i_sb);
    }
    SUBCASE("band equals brute-force four-corner enumeration exactly") {
        SynthConfig cfg;
        cfg.n = 2000;
        cfg.b = 0.9;
        cfg.cap = 3000.0;
        cfg.seed = 42;
        const auto sample = capped_pareto_sample(cfg);
        const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
        const auto est = missing_mass(sample.snapshot, fit);

        const double n = static_cast<double>(sample.snapshot.n());
        const double emp = empirical_tail_assets(sample.snapshot, est.x_c);
        double lo = est.i_sb, hi = est.i_sb;
        for (double da : {-2.0 * fit.se_a, 2.0 * fit.se_a}) {
            for (double db : {-2.0 * fit.se_b, 2.0 * fit.se_b}) {
                const double corner_xmax =
                    extrapolation_cutoff(fit.a + da, fit.b + db, sample.snapshot.n());
                const double corner =
                    pareto_tail_assets(fit.a + da, fit.b + db, n, est.x_c, corner_xmax) - emp;
                lo = std::min(lo, corner);
                hi = std::max(hi, corner);
            }
        }
        CHECK(est.band_lo == lo);
        CHECK(est.band_hi == hi);

        const auto band = confidence_band(sample.snapshot, fit);
        CHECK(band.first == lo);
        CHECK(band.second == hi);
    }
    SUBCASE("corner with non-positive tail exponent propagates") {
        const auto snap = aligned_quantile_snapshot(2000, 1.0, 0.9);
        auto fit = fit_of(snap, FitWindow::quantile(0.0, 1.0));
        fit.se_b = 0.6;  // lower corner b = 0.9 - 1.2 < 0
        CHECK_THROWS_AS(confidence_band(snap, fit, CutoffRule::fixed(500.0)), NumericError);
    }
    SUBCASE("band always contains the point estimate (randomized)") {
        for (std::uint64_t rep = 0; rep < 25; ++rep) {
            SynthConfig cfg;
            cfg.n = 2000;
            cfg.b = 0.8 + 0.02 * static_cast<double>(rep % 10);
            cfg.cap = 2000.0;
            cfg.seed = replicate_seed(31000, rep);
            const auto sample = capped_pareto_sample(cfg);
            const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
            const auto est = missing_mass(sample.snapshot, fit);
            CHECK(est.band_lo <= est.i_sb);
            CHECK(est.band_hi >= est.i_sb);
        }
    }
}

TEST_CASE("missing mass monotonicity in x_c where the fit dominates the data") {
    // Empirical CCDF uniformly below the fitted curve: shrink every aligned
    // asset value by 15%, keeping p-values fixed. Cutoffs sit in the dense
    // body so single firms crossing a boundary cannot outweigh the margin.
    auto snap = aligned_quantile_snapshot(2000, 1.0, 0.9);
    for (auto& rec : snap.records) rec.assets *= 0.85;
    ParetoFit fit;
    fit.a = 1.0;
    fit.b = 0.9;
    fit.n_fit = 2000;

    const auto pts = empirical_ccdf(snap);
    const double x_max = extrapolation_cutoff(fit, snap.n());
    std::vector<double> cutoffs{5.0, 10.0, 20.0, 40.0, 80.0};
    double prev = std::numeric_limits<double>::infinity();
    bool dominance = true;
    for (const auto& p : pts) dominance = dominance && fitted_ccdf(fit, p.x) >= p.p;
    REQUIRE(dominance);
    for (double x_c : cutoffs) {
        REQUIRE(x_c < x_max);
        const double i_sb = pareto_tail_assets(fit, snap.n(), x_c, x_max) -
                            empirical_tail_assets(snap, x_c);
        CHECK(i_sb <= prev);
        prev = i_sb;
    }
}

TEST_CASE("missing mass rises in a and falls in b (finite differences)") {
    SynthConfig cfg;
    cfg.n = 2000;
    cfg.b = 0.9;
    cfg.cap = 3000.0;
    cfg.seed = 42;
    const auto sample = capped_pareto_sample(cfg);
    const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
    const auto base = missing_mass(sample.snapshot, fit, CutoffRule::fixed(2500.0));

    const double h = 1e-3;
    auto shifted = fit;
    shifted.a = fit.a + h;
    const auto up_a = missing_mass(sample.snapshot, shifted, CutoffRule::fixed(2500.0));
    CHECK(up_a.i_sb > base.i_sb);

    shifted = fit;
    shifted.b = fit.b + h;
    const auto up_b = missing_mass(sample.snapshot, shifted, CutoffRule::fixed(2500.0));
    CHECK(up_b.i_sb < base.i_sb);
}

TEST_CASE("estimate_to_json carries every field plus the rule identifiers") {
    SynthConfig cfg;
    cfg.n = 2000;
    cfg.b = 0.9;
    cfg.cap = 3000.0;
    cfg.seed = 42;
    const auto sample = capped_pareto_sample(cfg);
    const auto fit = fit_of(sample.snapshot, FitWindow::quantile(0.05, 0.5));
    const auto est = missing_mass(sample.snapshot, fit, CutoffRule::fixed(2000.0));
    const auto j = estimate_to_json(est);
    for (const char* key :
         {"year", "i_sb", "band", "x_c", "x_max", "theoretical_tail_assets",
          "empirical_tail_assets", "total_assets", "ratio", "fit", "no_missing_tail",
          "negative_flagged", "cutoff_rule", "band_rule"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["cutoff_rule"] == "fixed:2000");
    CHECK(j["band_rule"] == "corners");
}

TEST_CASE("parse_cutoff_spec") {
    CHECK(parse_cutoff_spec("auto").kind == CutoffRule::Kind::automatic);
    const auto fixed = parse_cutoff_spec("2000");
    CHECK(fixed.kind == CutoffRule::Kind::fixed);
    CHECK(fixed.value == 2000.0);
    CHECK_THROWS_AS(parse_cutoff_spec("soon"), UsageError);
    CHECK_THROWS_AS(parse_cutoff_spec("-5"), UsageError);
}
