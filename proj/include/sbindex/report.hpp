#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sbindex/ingest.hpp"
#include "sbindex/missingmass.hpp"
#include "sbindex/tailfit.hpp"

namespace sbindex {

/// One emission-ready row. I_SB and its band are reported in trillions of
/// USD while total assets stay in billions, so each column prints at a
/// readable magnitude.
struct TableRow {
    int year = 0;
    double i_sb_tusd = 0.0;
    double band_lo_tusd = 0.0;
    double band_hi_tusd = 0.0;
    double total_assets_busd = 0.0;
    double ratio = 0.0;
    double a = 0.0;
    double b = 0.0;
    double se_a = 0.0;
    double se_b = 0.0;
    double x_c_busd = 0.0;
    double x_max_busd = 0.0;
    std::size_t n_fit = 0;
};

enum class TableFormat { csv, json, markdown };

TableFormat table_format_from_name(const std::string& name);

TableRow build_table_row(const MissingMassEstimate& estimate);

/// Deterministic byte output. CSV and markdown render display-rounded values
/// (two decimals, standard errors at four); JSON carries full precision.
/// Rows are emitted sorted by year.
std::string emit_table(std::vector<TableRow> rows, TableFormat format);
std::vector<TableRow> table_rows_from_json_text(const std::string& text);

struct PlotSeries {
    enum class Kind { ccdf_points, ccdf_fitline, isb_timeseries, external_overlay };
    Kind kind = Kind::ccdf_points;
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_lo;  // band columns; empty unless the series has a band
    std::vector<double> y_hi;
};

/// Empirical CCDF as plot data: one (x, p) pair per distinct asset value.
PlotSeries ccdf_points_series(const Snapshot& snapshot);

/// The fitted survival function sampled at 100 log-spaced asset values from
/// the smallest positive asset to x_max, clamped to p <= 1.
PlotSeries ccdf_fitline_series(const Snapshot& snapshot, const ParetoFit& fit);

PlotSeries isb_timeseries(const std::vector<TableRow>& rows);  // rows must be sorted by year

/// Overlay file schema: `year,value_tusd,label` with a uniform label.
PlotSeries load_overlay(std::istream& in);
PlotSeries load_overlay_file(const std::filesystem::path& path);

std::string plot_series_csv(const PlotSeries& series);

/// Self-contained 800x600 log-log chart of the empirical CCDF and the fitted
/// line, with the fit window shaded. Byte-deterministic.
std::string ccdf_chart_svg(const Snapshot& snapshot, const ParetoFit& fit);

/// Linear time-series chart of I_SB with its band, plus optional overlays.
std::string timeseries_chart_svg(const PlotSeries& isb,
                                 const std::vector<PlotSeries>& overlays);

struct PipelineConfig {
    FitWindow window = default_window();
    CutoffRule cutoff = CutoffRule::automatic();
    BandRule band = BandRule::corners;
};

struct YearFailure {
    int year = 0;
    std::string message;
};

struct PipelineResult {
    std::vector<MissingMassEstimate> estimates;  // ascending year
    std::vector<YearFailure> failures;
};

/// Runs ingest -> CCDF -> window -> fit -> missing mass -> band for each
/// requested year present in the dataset. Per-year failures are collected
/// without aborting the other years; requesting only absent years throws.
PipelineResult run_pipeline(const std::vector<Snapshot>& snapshots,
                            const std::vector<int>& years, const PipelineConfig& config);

}  // namespace sbindex
