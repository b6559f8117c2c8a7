#include "sbindex/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"
#include "sbindex/svg.hpp"

namespace sbindex {

namespace {

std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

const char* kTableHeader =
    "year,i_sb_tusd,band_lo_tusd,band_hi_tusd,total_assets_busd,ratio,a,b,se_a,se_b,"
    "x_c_busd,x_max_busd,n_fit";

std::vector<std::string> row_cells(const TableRow& r) {
    return {
        std::to_string(r.year),
        fmt_fixed(r.i_sb_tusd, 2),
        fmt_fixed(r.band_lo_tusd, 2),
        fmt_fixed(r.band_hi_tusd, 2),
        fmt_fixed(r.total_assets_busd, 2),
        fmt_fixed(r.ratio, 2),
        fmt_fixed(r.a, 2),
        fmt_fixed(r.b, 2),
        fmt_fixed(r.se_a, 4),
        fmt_fixed(r.se_b, 4),
        fmt_fixed(r.x_c_busd, 2),
        fmt_fixed(r.x_max_busd, 2),
        std::to_string(r.n_fit),
    };
}

nlohmann::json row_to_json(const TableRow& r) {
    nlohmann::json j;
    j["year"] = r.year;
    j["i_sb_tusd"] = r.i_sb_tusd;
    j["band_lo_tusd"] = r.band_lo_tusd;
    j["band_hi_tusd"] = r.band_hi_tusd;
    j["total_assets_busd"] = r.total_assets_busd;
    j["ratio"] = r.ratio;
    j["a"] = r.a;
    j["b"] = r.b;
    j["se_a"] = r.se_a;
    j["se_b"] = r.se_b;
    j["x_c_busd"] = r.x_c_busd;
    j["x_max_busd"] = r.x_max_busd;
    j["n_fit"] = r.n_fit;
    return j;
}

}  // namespace

TableFormat table_format_from_name(const std::string& name) {
    if (name == "csv") return TableFormat::csv;
    if (name == "json") return TableFormat::json;
    if (name == "markdown" || name == "md") return TableFormat::markdown;
    throw UsageError("unknown table format '" + name + "' (expected csv, json or markdown)");
}

TableRow build_table_row(const MissingMassEstimate& est) {
    TableRow r;
    r.year = est.year;
    r.i_sb_tusd = est.i_sb / 1000.0;
    r.band_lo_tusd = est.band_lo / 1000.0;
    r.band_hi_tusd = est.band_hi / 1000.0;
    r.total_assets_busd = est.total_assets;
    r.ratio = est.ratio;
    r.a = est.fit.a;
    r.b = est.fit.b;
    r.se_a = est.fit.se_a;
    r.se_b = est.fit.se_b;
    r.x_c_busd = est.x_c;
    r.x_max_busd = est.x_max;
    r.n_fit = est.fit.n_fit;
    return r;
}

std::string emit_table(std::vector<TableRow> rows, TableFormat format) {
    if (rows.empty()) throw DataError("emit_table: no rows");
    std::sort(rows.begin(), rows.end(),
              [](const TableRow& a, const TableRow& b) { return a.year < b.year; });

    std::string out;
    switch (format) {
        case TableFormat::csv: {
            out = std::string(kTableHeader) + "\n";
            for (const auto& r : rows) {
                const auto cells = row_cells(r);
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    if (i) out += ',';
                    out += cells[i];
                }
                out += '\n';
            }
            break;
        }
        case TableFormat::markdown: {
            std::vector<std::string> header;
            {
                std::string h = kTableHeader;
                std::size_t start = 0;
                while (start <= h.size()) {
                    auto pos = h.find(',', start);
                    if (pos == std::string::npos) {
                        header.push_back(h.substr(start));
                        break;
                    }
                    header.push_back(h.substr(start, pos - start));
                    start = pos + 1;
                }
            }
            out = "|";
            for (const auto& name : header) out += " " + name + " |";
            out += "\n|";
            for (std::size_t i = 0; i < header.size(); ++i) out += " ---: |";
            out += "\n";
            for (const auto& r : rows) {
                out += "|";
                for (const auto& cell : row_cells(r)) out += " " + cell + " |";
                out += "\n";
            }
            break;
        }
        case TableFormat::json: {
            nlohmann::json doc = nlohmann::json::array();
            for (const auto& r : rows) doc.push_back(row_to_json(r));
            out = doc.dump(2) + "\n";
            break;
        }
    }
    return out;
}

std::vector<TableRow> table_rows_from_json_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed table JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("table JSON: expected a top-level array");
    std::vector<TableRow> rows;
    for (const auto& j : doc) {
        TableRow r;
        try {
            r.year = j.at("year").get<int>();
            r.i_sb_tusd = j.at("i_sb_tusd").get<double>();
            r.band_lo_tusd = j.at("band_lo_tusd").get<double>();
            r.band_hi_tusd = j.at("band_hi_tusd").get<double>();
            r.total_assets_busd = j.at("total_assets_busd").get<double>();
            r.ratio = j.at("ratio").get<double>();
            r.a = j.at("a").get<double>();
            r.b = j.at("b").get<double>();
            r.se_a = j.at("se_a").get<double>();
            r.se_b = j.at("se_b").get<double>();
            r.x_c_busd = j.at("x_c_busd").get<double>();
            r.x_max_busd = j.at("x_max_busd").get<double>();
            r.n_fit = j.at("n_fit").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed table row: ") + e.what());
        }
        rows.push_back(r);
    }
    return rows;
}

PlotSeries ccdf_points_series(const Snapshot& snapshot) {
    PlotSeries s;
    s.kind = PlotSeries::Kind::ccdf_points;
    s.label = "empirical " + std::to_string(snapshot.year);
    for (const auto& p : empirical_ccdf(snapshot)) {
        s.x.push_back(p.x);
        s.y.push_back(p.p);
    }
    return s;
}

PlotSeries ccdf_fitline_series(const Snapshot& snapshot, const ParetoFit& fit) {
    const auto points = empirical_ccdf(snapshot);
    const double x_lo = points.back().x;  // smallest positive asset
    const double x_hi = extrapolation_cutoff(fit, snapshot.n());

    PlotSeries s;
    s.kind = PlotSeries::Kind::ccdf_fitline;
    s.label = "fit " + std::to_string(snapshot.year);
    constexpr int kSamples = 100;
    const double log_lo = std::log(x_lo);
    const double log_hi = std::log(std::max(x_hi, x_lo * (1.0 + 1e-12)));
    for (int i = 0; i < kSamples; ++i) {
        const double t = static_cast<double>(i) / (kSamples - 1);
        const double x = std::exp(log_lo + t * (log_hi - log_lo));
        s.x.push_back(x);
        s.y.push_back(fitted_ccdf(fit, x));
    }
    return s;
}

PlotSeries isb_timeseries(const std::vector<TableRow>& rows) {
    PlotSeries s;
    s.kind = PlotSeries::Kind::isb_timeseries;
    s.label = "I_SB";
    int prev_year = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].year <= prev_year) {
            throw UsageError("timeseries rows must be sorted by strictly increasing year");
        }
        prev_year = rows[i].year;
        s.x.push_back(rows[i].year);
        s.y.push_back(rows[i].i_sb_tusd);
        s.y_lo.push_back(rows[i].band_lo_tusd);
        s.y_hi.push_back(rows[i].band_hi_tusd);
    }
    return s;
}

PlotSeries load_overlay(std::istream& in) {
    if (!in) throw DataError("unreadable overlay stream");
    std::string line;
    if (!std::getline(in, line)) throw DataError("overlay file: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "year,value_tusd,label") {
        throw DataError("overlay line 1: expected header 'year,value_tusd,label', got '" + line + "'");
    }

    PlotSeries s;
    s.kind = PlotSeries::Kind::external_overlay;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto first = line.find(',');
        const auto second = first == std::string::npos ? first : line.find(',', first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            throw DataError("overlay line " + std::to_string(line_no) + ": expected 3 fields");
        }
        int year = 0;
        double value = 0.0;
        try {
            year = std::stoi(line.substr(0, first));
            value = std::stod(line.substr(first + 1, second - first - 1));
        } catch (const std::exception&) {
            throw DataError("overlay line " + std::to_string(line_no) + ": bad year or value");
        }
        const std::string label = line.substr(second + 1);
        if (label.empty()) {
            throw DataError("overlay line " + std::to_string(line_no) + ": empty label");
        }
        if (s.label.empty()) {
            s.label = label;
        } else if (s.label != label) {
            throw DataError("overlay line " + std::to_string(line_no) +
                            ": label '" + label + "' differs from '" + s.label + "'");
        }
        if (!s.x.empty() && year <= s.x.back()) {
            throw DataError("overlay line " + std::to_string(line_no) +
                            ": years must be strictly increasing");
        }
        s.x.push_back(year);
        s.y.push_back(value);
    }
    if (s.x.empty()) throw DataError("overlay file has no data rows");
    return s;
}

PlotSeries load_overlay_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open overlay file: " + path.string());
    return load_overlay(in);
}

std::string plot_series_csv(const PlotSeries& series) {
    std::string out;
    switch (series.kind) {
        case PlotSeries::Kind::ccdf_points:
        case PlotSeries::Kind::ccdf_fitline:
            out = "x,p\n";
            for (std::size_t i = 0; i < series.x.size(); ++i) {
                out += format_double(series.x[i]) + "," + format_double(series.y[i]) + "\n";
            }
            break;
        case PlotSeries::Kind::isb_timeseries:
            out = "year,i_sb_tusd,band_lo_tusd,band_hi_tusd\n";
            for (std::size_t i = 0; i < series.x.size(); ++i) {
                out += fmt_fixed(series.x[i], 0) + "," + format_double(series.y[i]) + "," +
                       format_double(series.y_lo[i]) + "," + format_double(series.y_hi[i]) + "\n";
            }
            break;
        case PlotSeries::Kind::external_overlay:
            out = "year,value_tusd\n";
            for (std::size_t i = 0; i < series.x.size(); ++i) {
                out += fmt_fixed(series.x[i], 0) + "," + format_double(series.y[i]) + "\n";
            }
            break;
    }
    return out;
}

namespace {

// Chart geometry shared by both SVG emitters.
constexpr int kChartW = 800;
constexpr int kChartH = 600;
constexpr double kMarginL = 70.0, kMarginR = 25.0, kMarginT = 30.0, kMarginB = 55.0;
constexpr double kPlotW = kChartW - kMarginL - kMarginR;
constexpr double kPlotH = kChartH - kMarginT - kMarginB;

struct LogAxis {
    double lo_exp, hi_exp;  // powers of 10 bounding the data

    double to_px(double v, double span_px) const {
        const double t = (std::log10(v) - lo_exp) / (hi_exp - lo_exp);
        return t * span_px;
    }
};

LogAxis make_log_axis(double lo, double hi) {
    LogAxis ax;
    ax.lo_exp = std::floor(std::log10(lo));
    ax.hi_exp = std::ceil(std::log10(hi));
    if (ax.hi_exp <= ax.lo_exp) ax.hi_exp = ax.lo_exp + 1.0;
    return ax;
}

std::string tick_label(int exponent) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "1e%d", exponent);
    return buf;
}

constexpr const char* kAxisStyle = "stroke:#333333;stroke-width:1";
constexpr const char* kGridStyle = "stroke:#dddddd;stroke-width:1";
constexpr const char* kTextStyle = "font-family:sans-serif;font-size:12px;fill:#333333";
constexpr const char* kTitleStyle = "font-family:sans-serif;font-size:14px;fill:#111111";

}  // namespace

std::string ccdf_chart_svg(const Snapshot& snapshot, const ParetoFit& fit) {
    const PlotSeries points = ccdf_points_series(snapshot);
    const PlotSeries fitline = ccdf_fitline_series(snapshot, fit);

    double x_lo = points.x.front(), x_hi = points.x.front();
    double y_lo = points.y.front();
    for (double v : points.x) { x_lo = std::min(x_lo, v); x_hi = std::max(x_hi, v); }
    for (double v : fitline.x) { x_lo = std::min(x_lo, v); x_hi = std::max(x_hi, v); }
    for (double v : points.y) if (v > 0.0) y_lo = std::min(y_lo, v);
    for (double v : fitline.y) if (v > 0.0) y_lo = std::min(y_lo, v);

    const LogAxis xax = make_log_axis(x_lo, x_hi);
    const LogAxis yax = make_log_axis(y_lo, 1.0);
    const auto X = [&](double v) { return kMarginL + xax.to_px(v, kPlotW); };
    const auto Y = [&](double v) { return kMarginT + kPlotH - yax.to_px(v, kPlotH); };

    SvgDoc svg(kChartW, kChartH);

    // Shade the fit window. Quantile bounds are mapped through the fitted
    // quantile function so the shading stays x-interpretable.
    {
        double w_lo = fit.window.lo, w_hi = fit.window.hi;
        if (fit.window.mode == WindowMode::quantile) {
            w_lo = std::exp((fit.a - std::log(fit.window.hi)) / fit.b);
            w_hi = std::exp((fit.a - std::log(std::max(fit.window.lo, 1e-12))) / fit.b);
        }
        w_lo = std::max(w_lo, std::pow(10.0, xax.lo_exp));
        w_hi = std::min(w_hi, std::pow(10.0, xax.hi_exp));
        if (w_lo < w_hi) {
            svg.rect(X(w_lo), kMarginT, X(w_hi) - X(w_lo), kPlotH,
                     "fill:#fff3cd;stroke:none");
        }
    }

    for (int e = static_cast<int>(xax.lo_exp); e <= static_cast<int>(xax.hi_exp); ++e) {
        const double px = X(std::pow(10.0, e));
        svg.line(px, kMarginT, px, kMarginT + kPlotH, kGridStyle);
        svg.text(px - 12.0, kMarginT + kPlotH + 18.0, tick_label(e), kTextStyle);
    }
    for (int e = static_cast<int>(yax.lo_exp); e <= static_cast<int>(yax.hi_exp); ++e) {
        const double py = Y(std::pow(10.0, e));
        svg.line(kMarginL, py, kMarginL + kPlotW, py, kGridStyle);
        svg.text(kMarginL - 40.0, py + 4.0, tick_label(e), kTextStyle);
    }
    svg.line(kMarginL, kMarginT, kMarginL, kMarginT + kPlotH, kAxisStyle);
    svg.line(kMarginL, kMarginT + kPlotH, kMarginL + kPlotW, kMarginT + kPlotH, kAxisStyle);

    {
        std::vector<std::pair<double, double>> line;
        for (std::size_t i = 0; i < fitline.x.size(); ++i) {
            line.emplace_back(X(fitline.x[i]), Y(fitline.y[i]));
        }
        svg.polyline(line, "fill:none;stroke:#d62728;stroke-width:1.5");
    }
    for (std::size_t i = 0; i < points.x.size(); ++i) {
        svg.circle(X(points.x[i]), Y(points.y[i]), 2.0, "fill:#1f77b4;stroke:none");
    }

    svg.text(kMarginL, 20.0, "Firm asset CCDF, " + std::to_string(snapshot.year), kTitleStyle);
    svg.text(kMarginL + kPlotW / 2.0 - 30.0, kChartH - 12.0, "assets ($B)", kTextStyle);
    svg.text(12.0, kMarginT + 12.0, "P(A > x)", kTextStyle);
    svg.text(kMarginL + kPlotW - 150.0, kMarginT + 16.0, "points: " + points.label, kTextStyle);
    svg.text(kMarginL + kPlotW - 150.0, kMarginT + 32.0, "line: " + fitline.label, kTextStyle);
    return svg.str();
}

std::string timeseries_chart_svg(const PlotSeries& isb, const std::vector<PlotSeries>& overlays) {
    if (isb.x.empty()) throw DataError("timeseries chart needs at least one row");

    double year_lo = isb.x.front(), year_hi = isb.x.back();
    double y_hi = 0.0;
    for (double v : isb.y_hi) y_hi = std::max(y_hi, v);
    for (double v : isb.y) y_hi = std::max(y_hi, v);
    for (const auto& o : overlays) {
        if (o.x.empty()) continue;
        year_lo = std::min(year_lo, o.x.front());
        year_hi = std::max(year_hi, o.x.back());
        for (double v : o.y) y_hi = std::max(y_hi, v);
    }
    if (y_hi <= 0.0) y_hi = 1.0;
    y_hi *= 1.05;
    const double x_pad = 0.5;

    const auto X = [&](double year) {
        const double t = (year - (year_lo - x_pad)) / ((year_hi + x_pad) - (year_lo - x_pad));
        return kMarginL + t * kPlotW;
    };
    const auto Y = [&](double v) { return kMarginT + kPlotH - (v / y_hi) * kPlotH; };

    SvgDoc svg(kChartW, kChartH);

    const int span = static_cast<int>(year_hi) - static_cast<int>(year_lo);
    const int year_step = span > 15 ? 2 : 1;
    for (int year = static_cast<int>(year_lo); year <= static_cast<int>(year_hi); year += year_step) {
        const double px = X(year);
        svg.line(px, kMarginT, px, kMarginT + kPlotH, kGridStyle);
        svg.text(px - 16.0, kMarginT + kPlotH + 18.0, std::to_string(year), kTextStyle);
    }
    {
        // ~5 horizontal gridlines at a 1/2/5 step.
        const double raw_step = y_hi / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
        double step = mag;
        if (raw_step / mag > 5.0) step = 10.0 * mag;
        else if (raw_step / mag > 2.0) step = 5.0 * mag;
        else if (raw_step / mag > 1.0) step = 2.0 * mag;
        for (double v = 0.0; v <= y_hi; v += step) {
            const double py = Y(v);
            svg.line(kMarginL, py, kMarginL + kPlotW, py, kGridStyle);
            svg.text(kMarginL - 45.0, py + 4.0, fmt_fixed(v, 0), kTextStyle);
        }
    }
    svg.line(kMarginL, kMarginT, kMarginL, kMarginT + kPlotH, kAxisStyle);
    svg.line(kMarginL, kMarginT + kPlotH, kMarginL + kPlotW, kMarginT + kPlotH, kAxisStyle);

    if (!isb.y_lo.empty()) {
        std::vector<std::pair<double, double>> band;
        for (std::size_t i = 0; i < isb.x.size(); ++i) band.emplace_back(X(isb.x[i]), Y(isb.y_lo[i]));
        for (std::size_t i = isb.x.size(); i-- > 0;) band.emplace_back(X(isb.x[i]), Y(isb.y_hi[i]));
        svg.polygon(band, "fill:#9ecae1;fill-opacity:0.5;stroke:none");
    }
    {
        std::vector<std::pair<double, double>> line;
        for (std::size_t i = 0; i < isb.x.size(); ++i) line.emplace_back(X(isb.x[i]), Y(isb.y[i]));
        svg.polyline(line, "fill:none;stroke:#1f77b4;stroke-width:2");
        for (auto& [px, py] : line) svg.circle(px, py, 3.0, "fill:#1f77b4;stroke:none");
    }
    const char* kOverlayColors[] = {"#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    for (std::size_t k = 0; k < overlays.size(); ++k) {
        const auto& o = overlays[k];
        const std::string color = kOverlayColors[k % 4];
        std::vector<std::pair<double, double>> line;
        for (std::size_t i = 0; i < o.x.size(); ++i) line.emplace_back(X(o.x[i]), Y(o.y[i]));
        svg.polyline(line, "fill:none;stroke:" + color + ";stroke-width:2;stroke-dasharray:6 3");
        svg.text(kMarginL + kPlotW - 160.0, kMarginT + 32.0 + 16.0 * k, o.label,
                 std::string(kTextStyle) + ";fill:" + color);
    }

    svg.text(kMarginL, 20.0, "Missing-mass index over time", kTitleStyle);
    svg.text(kMarginL + kPlotW / 2.0 - 15.0, kChartH - 12.0, "year", kTextStyle);
    svg.text(12.0, kMarginT + 12.0, "I_SB ($T)", kTextStyle);
    svg.text(kMarginL + kPlotW - 160.0, kMarginT + 16.0, isb.label + " (band: +-2 s.e.)", kTextStyle);
    return svg.str();
}

PipelineResult run_pipeline(const std::vector<Snapshot>& snapshots,
                            const std::vector<int>& years, const PipelineConfig& config) {
    std::map<int, const Snapshot*> by_year;
    for (const auto& s : snapshots) by_year[s.year] = &s;

    std::vector<int> present;
    for (int y : years) {
        if (by_year.count(y)) present.push_back(y);
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    if (present.empty()) {
        throw DataError("empty run: none of the requested years are present in the dataset");
    }

    PipelineResult result;
    for (int year : present) {
        const Snapshot& s = *by_year.at(year);
        try {
            const auto points = empirical_ccdf(s);
            const auto selection = select_window(points, config.window);
            const ParetoFit fit = fit_pareto(selection.points, selection.window);
            result.estimates.push_back(missing_mass(s, fit, config.cutoff, config.band));
        } catch (const Error& e) {
            result.failures.push_back({year, e.what()});
        }
    }
    return result;
}

}  // namespace sbindex
