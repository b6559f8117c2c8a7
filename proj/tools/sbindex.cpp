// sbindex: fit Pareto tails to yearly firm-asset snapshots, compute the
// missing-mass index with confidence bands, and emit tables and figures.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"
#include "sbindex/ingest.hpp"
#include "sbindex/missingmass.hpp"
#include "sbindex/report.hpp"
#include "sbindex/synth.hpp"
#include "sbindex/tailfit.hpp"

namespace fs = std::filesystem;
using namespace sbindex;

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path.string());
    out << content;
    if (!out) throw DataError("failed writing output file: " + path.string());
}

AssetUnit unit_from_flag_or_env(const std::string& flag) {
    if (!flag.empty()) return asset_unit_from_name(flag);
    if (const char* env = std::getenv("SBINDEX_UNIT")) return asset_unit_from_name(env);
    return AssetUnit::busd;
}

std::vector<int> parse_years_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    try {
        if (colon == std::string::npos) {
            return {std::stoi(spec)};
        }
        const int lo = std::stoi(spec.substr(0, colon));
        const int hi = std::stoi(spec.substr(colon + 1));
        if (hi < lo) throw UsageError("year range '" + spec + "' runs backwards");
        std::vector<int> years;
        for (int y = lo; y <= hi; ++y) years.push_back(y);
        return years;
    } catch (const std::invalid_argument&) {
        throw UsageError("bad years spec '" + spec + "' (expected Y or Y1:Y2)");
    } catch (const std::out_of_range&) {
        throw UsageError("years out of range: " + spec);
    }
}

const Snapshot& find_year(const std::vector<Snapshot>& snapshots, int year) {
    for (const auto& s : snapshots) {
        if (s.year == year) return s;
    }
    throw DataError("year " + std::to_string(year) + " not present in the snapshot file");
}

ParetoFit fit_snapshot(const Snapshot& snapshot, const FitWindow& window) {
    std::size_t excluded = 0;
    const auto points = empirical_ccdf(snapshot, &excluded);
    if (excluded > 0) {
        std::cerr << "diagnostic: year " << snapshot.year << ": excluded " << excluded
                  << " non-positive asset record(s) from the CCDF\n";
    }
    const auto selection = select_window(points, window);
    return fit_pareto(selection.points, selection.window);
}

void report_diagnostics(const ParseResult& parsed) {
    for (const auto& d : parsed.diagnostics) {
        if (d.line > 0) {
            std::cerr << "diagnostic: line " << d.line << ": " << d.message << "\n";
        } else {
            std::cerr << "diagnostic: " << d.message << "\n";
        }
    }
}

int run_ingest(const std::string& input, const std::string& unit_flag, const std::string& out) {
    const auto parsed = parse_dataset_file(input, unit_from_flag_or_env(unit_flag));
    report_diagnostics(parsed);
    write_text_file(out, snapshots_to_json_text(parsed.snapshots));
    for (const auto& s : parsed.snapshots) {
        for (const auto& issue : validate_snapshot(s)) {
            std::cerr << "validation " << s.year << ": " << issue.message << "\n";
        }
    }
    std::cerr << "wrote " << parsed.snapshots.size() << " snapshot(s) to " << out << "\n";
    return 0;
}

int run_fit(const std::string& snapshots_path, int year, const std::string& window_spec) {
    const FitWindow window = parse_window_spec(window_spec);
    const auto snapshots = load_snapshots_file(snapshots_path);
    const Snapshot& s = find_year(snapshots, year);
    const ParetoFit fit = fit_snapshot(s, window);
    std::cout << fit_to_json(year, fit).dump(2) << "\n";
    return 0;
}

int run_mass(const std::string& snapshots_path, int year, const std::string& window_spec,
             const std::string& cutoff_spec, const std::string& band_spec) {
    // Flag specs are validated before any data work so bad usage exits 1.
    const FitWindow window = parse_window_spec(window_spec);
    const CutoffRule cutoff = parse_cutoff_spec(cutoff_spec);
    const BandRule band = parse_band_spec(band_spec);
    const auto snapshots = load_snapshots_file(snapshots_path);
    const Snapshot& s = find_year(snapshots, year);
    const ParetoFit fit = fit_snapshot(s, window);
    const auto estimate = missing_mass(s, fit, cutoff, band);
    std::cout << estimate_to_json(estimate).dump(2) << "\n";
    return 0;
}

int run_pipeline_cmd(const std::string& input, const std::string& unit_flag,
                     const std::string& years_spec, const std::string& window_spec,
                     const std::string& cutoff_spec, const std::string& band_spec,
                     const std::string& out_table, const std::string& plots_dir,
                     const std::string& overlay_path) {
    PipelineConfig config;
    config.window = parse_window_spec(window_spec);
    config.cutoff = parse_cutoff_spec(cutoff_spec);
    config.band = parse_band_spec(band_spec);
    const auto years = parse_years_spec(years_spec);

    const auto parsed = parse_dataset_file(input, unit_from_flag_or_env(unit_flag));
    report_diagnostics(parsed);

    const auto result = run_pipeline(parsed.snapshots, years, config);
    for (const auto& f : result.failures) {
        std::cerr << "year " << f.year << " failed: " << f.message << "\n";
    }
    if (result.estimates.empty()) {
        throw DataError("all requested years failed; no table to emit");
    }

    std::vector<TableRow> rows;
    rows.reserve(result.estimates.size());
    for (const auto& e : result.estimates) rows.push_back(build_table_row(e));

    const fs::path table_path(out_table);
    std::string ext = table_path.extension().string();
    if (!ext.empty() && ext.front() == '.') ext.erase(0, 1);
    write_text_file(table_path, emit_table(rows, table_format_from_name(ext)));

    if (!plots_dir.empty()) {
        const fs::path dir(plots_dir);
        fs::create_directories(dir);

        for (const auto& e : result.estimates) {
            const Snapshot& s = find_year(parsed.snapshots, e.year);
            const std::string year = std::to_string(e.year);
            write_text_file(dir / ("ccdf_" + year + ".csv"),
                            plot_series_csv(ccdf_points_series(s)));
            write_text_file(dir / ("ccdf_fit_" + year + ".csv"),
                            plot_series_csv(ccdf_fitline_series(s, e.fit)));
            write_text_file(dir / ("ccdf_" + year + ".svg"), ccdf_chart_svg(s, e.fit));
        }

        const PlotSeries isb = isb_timeseries(rows);
        std::vector<PlotSeries> overlays;
        if (!overlay_path.empty()) {
            overlays.push_back(load_overlay_file(overlay_path));
            write_text_file(dir / "overlay.csv", plot_series_csv(overlays.back()));
        }
        write_text_file(dir / "isb_timeseries.csv", plot_series_csv(isb));
        write_text_file(dir / "isb_timeseries.svg", timeseries_chart_svg(isb, overlays));
    }

    std::cerr << "wrote " << rows.size() << " row(s) to " << out_table << "\n";
    return 0;
}

int run_synth(const std::string& mode, std::size_t n, double b, double x_min,
              std::optional<double> cap, const std::string& cap_mode, std::size_t steps,
              double vol, double barrier, std::uint64_t seed, int year, const std::string& out) {
    SynthConfig cfg;
    cfg.n = n;
    cfg.b = b;
    cfg.x_min = x_min;
    cfg.seed = seed;
    cfg.year = year;

    Snapshot snapshot;
    nlohmann::json truth;
    truth["seed"] = seed;
    truth["b"] = b;
    truth["x_min"] = x_min;
    truth["cap"] = nullptr;
    truth["removed_assets"] = 0.0;

    if (mode == "pareto") {
        if (cap) throw UsageError("--cap requires --mode capped");
        truth["mode"] = "iid-pareto";
        snapshot = pareto_sample(cfg);
    } else if (mode == "capped") {
        if (!cap) throw UsageError("capped mode requires --cap");
        cfg.cap = cap;
        if (cap_mode == "censor") cfg.cap_mode = CapMode::censor;
        else if (cap_mode == "truncate") cfg.cap_mode = CapMode::truncate;
        else throw UsageError("unknown cap mode '" + cap_mode + "'");
        const auto sample = capped_pareto_sample(cfg);
        snapshot = sample.snapshot;
        truth = ground_truth_to_json(sample.truth);
    } else if (mode == "gibrat") {
        cfg.mode = SynthMode::gibrat;
        truth["mode"] = "gibrat";
        snapshot = gibrat_simulate(cfg, steps, vol, barrier);
    } else {
        throw UsageError("unknown synth mode '" + mode + "' (expected pareto, capped or gibrat)");
    }

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw DataError("cannot open output file: " + out);
    write_dataset_csv(csv, {snapshot});
    write_text_file(out + ".truth.json", truth.dump(2) + "\n");
    std::cerr << "wrote " << snapshot.n() << " firms to " << out << "\n";
    return 0;
}

}  // namespace

namespace {

int cli_main(int argc, char** argv) {
    CLI::App app{"Pareto tail fitting and missing-mass index toolkit"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse a CSV dataset into canonical snapshots");
    std::string in_input, in_unit, in_out;
    ingest->add_option("--input", in_input, "input CSV file")->required();
    ingest->add_option("--unit", in_unit, "asset unit of the input: busd|musd (default busd)");
    ingest->add_option("--out", in_out, "output snapshots JSON")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit the Pareto tail for one year");
    std::string f_snapshots, f_window = "assets:50:1000";
    int f_year = 0;
    fit->add_option("--snapshots", f_snapshots, "snapshots JSON file")->required();
    fit->add_option("--year", f_year, "year to fit")->required();
    fit->add_option("--window", f_window, "fit window: assets:LO:HI | quantile:LO:HI | auto");

    // mass
    auto* mass = app.add_subcommand("mass", "Missing-mass estimate for one year");
    std::string m_snapshots, m_window = "assets:50:1000", m_cutoff = "auto", m_band = "corners";
    int m_year = 0;
    mass->add_option("--snapshots", m_snapshots, "snapshots JSON file")->required();
    mass->add_option("--year", m_year, "year to estimate")->required();
    mass->add_option("--window", m_window, "fit window: assets:LO:HI | quantile:LO:HI | auto");
    mass->add_option("--cutoff", m_cutoff, "lower cutoff: auto or a value in $B");
    mass->add_option("--band", m_band, "confidence band rule (corners)");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Full per-year pipeline with table and plot output");
    std::string p_input, p_unit, p_years, p_window = "assets:50:1000", p_cutoff = "auto",
                p_band = "corners", p_out_table, p_plots, p_overlay;
    pipe->add_option("--input", p_input, "input CSV file")->required();
    pipe->add_option("--unit", p_unit, "asset unit of the input: busd|musd (default busd)");
    pipe->add_option("--years", p_years, "year or inclusive range Y1:Y2")->required();
    pipe->add_option("--window", p_window, "fit window: assets:LO:HI | quantile:LO:HI | auto");
    pipe->add_option("--cutoff", p_cutoff, "lower cutoff: auto or a value in $B");
    pipe->add_option("--band", p_band, "confidence band rule (corners)");
    pipe->add_option("--out-table", p_out_table, "table output (.csv | .json | .md)")->required();
    pipe->add_option("--plots", p_plots, "directory for plot data and SVG output");
    pipe->add_option("--overlay", p_overlay, "external comparison series (year,value_tusd,label)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic datasets with known ground truth");
    std::string s_mode, s_cap_mode = "censor", s_out;
    std::size_t s_n = 2000, s_steps = 0;
    double s_b = 0.9, s_xmin = 1.0, s_vol = 0.0, s_barrier = 1.0;
    std::optional<double> s_cap;
    std::uint64_t s_seed = 0;
    int s_year = 2015;
    synth->add_option("--mode", s_mode, "pareto | capped | gibrat")->required();
    synth->add_option("--n", s_n, "sample size");
    synth->add_option("--b", s_b, "true tail exponent");
    synth->add_option("--xmin", s_xmin, "lower support ($B)");
    synth->add_option("--cap", s_cap, "hard ceiling ($B), capped mode");
    synth->add_option("--cap-mode", s_cap_mode, "censor | truncate");
    synth->add_option("--steps", s_steps, "gibrat steps");
    synth->add_option("--vol", s_vol, "gibrat log-volatility per step");
    synth->add_option("--barrier", s_barrier, "gibrat reflecting lower barrier ($B)");
    synth->add_option("--seed", s_seed, "generator seed")->required();
    synth->add_option("--year", s_year, "calendar year stamped on the output");
    synth->add_option("--out", s_out, "output CSV (ground truth goes to <out>.truth.json)")
        ->required();

    try {
        app.parse(argc, argv);
        if (*ingest) return run_ingest(in_input, in_unit, in_out);
        if (*fit) return run_fit(f_snapshots, f_year, f_window);
        if (*mass) return run_mass(m_snapshots, m_year, m_window, m_cutoff, m_band);
        if (*pipe) {
            return run_pipeline_cmd(p_input, p_unit, p_years, p_window, p_cutoff, p_band,
                                    p_out_table, p_plots, p_overlay);
        }
        if (*synth) {
            return run_synth(s_mode, s_n, s_b, s_xmin, s_cap, s_cap_mode, s_steps, s_vol,
                             s_barrier, s_seed, s_year, s_out);
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return cli_main(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
