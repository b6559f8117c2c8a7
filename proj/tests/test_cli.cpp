#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sbindex/ingest.hpp"
#include "sbindex/synth.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = SBINDEX_CLI_PATH;

int run_cli(const std::string& args, const fs::path& dir, std::string* out = nullptr,
            std::string* err = nullptr) {
    const fs::path out_path = dir / "stdout.txt";
    const fs::path err_path = dir / "stderr.txt";
    const std::string cmd =
        kCli + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    if (out) *out = oracles::read_file(out_path);
    if (err) *err = oracles::read_file(err_path);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli: synth -> ingest -> fit -> mass round trip") {
    oracles::TempDir tmp;
    const auto csv = (tmp.path() / "d.csv").string();
    const auto snaps = (tmp.path() / "snaps.json").string();

    CHECK(run_cli("synth --mode capped --n 2000 --b 0.9 --xmin 1 --cap 3000 --seed 42"
                  " --year 2015 --out " + csv,
                  tmp.path()) == 0);
    CHECK(fs::exists(csv));
    CHECK(fs::exists(csv + ".truth.json"));
    {
        const auto truth = nlohmann::json::parse(oracles::read_file(csv + ".truth.json"));
        CHECK(truth["mode"] == "censor");
        CHECK(truth["seed"] == 42);
        CHECK(truth["removed_assets"].get<double>() > 0.0);
    }

    CHECK(run_cli("ingest --input " + csv + " --out " + snaps, tmp.path()) == 0);
    CHECK(fs::exists(snaps));

    std::string out;
    CHECK(run_cli("fit --snapshots " + snaps + " --year 2015 --window quantile:0.05:0.5",
                  tmp.path(), &out) == 0);
    const auto fit = nlohmann::json::parse(out);
    CHECK(fit["year"] == 2015);
    CHECK(fit["b"].get<double>() > 0.8);
    CHECK(fit["b"].get<double>() < 1.0);
    CHECK(fit["n_fit"].get<int>() >= 10);

    CHECK(run_cli("mass --snapshots " + snaps + " --year 2015 --window quantile:0.05:0.5"
                  " --cutoff auto --band corners",
                  tmp.path(), &out) == 0);
    const auto est = nlohmann::json::parse(out);
    CHECK(est["i_sb"].get<double>() > 0.0);
    CHECK(est["cutoff_rule"] == "auto");
}

TEST_CASE("cli: unit flag rescales the canonical values") {
    oracles::TempDir tmp;
    const auto csv = tmp.path() / "m.csv";
    oracles::write_file(csv, "year,rank,company,sector,country,assets\n2014,1,A,,,1500\n");

    const auto sb = (tmp.path() / "b.json").string();
    const auto sm = (tmp.path() / "m.json").string();
    CHECK(run_cli("ingest --input " + csv.string() + " --out " + sb, tmp.path()) == 0);
    CHECK(run_cli("ingest --input " + csv.string() + " --unit musd --out " + sm, tmp.path()) == 0);

    const auto b = sbindex::load_snapshots_file(sb);
    const auto m = sbindex::load_snapshots_file(sm);
    CHECK(b[0].records[0].assets == 1500.0);
    CHECK(m[0].records[0].assets == 1.5);

    SUBCASE("SBINDEX_UNIT env var sets the default unit") {
        const auto se = (tmp.path() / "e.json").string();
        const std::string cmd = "SBINDEX_UNIT=musd " + kCli + " ingest --input " + csv.string() +
                                " --out " + se + " > /dev/null 2>&1";
        REQUIRE(std::system(cmd.c_str()) == 0);
        const auto e = sbindex::load_snapshots_file(se);
        CHECK(e[0].records[0].assets == 1.5);
    }
}

TEST_CASE("cli: pipeline writes table, plots and overlay series") {
    oracles::TempDir tmp;
    std::string csv_text;
    {
        std::vector<sbindex::Snapshot> snapshots;
        for (int year : {2013, 2014, 2015}) {
            sbindex::SynthConfig cfg;
            cfg.n = 2000;
            cfg.b = 0.9;
            cfg.cap = 3000.0;
            cfg.seed = sbindex::replicate_seed(900, static_cast<std::uint64_t>(year));
            cfg.year = year;
            snapshots.push_back(sbindex::capped_pareto_sample(cfg).snapshot);
        }
        std::ostringstream os;
        sbindex::write_dataset_csv(os, snapshots);
        csv_text = os.str();
    }
    const auto csv = tmp.path() / "three.csv";
    oracles::write_file(csv, csv_text);
    const auto overlay = tmp.path() / "fsb.csv";
    oracles::write_file(overlay,
                        "year,value_tusd,label\n2013,25.0,FSB\n2014,27.5,FSB\n2015,30.2,FSB\n");

    const auto table = tmp.path() / "table.csv";
    const auto plots = tmp.path() / "plots";
    CHECK(run_cli("pipeline --input " + csv.string() + " --years 2013:2015" +
                  " --window quantile:0.05:0.5 --out-table " + table.string() + " --plots " +
                  plots.string() + " --overlay " + overlay.string(),
                  tmp.path()) == 0);

    CHECK(fs::exists(table));
    for (const char* name : {"ccdf_2013.csv", "ccdf_fit_2013.csv", "ccdf_2013.svg",
                             "ccdf_2015.svg", "isb_timeseries.csv", "isb_timeseries.svg",
                             "overlay.csv"}) {
        CHECK_MESSAGE(fs::exists(plots / name), "missing ", name);
    }
    const auto table_text = oracles::read_file(table);
    CHECK(std::count(table_text.begin(), table_text.end(), '\n') == 4);  // header + 3 rows

    SUBCASE("second run is byte-identical") {
        const auto table2 = tmp.path() / "table2.csv";
        const auto plots2 = tmp.path() / "plots2";
        CHECK(run_cli("pipeline --input " + csv.string() + " --years 2013:2015" +
                      " --window quantile:0.05:0.5 --out-table " + table2.string() + " --plots " +
                      plots2.string() + " --overlay " + overlay.string(),
                      tmp.path()) == 0);
        CHECK(oracles::read_file(table2) == table_text);
        CHECK(oracles::read_file(plots2 / "isb_timeseries.svg") ==
              oracles::read_file(plots / "isb_timeseries.svg"));
        CHECK(oracles::read_file(plots2 / "ccdf_2014.csv") ==
              oracles::read_file(plots / "ccdf_2014.csv"));
    }
}

TEST_CASE("cli: exit codes") {
    oracles::TempDir tmp;

    SUBCASE("usage errors exit 1") {
        CHECK(run_cli("", tmp.path()) == 1);                       // missing subcommand
        CHECK(run_cli("fit --year 2015", tmp.path()) == 1);        // missing required flag
        std::string err;
        const auto csv = tmp.path() / "one.csv";
        oracles::write_file(csv, "year,rank,company,sector,country,assets\n2014,1,A,,,10\n");
        const auto snaps = (tmp.path() / "s.json").string();
        CHECK(run_cli("ingest --input " + csv.string() + " --out " + snaps, tmp.path()) == 0);
        CHECK(run_cli("mass --snapshots " + snaps + " --year 2014 --band oval", tmp.path(),
                      nullptr, &err) == 1);
        CHECK(err.find("band") != std::string::npos);
    }
    SUBCASE("data errors exit 2") {
        CHECK(run_cli("ingest --input /nonexistent.csv --out " + (tmp.path() / "x").string(),
                      tmp.path()) == 2);
        const auto csv = tmp.path() / "one.csv";
        oracles::write_file(csv, "year,rank,company,sector,country,assets\n2014,1,A,,,10\n");
        const auto snaps = (tmp.path() / "s.json").string();
        CHECK(run_cli("ingest --input " + csv.string() + " --out " + snaps, tmp.path()) == 0);
        // Requested year absent.
        CHECK(run_cli("fit --snapshots " + snaps + " --year 1999", tmp.path()) == 2);
        // Window too small for the single-point CCDF.
        CHECK(run_cli("fit --snapshots " + snaps + " --year 2014", tmp.path()) == 2);
    }
    SUBCASE("numerical failures exit 3") {
        // A nearly flat in-window CCDF: almost all mass sits above the
        // window, the fitted exponent comes out tiny and the extrapolation
        // cutoff overflows.
        std::string csv_text = "year,rank,company,sector,country,assets\n";
        int id = 0;
        auto add = [&](double assets, int count) {
            for (int i = 0; i < count; ++i) {
                csv_text += "2014,,n" + std::to_string(id++) + ",,," +
                            sbindex::format_double(assets) + "\n";
            }
        };
        for (int k = 0; k < 12; ++k) {
            add(50.0 * std::pow(20.0, k / 11.0), 1);  // 12 singles spanning the window
        }
        add(2000.0, 2000);  // bulk above the window
        const auto csv = tmp.path() / "flat.csv";
        oracles::write_file(csv, csv_text);
        const auto snaps = (tmp.path() / "f.json").string();
        REQUIRE(run_cli("ingest --input " + csv.string() + " --out " + snaps, tmp.path()) == 0);
        std::string err;
        const int code = run_cli("mass --snapshots " + snaps + " --year 2014", tmp.path(),
                                 nullptr, &err);
        CHECK(code == 3);
        CHECK(err.find("overflow") != std::string::npos);
    }
}
