#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sbindex {

/// One firm's asset observation. Assets are always stored in billions of USD.
struct FirmRecord {
    int year = 0;
    std::optional<int> rank;  // position in the source list, if given
    std::string name;
    std::string sector;   // empty = not reported
    std::string country;  // empty = not reported
    double assets = 0.0;  // billions of USD
};

/// All firms observed in one calendar year, in source row order.
struct Snapshot {
    int year = 0;
    std::vector<FirmRecord> records;

    std::size_t n() const { return records.size(); }
};

enum class AssetUnit { busd, musd };

AssetUnit asset_unit_from_name(const std::string& name);

struct RowDiagnostic {
    std::size_t line = 0;  // 1-based line number in the source, 0 = whole file
    std::string message;
};

struct ParseResult {
    std::vector<Snapshot> snapshots;  // one per distinct year, sorted by year
    std::vector<RowDiagnostic> diagnostics;
};

/// Parses the canonical CSV schema `year,rank,company,sector,country,assets`
/// (header row mandatory, extra columns ignored, rank/sector/country may be
/// empty). Malformed rows are skipped and reported in the diagnostics list,
/// never silently dropped. Asset values are converted to billions of USD.
ParseResult parse_dataset(std::istream& in, AssetUnit unit = AssetUnit::busd);
ParseResult parse_dataset_file(const std::filesystem::path& path, AssetUnit unit = AssetUnit::busd);

enum class IssueKind {
    nonpositive_assets,
    duplicate_name,
    sample_size_deviation,
};

struct ValidationIssue {
    IssueKind kind;
    std::string message;
};

/// Pure check; reports issues (non-positive assets, duplicate company names,
/// sample size away from the nominal 2000) without mutating or throwing.
std::vector<ValidationIssue> validate_snapshot(const Snapshot& snapshot);

/// Sum of all record assets in billions of USD. Summation runs in ascending
/// asset order so the result is independent of the input permutation.
double total_assets(const Snapshot& snapshot);

/// Canonical JSON persistence: `{year, n, records:[{name, assets, rank?,
/// sector?, country?}]}` per snapshot, one JSON array per run. Asset values
/// round-trip bit-exactly through the serialized decimal form.
nlohmann::json snapshot_to_json(const Snapshot& snapshot);
Snapshot snapshot_from_json(const nlohmann::json& j);
std::string snapshots_to_json_text(const std::vector<Snapshot>& snapshots);
std::vector<Snapshot> snapshots_from_json_text(const std::string& text);
std::vector<Snapshot> load_snapshots_file(const std::filesystem::path& path);

/// Writes the same CSV schema parse_dataset consumes (assets in billions).
void write_dataset_csv(std::ostream& out, const std::vector<Snapshot>& snapshots);

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

}  // namespace sbindex
