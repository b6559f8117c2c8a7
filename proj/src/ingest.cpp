#include "sbindex/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"

namespace sbindex {

namespace {

constexpr int kMinYear = 1900;
constexpr int kMaxYear = 2100;
constexpr std::size_t kNominalSampleSize = 2000;

// RFC-4180-ish field splitting: quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_int(const std::string& s, int& out) {
    const std::string t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && ptr == t.data() + t.size();
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

AssetUnit asset_unit_from_name(const std::string& name) {
    const std::string n = to_lower(trim(name));
    if (n == "busd") return AssetUnit::busd;
    if (n == "musd") return AssetUnit::musd;
    throw UsageError("unknown asset unit '" + name + "' (expected busd or musd)");
}

ParseResult parse_dataset(std::istream& in, AssetUnit unit) {
    if (!in) throw DataError("unreadable input stream");

    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw DataError("empty input: missing header row");
    }
    // Tolerate a UTF-8 BOM on the first line.
    if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_line.erase(0, 3);
    }

    std::unordered_map<std::string, std::size_t> column;
    {
        auto names = split_csv_line(header_line);
        for (std::size_t i = 0; i < names.size(); ++i) {
            column[to_lower(trim(names[i]))] = i;
        }
    }
    for (const char* required : {"year", "company", "assets"}) {
        if (!column.count(required)) {
            throw DataError(std::string("missing mandatory column '") + required + "'");
        }
    }
    const std::size_t col_year = column.at("year");
    const std::size_t col_company = column.at("company");
    const std::size_t col_assets = column.at("assets");
    const auto optional_col = [&](const char* name) -> std::optional<std::size_t> {
        auto it = column.find(name);
        if (it == column.end()) return std::nullopt;
        return it->second;
    };
    const auto col_rank = optional_col("rank");
    const auto col_sector = optional_col("sector");
    const auto col_country = optional_col("country");

    const double scale = (unit == AssetUnit::musd) ? 1.0 / 1000.0 : 1.0;

    ParseResult result;
    // Year -> position in result.snapshots, preserving row order within a year.
    std::map<int, std::size_t> year_index;

    std::string line;
    std::size_t line_no = 1;
    std::size_t data_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++data_rows;
        auto fields = split_csv_line(line);
        const auto get = [&](std::size_t idx) -> std::string {
            return idx < fields.size() ? trim(fields[idx]) : std::string{};
        };

        const auto diag = [&](const std::string& msg) {
            result.diagnostics.push_back({line_no, msg + " (row skipped)"});
        };

        FirmRecord rec;
        if (!parse_int(get(col_year), rec.year)) {
            diag("non-numeric year value '" + get(col_year) + "'");
            continue;
        }
        if (rec.year < kMinYear || rec.year > kMaxYear) {
            diag("year " + std::to_string(rec.year) + " outside [1900, 2100]");
            continue;
        }
        rec.name = get(col_company);
        if (rec.name.empty()) {
            diag("empty company name");
            continue;
        }
        double assets = 0.0;
        if (!parse_double(get(col_assets), assets)) {
            diag("non-numeric asset value '" + get(col_assets) + "'");
            continue;
        }
        if (assets < 0.0) {
            diag("negative asset value " + get(col_assets));
            continue;
        }
        rec.assets = assets * scale;
        if (col_rank) {
            const std::string raw = get(*col_rank);
            int rank = 0;
            if (!raw.empty() && parse_int(raw, rank) && rank > 0) rec.rank = rank;
        }
        if (col_sector) rec.sector = get(*col_sector);
        if (col_country) rec.country = get(*col_country);

        auto it = year_index.find(rec.year);
        if (it == year_index.end()) {
            it = year_index.emplace(rec.year, result.snapshots.size()).first;
            result.snapshots.push_back(Snapshot{rec.year, {}});
        }
        result.snapshots[it->second].records.push_back(std::move(rec));
    }

    if (data_rows == 0) {
        result.diagnostics.push_back({0, "0 data rows"});
    }

    std::sort(result.snapshots.begin(), result.snapshots.end(),
              [](const Snapshot& a, const Snapshot& b) { return a.year < b.year; });
    return result;
}

ParseResult parse_dataset_file(const std::filesystem::path& path, AssetUnit unit) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path.string());
    return parse_dataset(in, unit);
}

std::vector<ValidationIssue> validate_snapshot(const Snapshot& snapshot) {
    std::vector<ValidationIssue> issues;

    std::size_t nonpositive = 0;
    for (const auto& rec : snapshot.records) {
        if (!(rec.assets > 0.0)) ++nonpositive;
    }
    if (nonpositive > 0) {
        issues.push_back({IssueKind::nonpositive_assets,
                          std::to_string(nonpositive) + " non-positive asset value(s)"});
    }

    std::map<std::string, std::size_t> name_counts;
    for (const auto& rec : snapshot.records) ++name_counts[rec.name];
    for (const auto& [name, count] : name_counts) {
        if (count > 1) {
            issues.push_back({IssueKind::duplicate_name,
                              "duplicate company name '" + name + "' (appears " +
                                  std::to_string(count) + " times)"});
        }
    }

    const auto n = snapshot.n();
    if (n != kNominalSampleSize) {
        const std::size_t dev = n > kNominalSampleSize ? n - kNominalSampleSize : kNominalSampleSize - n;
        issues.push_back({IssueKind::sample_size_deviation,
                          "n deviates from 2000 by " + std::to_string(dev)});
    }
    return issues;
}

double total_assets(const Snapshot& snapshot) {
    std::vector<double> values;
    values.reserve(snapshot.records.size());
    for (const auto& rec : snapshot.records) values.push_back(rec.assets);
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw NumericError("double formatting failed");
    return std::string(buf, ptr);
}

nlohmann::json snapshot_to_json(const Snapshot& snapshot) {
    nlohmann::json j;
    j["year"] = snapshot.year;
    j["n"] = snapshot.n();
    auto& records = j["records"] = nlohmann::json::array();
    for (const auto& rec : snapshot.records) {
        nlohmann::json r;
        r["name"] = rec.name;
        r["assets"] = rec.assets;
        if (rec.rank) r["rank"] = *rec.rank;
        if (!rec.sector.empty()) r["sector"] = rec.sector;
        if (!rec.country.empty()) r["country"] = rec.country;
        records.push_back(std::move(r));
    }
    return j;
}

Snapshot snapshot_from_json(const nlohmann::json& j) {
    Snapshot s;
    try {
        s.year = j.at("year").get<int>();
        const auto n = j.at("n").get<std::size_t>();
        for (const auto& r : j.at("records")) {
            FirmRecord rec;
            rec.year = s.year;
            rec.name = r.at("name").get<std::string>();
            rec.assets = r.at("assets").get<double>();
            if (r.contains("rank")) rec.rank = r.at("rank").get<int>();
            if (r.contains("sector")) rec.sector = r.at("sector").get<std::string>();
            if (r.contains("country")) rec.country = r.at("country").get<std::string>();
            s.records.push_back(std::move(rec));
        }
        if (n != s.records.size()) {
            throw DataError("snapshot n=" + std::to_string(n) + " does not match record count " +
                            std::to_string(s.records.size()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed snapshot JSON: ") + e.what());
    }
    return s;
}

std::string snapshots_to_json_text(const std::vector<Snapshot>& snapshots) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& s : snapshots) doc.push_back(snapshot_to_json(s));
    return doc.dump(2) + "\n";
}

std::vector<Snapshot> snapshots_from_json_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed snapshots JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("snapshots JSON: expected a top-level array");
    std::vector<Snapshot> snapshots;
    for (const auto& j : doc) snapshots.push_back(snapshot_from_json(j));
    return snapshots;
}

std::vector<Snapshot> load_snapshots_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open snapshots file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return snapshots_from_json_text(buf.str());
}

void write_dataset_csv(std::ostream& out, const std::vector<Snapshot>& snapshots) {
    out << "year,rank,company,sector,country,assets\n";
    for (const auto& s : snapshots) {
        for (const auto& rec : s.records) {
            out << rec.year << ',';
            if (rec.rank) out << *rec.rank;
            out << ',' << csv_escape(rec.name) << ',' << csv_escape(rec.sector) << ','
                << csv_escape(rec.country) << ',' << format_double(rec.assets) << '\n';
        }
    }
}

}  // namespace sbindex
