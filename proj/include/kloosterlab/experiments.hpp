#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kloosterlab/common.hpp"

namespace kloosterlab {

// Report files carry this in their first line; bump on any column change.
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Configs

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& origin, int line, const std::string& field, const std::string& message);
    int line() const { return line_; }  // 0 when unknown
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

struct ExperimentConfig {
    std::string experiment;
    u64 seed = 1;
    double eps_power = 2.0;
    std::string output;     // default output directory, may be empty
    nlohmann::json params;  // "quick" overrides already merged when quick
    bool quick = false;
    std::string origin;  // file name for diagnostics
    std::string text;    // source, for line lookups
};

const std::vector<std::string>& experiment_names();

// JSON with // comments allowed. Top-level keys: experiment, seed,
// eps_power, output, description, params, quick. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& origin, bool quick);
ExperimentConfig load_config(const std::string& path, bool quick);

// ---------------------------------------------------------------------------
// Report tables

using Cell = std::variant<i64, double, std::string>;

struct ReportTable {
    std::string experiment;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);  // throws std::logic_error on a width mismatch
};

// Integers in decimal, doubles with 12 significant digits (%.12g).
std::string format_cell(const Cell& c);

// CSV: "# kloosterlab-report v<N> <experiment>", then the column row, then
// one line per row. JSONL: a header object, then one object per row whose
// values are the CSV tokens (numbers bare, nan/inf and strings quoted).
void write_csv(const ReportTable& t, std::ostream& out);
void write_jsonl(const ReportTable& t, std::ostream& out);
// Inverse of the writers; throws std::runtime_error on malformed input.
ReportTable read_csv(std::istream& in);
ReportTable read_jsonl(std::istream& in);

// ---------------------------------------------------------------------------
// Running

struct RunResult {
    ReportTable table;
    // (family, ratio) for every bound calibration; never gates the exit status
    std::vector<std::pair<std::string, double>> ratios;
    // hard invariants (identities, equality audits) that failed
    std::vector<std::string> failures;
    nlohmann::json notes = nlohmann::json::object();
};

// Throws ConfigError for bad parameter values (unknown keys included).
RunResult run_experiment(const ExperimentConfig& cfg);

// max and median ratio per family, failure count, notes.
nlohmann::json summarize(const ExperimentConfig& cfg, const RunResult& r);

// Writes <dir>/<experiment>.csv, .jsonl and summary.json.
void write_artifacts(const ExperimentConfig& cfg, const RunResult& r, const std::string& dir);

} // namespace kloosterlab
