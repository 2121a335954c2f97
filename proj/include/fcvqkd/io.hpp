#pragma once

#include "fcvqkd/channel.hpp"
#include "fcvqkd/clustering.hpp"
#include "fcvqkd/distributions.hpp"
#include "fcvqkd/estimation.hpp"
#include "fcvqkd/security.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fcvqkd::io {

using nlohmann::json;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

/// CSV table with a mandatory header; fields are quoted when needed.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_string() const;
};

/// Parses CSV text. The first record is the header; every other record must
/// have as many fields. Errors carry 1-based line numbers.
CsvTable parse_csv(const std::string& text, const std::string& source = "csv");

/// Index of `name` in the header, or ValidationError naming the column.
std::size_t column(const CsvTable& table, const std::string& name, const std::string& source = "csv");

/// Parses a numeric field; `line` is only used in the error message.
double parse_number(const std::string& field, std::size_t line, const std::string& source);

std::string read_file(const std::filesystem::path& path);

/// Writes the file in one go, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

// Runs ------------------------------------------------------------------

CsvTable run_table(const Run& run);
CsvTable truth_table(const Run& run);
json run_sidecar(const Run& run);

/// Rebuilds a run from its pair table and sidecar. The truth values are
/// optional; without them every package has true_T = NaN.
Run load_run(const CsvTable& pairs, const json& sidecar, const std::string& source = "run.csv");

std::vector<double> load_truth(const CsvTable& table, std::size_t m, const std::string& source = "truth.csv");

// Estimates -------------------------------------------------------------

CsvTable estimates_table(const std::vector<PackageEstimate>& estimates);
std::vector<PackageEstimate> load_estimates(const CsvTable& table, const std::string& source = "estimates.csv");

// Traces ----------------------------------------------------------------

/// Transmittance trace with a `T` column, values in [0, 1].
std::vector<double> load_trace(const CsvTable& table, const std::string& source = "trace.csv");

// JSON ------------------------------------------------------------------

json to_json(const ProtocolParams& p);
/// Reads the fields present in `j` over `base`. `z_conf` may be the string
/// "auto", which derives z from eps_PE.
ProtocolParams protocol_from_json(const json& j, ProtocolParams base = {});

json to_json(const TransmittanceDistribution& dist);
/// `base_dir` resolves a relative `path` of an empirical descriptor.
TransmittanceDistribution distribution_from_json(const json& j, const std::filesystem::path& base_dir = ".");

json to_json(const Moments& mo);
json to_json(const FluctuationEstimate& f);
json to_json(const AggregateStats& s);
json to_json(const WorstCaseChannel& wc);
json to_json(const KeyRateReport& k);
json to_json(const ClusterReport& c);
json to_json(const ClusterPlan& plan);

std::string dump(const json& j);

}  // namespace fcvqkd::io
