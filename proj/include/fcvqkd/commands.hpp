#pragma once

#include "fcvqkd/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fcvqkd {

/// Writes run.csv, run.json and truth.csv into cfg.out.
void cmd_simulate(const ScenarioConfig& cfg, std::ostream& log);

struct EstimateInputs {
    std::filesystem::path run_csv;                 // defaults to <out>/run.csv
    std::optional<std::filesystem::path> sidecar;  // defaults to run_csv with .json
    std::optional<std::filesystem::path> truth;    // defaults to <out>/truth.csv unless blind
};

/// Writes estimates.csv, aggregate.json and, with a truth file,
/// residuals.csv. Physical parameters come from the run sidecar; the
/// confidence settings come from the active configuration.
void cmd_estimate(const ScenarioConfig& cfg, const EstimateInputs& in, std::ostream& log);

/// Key rate of the configured cluster edges (pooled when none are given),
/// analytically or on a freshly simulated run. Writes keyrate.json.
void cmd_keyrate(const ScenarioConfig& cfg, std::ostream& log);

/// Optimized plans for C = 0 .. clusters_max. Writes optimize.json and
/// optimize.csv.
void cmd_optimize(const ScenarioConfig& cfg, std::ostream& log);

/// Figure ids accepted by cmd_reproduce.
const std::vector<std::string>& figure_ids();

/// Writes <figure>.csv (and fig8.json for the cluster layouts).
void cmd_reproduce(const ScenarioConfig& cfg, const std::string& figure, std::ostream& log);

/// Loads a `T` trace and writes an empirical distribution descriptor.
void cmd_ingest(const ScenarioConfig& cfg, const std::filesystem::path& trace, std::ostream& log);

}  // namespace fcvqkd
