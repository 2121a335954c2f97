#pragma once

#include "fcvqkd/channel.hpp"
#include "fcvqkd/clustering.hpp"
#include "fcvqkd/distributions.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fcvqkd {

enum class EvaluationMode { analytic, monte_carlo };

/// Everything a command needs; a run is reproducible from this and the seed.
struct ScenarioConfig {
    TransmittanceDistribution distribution = TransmittanceDistribution::truncated_normal(0.5, 0.1);
    // Law used to score a plan when it differs from the planning law.
    std::optional<TransmittanceDistribution> evaluation_distribution;
    ProtocolParams protocol;
    std::size_t n = 1000;
    std::size_t m = 1000;
    std::size_t clusters_max = 3;
    std::vector<double> edges;  // explicit cluster edges for `keyrate`
    std::uint64_t seed = 1;
    std::filesystem::path out = "out";
    bool paper_scale = false;
    bool blind = false;  // estimate without reading the true-T file
    EvaluationMode mode = EvaluationMode::analytic;
    OptimizerSettings optimizer;
};

/// Command-line values; unset fields leave the configuration alone.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<double> z_conf;
    std::optional<std::size_t> clusters;
    bool paper_scale = false;
};

ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
nlohmann::json to_json(const ScenarioConfig& cfg);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads FADING_CVQKD_SEED, _OUT, _Z_CONF and _CLUSTERS.
void apply_environment(ScenarioConfig& cfg, const EnvLookup& env);
void apply_overrides(ScenarioConfig& cfg, const Overrides& flags);

/// Large-scale package counts (n = m = 10^4).
void apply_paper_scale(ScenarioConfig& cfg);

/// Defaults, then the file (if any), then the environment, then the flags.
ScenarioConfig load_scenario(const std::optional<std::filesystem::path>& file, const Overrides& flags,
                             const EnvLookup& env);

/// Process-environment lookup.
std::optional<std::string> process_env(const std::string& name);

}  // namespace fcvqkd
