#include "fcvqkd/config.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/io.hpp"

#include <charconv>
#include <cstdlib>

namespace fcvqkd {

using nlohmann::json;

namespace {

std::uint64_t parse_u64(const std::string& text, const std::string& what)
{
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ValidationError(what + ": '" + text + "' is not an unsigned integer");
    return v;
}

double parse_real(const std::string& text, const std::string& what)
{
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ValidationError(what + ": '" + text + "' is not a number");
    return v;
}

std::vector<double> edges_from_json(const json& j)
{
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (e.is_null())
            out.push_back(i == 0 ? -unbounded : unbounded);
        else
            out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace

ScenarioConfig config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    ScenarioConfig cfg;
    try {
        if (!j.is_object())
            throw ValidationError("config: expected a JSON object");
        if (j.contains("distribution"))
            cfg.distribution = io::distribution_from_json(j.at("distribution"), base_dir);
        if (j.contains("evaluation_distribution"))
            cfg.evaluation_distribution = io::distribution_from_json(j.at("evaluation_distribution"), base_dir);
        if (j.contains("protocol"))
            cfg.protocol = io::protocol_from_json(j.at("protocol"));
        cfg.n = j.value("n", cfg.n);
        cfg.m = j.value("m", cfg.m);
        cfg.clusters_max = j.value("clusters_max", cfg.clusters_max);
        if (j.contains("edges"))
            cfg.edges = edges_from_json(j.at("edges"));
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("out"))
            cfg.out = j.at("out").get<std::string>();
        cfg.blind = j.value("blind", cfg.blind);
        if (j.contains("mode")) {
            const auto mode = j.at("mode").get<std::string>();
            if (mode == "analytic")
                cfg.mode = EvaluationMode::analytic;
            else if (mode == "monte_carlo")
                cfg.mode = EvaluationMode::monte_carlo;
            else
                throw ValidationError("config: mode must be \"analytic\" or \"monte_carlo\"");
        }
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            auto& s = cfg.optimizer;
            s.r_min = o.value("r_min", s.r_min);
            s.r_max = o.value("r_max", s.r_max);
            s.V_min = o.value("V_min", s.V_min);
            s.V_max = o.value("V_max", s.V_max);
            s.grid_points = o.value("grid_points", s.grid_points);
            s.quantile_levels = o.value("quantile_levels", s.quantile_levels);
            s.refine_passes = o.value("refine_passes", s.refine_passes);
            s.panels = o.value("panels", s.panels);
            s.min_mass = o.value("min_mass", s.min_mass);
        }
        if (j.value("paper_scale", false))
            apply_paper_scale(cfg);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return cfg;
}

json to_json(const ScenarioConfig& cfg)
{
    json j{{"distribution", io::to_json(cfg.distribution)},
           {"protocol", io::to_json(cfg.protocol)},
           {"n", cfg.n},
           {"m", cfg.m},
           {"clusters_max", cfg.clusters_max},
           {"seed", cfg.seed},
           {"out", cfg.out.string()},
           {"paper_scale", cfg.paper_scale},
           {"blind", cfg.blind},
           {"mode", cfg.mode == EvaluationMode::analytic ? "analytic" : "monte_carlo"},
           {"optimizer",
            {{"r_min", cfg.optimizer.r_min},
             {"r_max", cfg.optimizer.r_max},
             {"V_min", cfg.optimizer.V_min},
             {"V_max", cfg.optimizer.V_max},
             {"grid_points", cfg.optimizer.grid_points},
             {"quantile_levels", cfg.optimizer.quantile_levels},
             {"refine_passes", cfg.optimizer.refine_passes},
             {"panels", cfg.optimizer.panels},
             {"min_mass", cfg.optimizer.min_mass}}}};
    if (cfg.evaluation_distribution)
        j["evaluation_distribution"] = io::to_json(*cfg.evaluation_distribution);
    if (!cfg.edges.empty())
        j["edges"] = cfg.edges;
    return j;
}

void apply_environment(ScenarioConfig& cfg, const EnvLookup& env)
{
    if (auto v = env("FADING_CVQKD_SEED"))
        cfg.seed = parse_u64(*v, "FADING_CVQKD_SEED");
    if (auto v = env("FADING_CVQKD_OUT"))
        cfg.out = *v;
    if (auto v = env("FADING_CVQKD_Z_CONF"))
        cfg.protocol.z_conf = parse_real(*v, "FADING_CVQKD_Z_CONF");
    if (auto v = env("FADING_CVQKD_CLUSTERS"))
        cfg.clusters_max = parse_u64(*v, "FADING_CVQKD_CLUSTERS");
    cfg.protocol.validate();
}

void apply_overrides(ScenarioConfig& cfg, const Overrides& flags)
{
    if (flags.seed)
        cfg.seed = *flags.seed;
    if (flags.out)
        cfg.out = *flags.out;
    if (flags.z_conf)
        cfg.protocol.z_conf = *flags.z_conf;
    if (flags.clusters)
        cfg.clusters_max = *flags.clusters;
    if (flags.paper_scale)
        apply_paper_scale(cfg);
    cfg.protocol.validate();
}

void apply_paper_scale(ScenarioConfig& cfg)
{
    cfg.paper_scale = true;
    cfg.n = 10000;
    cfg.m = 10000;
}

ScenarioConfig load_scenario(const std::optional<std::filesystem::path>& file, const Overrides& flags,
                             const EnvLookup& env)
{
    ScenarioConfig cfg;
    if (file) {
        json j;
        try {
            j = json::parse(io::read_file(*file));
        } catch (const json::parse_error& e) {
            throw ValidationError(file->string() + ": " + e.what());
        }
        cfg = config_from_json(j, file->parent_path());
    }
    apply_environment(cfg, env);
    apply_overrides(cfg, flags);
    return cfg;
}

std::optional<std::string> process_env(const std::string& name)
{
    if (const char* v = std::getenv(name.c_str()))
        return std::string(v);
    return std::nullopt;
}

}  // namespace fcvqkd
