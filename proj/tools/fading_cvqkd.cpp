// Command-line front end for the fading-channel CV-QKD toolkit.
//
// Configuration precedence: built-in defaults < --config file < environment
// (FADING_CVQKD_SEED, FADING_CVQKD_OUT, FADING_CVQKD_Z_CONF,
// FADING_CVQKD_CLUSTERS) < command-line flags. FADING_CVQKD_THREADS caps the
// worker threads.

#include "fcvqkd/commands.hpp"
#include "fcvqkd/config.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

int main(int argc, char** argv)
{
    using namespace fcvqkd;

    CLI::App app{"Fading-channel CV-QKD simulator, estimator and key-rate optimizer"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    Overrides flags;
    std::uint64_t seed = 0;
    std::string out;
    double z_conf = 0.0;
    std::size_t clusters = 0;
    app.add_option("--config", config_path, "Scenario configuration (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Random seed");
    auto* out_opt = app.add_option("--out", out, "Output directory");
    app.add_flag("--paper-scale", flags.paper_scale, "Use n = m = 10^4");
    auto* clusters_opt = app.add_option("--clusters", clusters, "Largest cluster count C to consider");
    auto* z_opt = app.add_option("--z-conf", z_conf, "Confidence multiplier for parameter bounds")
                      ->check(CLI::NonNegativeNumber);

    auto* simulate = app.add_subcommand("simulate", "Simulate a run and write run.csv, run.json, truth.csv");

    auto* estimate = app.add_subcommand("estimate", "Estimate channel parameters from a run");
    std::string run_csv, sidecar, truth;
    bool blind = false;
    estimate->add_option("--run", run_csv, "Pair table (default <out>/run.csv)")->check(CLI::ExistingFile);
    estimate->add_option("--sidecar", sidecar, "Run sidecar (default: run path with .json)")
        ->check(CLI::ExistingFile);
    estimate->add_option("--truth", truth, "True-T table for residuals")->check(CLI::ExistingFile);
    estimate->add_flag("--blind", blind, "Do not look for a true-T table");

    auto* keyrate = app.add_subcommand("keyrate", "Key rate of the configured cluster layout");
    bool monte_carlo = false;
    keyrate->add_flag("--monte-carlo", monte_carlo, "Evaluate on a simulated run instead of analytically");

    auto* optimize_cmd = app.add_subcommand("optimize", "Optimize r, V and cluster edges for C = 0 .. clusters");

    auto* reproduce = app.add_subcommand("reproduce", "Emit the data series of a figure");
    std::string figure;
    reproduce->add_option("figure", figure, "fig6 | fig7 | fig8 | fig9")
        ->required()
        ->check(CLI::IsMember(figure_ids()));

    auto* ingest = app.add_subcommand("ingest", "Turn a transmittance trace into an empirical distribution");
    std::string trace;
    ingest->add_option("trace", trace, "CSV with a T column")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*seed_opt)
            flags.seed = seed;
        if (*out_opt)
            flags.out = out;
        if (*z_opt)
            flags.z_conf = z_conf;
        if (*clusters_opt)
            flags.clusters = clusters;
        std::optional<std::filesystem::path> file;
        if (!config_path.empty())
            file = config_path;
        ScenarioConfig cfg = load_scenario(file, flags, process_env);

        if (simulate->parsed()) {
            cmd_simulate(cfg, std::cout);
        } else if (estimate->parsed()) {
            if (blind)
                cfg.blind = true;
            EstimateInputs in;
            in.run_csv = run_csv;
            if (!sidecar.empty())
                in.sidecar = sidecar;
            if (!truth.empty())
                in.truth = truth;
            cmd_estimate(cfg, in, std::cout);
        } else if (keyrate->parsed()) {
            if (monte_carlo)
                cfg.mode = EvaluationMode::monte_carlo;
            cmd_keyrate(cfg, std::cout);
        } else if (optimize_cmd->parsed()) {
            cmd_optimize(cfg, std::cout);
        } else if (reproduce->parsed()) {
            cmd_reproduce(cfg, figure, std::cout);
        } else if (ingest->parsed()) {
            cmd_ingest(cfg, trace, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
