#include "fcvqkd/commands.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/io.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace fcvqkd {

using io::format_double;
using nlohmann::json;

namespace {

std::string fmt(double x) { return format_double(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }

const TransmittanceDistribution& evaluation_law(const ScenarioConfig& cfg)
{
    return cfg.evaluation_distribution ? *cfg.evaluation_distribution : cfg.distribution;
}

struct NamedLaw {
    std::string name;
    TransmittanceDistribution dist;
};

std::vector<NamedLaw> comparison_laws()
{
    return {{"uniform_0_1", TransmittanceDistribution::uniform(0.0, 1.0)},
            {"weibull_1.25_0.8", TransmittanceDistribution::log_negative_weibull(1.25, 0.8)},
            {"weibull_1.47_0.6", TransmittanceDistribution::log_negative_weibull(1.47, 0.6)},
            {"normal_0.5_0.1", TransmittanceDistribution::truncated_normal(0.5, 0.1)}};
}

}  // namespace

void cmd_simulate(const ScenarioConfig& cfg, std::ostream& log)
{
    const Run run = simulate_run(cfg.distribution, cfg.protocol, cfg.n, cfg.m, cfg.seed);
    const auto pairs = io::run_table(run).to_string();
    const auto sidecar = io::dump(io::run_sidecar(run));
    const auto truth = io::truth_table(run).to_string();
    io::write_file(cfg.out / "run.csv", pairs);
    io::write_file(cfg.out / "run.json", sidecar);
    io::write_file(cfg.out / "truth.csv", truth);
    log << "simulated " << cfg.m << " packages of " << cfg.n << " pairs from " << cfg.distribution.label()
        << " into " << cfg.out.string() << "\n";
}

void cmd_estimate(const ScenarioConfig& cfg, const EstimateInputs& in, std::ostream& log)
{
    const auto run_csv = in.run_csv.empty() ? cfg.out / "run.csv" : in.run_csv;
    auto sidecar_path = in.sidecar.value_or(std::filesystem::path(run_csv).replace_extension(".json"));
    json sidecar;
    try {
        sidecar = json::parse(io::read_file(sidecar_path));
    } catch (const json::parse_error& e) {
        throw ValidationError(sidecar_path.string() + ": " + e.what());
    }
    Run run = io::load_run(io::parse_csv(io::read_file(run_csv), run_csv.string()), sidecar, run_csv.string());
    run.protocol.z_conf = cfg.protocol.z_conf;
    run.protocol.noise_floor = cfg.protocol.noise_floor;
    const ProtocolParams& p = run.protocol;

    std::optional<std::filesystem::path> truth_path = in.truth;
    if (!truth_path && !cfg.blind && std::filesystem::exists(cfg.out / "truth.csv"))
        truth_path = cfg.out / "truth.csv";

    const auto estimates = estimate_run(run);
    const auto stats = aggregate(estimates, p);
    const double eps_up = eps_upper_bound(stats, p.z_conf);
    const auto wc = worst_case(stats, eps_up, p.V_prime(), p.z_conf, p.noise_floor);
    const auto rect = worst_case_rectangular(stats, eps_up, p.V_prime(), p.z_conf, p.noise_floor);
    const double N = static_cast<double>(run.n * run.packages.size());
    const auto rate = key_rate(wc, N, p);

    json report{{"aggregate", io::to_json(stats)},
                {"eps_up", eps_up},
                {"worst_case", io::to_json(wc)},
                {"worst_case_rectangular", io::to_json(rect)},
                {"key_rate", io::to_json(rate)},
                {"protocol", io::to_json(p)},
                {"n", run.n},
                {"m", run.packages.size()}};

    std::string residuals;
    if (truth_path) {
        const auto truth = io::load_truth(io::parse_csv(io::read_file(*truth_path), truth_path->string()),
                                          run.packages.size(), truth_path->string());
        io::CsvTable t;
        t.header = {"package", "T_true", "sqrtT_hat", "residual_sqrtT", "sigma_sqrtT", "T_hat", "residual_T"};
        double sum = 0.0, sum2 = 0.0, pred = 0.0;
        for (std::size_t i = 0; i < estimates.size(); ++i) {
            const auto& e = estimates[i];
            const double res = e.sqrtT_hat - std::sqrt(truth[i]);
            sum += res;
            sum2 += res * res;
            pred += e.sigma_sqrtT * e.sigma_sqrtT;
            t.add_row({fmt(i), fmt(truth[i]), fmt(e.sqrtT_hat), fmt(res), fmt(e.sigma_sqrtT), fmt(e.T_hat),
                       fmt(e.T_hat - truth[i])});
        }
        const double m = static_cast<double>(estimates.size());
        const double mean = sum / m;
        report["residuals"] = {{"mean", mean},
                               {"std", std::sqrt(std::max(0.0, sum2 / m - mean * mean) * m / (m - 1.0))},
                               {"predicted_std", std::sqrt(pred / m)}};
        residuals = t.to_string();
    }

    io::write_file(cfg.out / "estimates.csv", io::estimates_table(estimates).to_string());
    io::write_file(cfg.out / "aggregate.json", io::dump(report));
    if (!residuals.empty())
        io::write_file(cfg.out / "residuals.csv", residuals);
    log << "estimated " << estimates.size() << " packages: T_eff_low=" << fmt(wc.T_eff_low)
        << " eps_eff_up=" << fmt(wc.eps_eff_up) << " K=" << fmt(rate.K) << "\n";
    if (stats.sign_anomalies > 0)
        log << "warning: " << stats.sign_anomalies << " packages with negative sqrtT_hat\n";
}

void cmd_keyrate(const ScenarioConfig& cfg, std::ostream& log)
{
    const auto& law = evaluation_law(cfg);
    ClusterPlan plan;
    if (cfg.mode == EvaluationMode::analytic) {
        EvaluationSettings es;
        es.min_mass = cfg.optimizer.min_mass;
        plan = total_key_rate(law, cfg.edges, cfg.n, cfg.m, cfg.protocol, es);
    } else {
        const Run run = simulate_run(law, cfg.protocol, cfg.n, cfg.m, cfg.seed);
        plan = empirical_key_rate(estimate_run(run), cfg.edges, cfg.n, cfg.protocol);
    }
    const auto asym = asymptotic_optimum(law, cfg.protocol, cfg.optimizer);
    json report{{"plan", io::to_json(plan)},
                {"mode", cfg.mode == EvaluationMode::analytic ? "analytic" : "monte_carlo"},
                {"distribution", io::to_json(law)},
                {"protocol", io::to_json(cfg.protocol)},
                {"asymptotic", {{"K_inf", asym.K_inf}, {"V", asym.V}}}};
    io::write_file(cfg.out / "keyrate.json", io::dump(report));
    log << "C=" << plan.C << " total rate " << fmt(plan.total_rate) << " bits/state\n";
}

void cmd_optimize(const ScenarioConfig& cfg, std::ostream& log)
{
    const auto plans = optimize_sweep(cfg.distribution, cfg.clusters_max, cfg.n, cfg.m, cfg.protocol, cfg.optimizer);
    io::CsvTable table;
    table.header = {"C", "total_rate", "r", "V", "discarded_mass"};
    if (cfg.evaluation_distribution)
        table.header.push_back("evaluated_rate");
    json plan_list = json::array();
    std::size_t best = 0;
    for (std::size_t c = 0; c < plans.size(); ++c) {
        const auto& plan = plans[c];
        if (plan.total_rate > plans[best].total_rate)
            best = c;
        std::vector<std::string> row{fmt(plan.C), fmt(plan.total_rate), fmt(plan.r), fmt(plan.V),
                                     fmt(plan.discarded_mass)};
        json pj = io::to_json(plan);
        if (cfg.evaluation_distribution) {
            ProtocolParams p = cfg.protocol;
            p.r = plan.r;
            p.V = plan.V;
            EvaluationSettings es;
            es.panels = cfg.optimizer.panels;
            es.min_mass = cfg.optimizer.min_mass;
            const std::span<const double> edges =
                plan.C == 0 ? std::span<const double>() : std::span<const double>(plan.edges);
            const auto evaluated = total_key_rate(*cfg.evaluation_distribution, edges, cfg.n, cfg.m, p, es);
            row.push_back(fmt(evaluated.total_rate));
            pj["evaluated"] = io::to_json(evaluated);
        }
        table.add_row(std::move(row));
        plan_list.push_back(std::move(pj));
    }
    const auto& s = cfg.optimizer;
    json report{{"config", to_json(cfg)},
                {"plans", plan_list},
                {"best_C", best},
                {"grid",
                 {{"r_range", {s.r_min, s.r_max}},
                  {"V_range", {std::max(s.V_min, 1.0 - cfg.protocol.V_S), s.V_max}},
                  {"points_per_axis", s.grid_points},
                  {"spacing", "geometric"},
                  {"quantile_levels", s.quantile_levels},
                  {"refine_passes", s.refine_passes}}}};
    io::write_file(cfg.out / "optimize.json", io::dump(report));
    io::write_file(cfg.out / "optimize.csv", table.to_string());
    for (const auto& plan : plans)
        log << "C=" << plan.C << " rate=" << fmt(plan.total_rate) << " r=" << fmt(plan.r) << " V=" << fmt(plan.V)
            << "\n";
}

const std::vector<std::string>& figure_ids()
{
    static const std::vector<std::string> ids{"fig6", "fig7", "fig8", "fig9"};
    return ids;
}

namespace {

struct SizePoint {
    std::size_t n, m;
    ClusterPlan plan;
};

std::vector<SizePoint> finite_size_sweep(const ScenarioConfig& cfg)
{
    const std::vector<std::size_t> ns =
        cfg.paper_scale ? std::vector<std::size_t>{1000, 10000, 100000} : std::vector<std::size_t>{100, 1000};
    const std::vector<std::size_t> ms = cfg.paper_scale
                                            ? std::vector<std::size_t>{10, 30, 100, 300, 1000, 3000, 10000, 30000, 100000}
                                            : std::vector<std::size_t>{10, 30, 100, 300, 1000};
    std::vector<SizePoint> out;
    for (auto n : ns)
        for (auto m : ms)
            out.push_back({n, m, {}});
    for (auto& pt : out)
        pt.plan = optimize(cfg.distribution, 0, pt.n, pt.m, cfg.protocol, cfg.optimizer);
    return out;
}

}  // namespace

void cmd_reproduce(const ScenarioConfig& cfg, const std::string& figure, std::ostream& log)
{
    const auto& ids = figure_ids();
    if (std::find(ids.begin(), ids.end(), figure) == ids.end())
        throw ParameterError("unknown figure '" + figure + "' (expected fig6, fig7, fig8 or fig9)");

    io::CsvTable table;
    std::optional<json> extra;
    if (figure == "fig6" || figure == "fig7") {
        const auto points = finite_size_sweep(cfg);
        if (figure == "fig6") {
            const auto asym = asymptotic_optimum(cfg.distribution, cfg.protocol, cfg.optimizer);
            table.header = {"n", "m", "N", "K", "r_opt", "V_opt", "K_inf"};
            for (const auto& pt : points)
                table.add_row({fmt(pt.n), fmt(pt.m), fmt(pt.n * pt.m), fmt(pt.plan.total_rate), fmt(pt.plan.r),
                               fmt(pt.plan.V), fmt(asym.K_inf)});
        } else {
            table.header = {"n", "m", "N", "r_opt", "V_opt", "K"};
            for (const auto& pt : points)
                table.add_row({fmt(pt.n), fmt(pt.m), fmt(pt.n * pt.m), fmt(pt.plan.r), fmt(pt.plan.V),
                               fmt(pt.plan.total_rate)});
        }
    } else if (figure == "fig8") {
        table.header = {"distribution", "cluster", "T_hat_lo", "T_hat_hi", "mass", "cond_mean_T",
                        "cond_mean_sqrtT", "cond_var_sqrtT", "K_c", "total_rate", "r", "V"};
        json layouts = json::object();
        for (const auto& law : comparison_laws()) {
            const auto plan = optimize(law.dist, 3, cfg.n, cfg.m, cfg.protocol, cfg.optimizer);
            for (std::size_t c = 0; c < plan.per_cluster.size(); ++c) {
                const auto& rep = plan.per_cluster[c];
                table.add_row({law.name, fmt(c), fmt(rep.interval.lo), fmt(rep.interval.hi), fmt(rep.mass),
                               fmt(rep.cond_moments.mean_T), fmt(rep.cond_moments.mean_sqrtT),
                               fmt(rep.cond_moments.var_sqrtT), fmt(rep.K_c), fmt(plan.total_rate), fmt(plan.r),
                               fmt(plan.V)});
            }
            layouts[law.name] = io::to_json(plan);
        }
        extra = std::move(layouts);
    } else {
        table.header = {"distribution", "C", "rate", "r", "V"};
        auto laws = comparison_laws();
        laws.push_back({"fixed_0.5", TransmittanceDistribution::empirical({0.5})});
        for (const auto& law : laws) {
            const auto plans = optimize_sweep(law.dist, cfg.clusters_max, cfg.n, cfg.m, cfg.protocol, cfg.optimizer);
            for (const auto& plan : plans)
                table.add_row({law.name, fmt(plan.C), fmt(plan.total_rate), fmt(plan.r), fmt(plan.V)});
        }
    }
    io::write_file(cfg.out / (figure + ".csv"), table.to_string());
    if (extra)
        io::write_file(cfg.out / (figure + ".json"), io::dump(*extra));
    log << "wrote " << (cfg.out / (figure + ".csv")).string() << " (" << table.rows.size() << " rows)\n";
}

void cmd_ingest(const ScenarioConfig& cfg, const std::filesystem::path& trace, std::ostream& log)
{
    const auto samples = io::load_trace(io::parse_csv(io::read_file(trace), trace.string()), trace.string());
    const auto dist = TransmittanceDistribution::empirical(samples);
    const auto mo = moments(dist);
    json descriptor = io::to_json(dist);
    descriptor["moments"] = io::to_json(mo);
    io::write_file(cfg.out / "distribution.json", io::dump(descriptor));
    log << "ingested " << samples.size() << " samples: mean_T=" << fmt(mo.mean_T)
        << " mean_sqrtT=" << fmt(mo.mean_sqrtT) << " var_sqrtT=" << fmt(mo.var_sqrtT) << "\n";
}

}  // namespace fcvqkd
