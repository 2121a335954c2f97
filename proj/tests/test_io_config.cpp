#include "fcvqkd/config.hpp"
#include "fcvqkd/errors.hpp"
#include "fcvqkd/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <string>

using namespace fcvqkd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "fading_cvqkd_io_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

EnvLookup env_from(std::map<std::string, std::string> vars)
{
    return [vars = std::move(vars)](const std::string& key) -> std::optional<std::string> {
        if (auto it = vars.find(key); it != vars.end())
            return it->second;
        return std::nullopt;
    };
}

std::string error_of(auto&& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("csv")
{
    TEST_CASE("numbers round-trip through their text form")
    {
        for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
            CHECK(std::stod(io::format_double(x)) == x);
        CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
        CHECK(io::format_double(-std::numeric_limits<double>::infinity()) == "-inf");
        CHECK(io::format_double(std::nan("")) == "nan");
    }

    TEST_CASE("quoting survives a round trip")
    {
        io::CsvTable t;
        t.header = {"name", "value"};
        t.add_row({"plain", "1"});
        t.add_row({"with,comma", "2"});
        t.add_row({"with \"quotes\"", "3"});
        t.add_row({"multi\nline", "4"});
        const auto text = t.to_string();
        CHECK(text.find("\"with,comma\"") != std::string::npos);
        CHECK(text.find("\"with \"\"quotes\"\"\"") != std::string::npos);
        const auto back = io::parse_csv(text);
        CHECK(back.header == t.header);
        CHECK(back.rows == t.rows);
    }

    TEST_CASE("malformed input names the line")
    {
        CHECK(error_of([] { io::parse_csv("a,b\n1,2\n3\n", "x.csv"); }).find("line 3") != std::string::npos);
        CHECK(error_of([] { io::parse_csv("a,b\n\"1,2\n", "x.csv"); }).find("unterminated") != std::string::npos);
        CHECK_THROWS_AS(io::parse_csv(""), ValidationError);
        const auto t = io::parse_csv("a,b\n1,2\n");
        CHECK(error_of([&] { io::column(t, "T", "trace.csv"); }) == "trace.csv: missing column 'T'");
        CHECK(error_of([] { io::parse_number("abc", 7, "f.csv"); }).find("line 7") != std::string::npos);
        CHECK_THROWS_AS(io::parse_number("inf", 2, "f"), ValidationError);
        CHECK(io::parse_number(" 0.25 ", 2, "f") == 0.25);
    }

    TEST_CASE("traces reject out-of-range values with their lines")
    {
        const auto bad = io::parse_csv("T\n0.5\n1.2\n0.3\n-0.1\n");
        const auto msg = error_of([&] { io::load_trace(bad, "trace.csv"); });
        CHECK(msg.find("lines 3 5") != std::string::npos);
        CHECK_THROWS_AS(io::load_trace(io::parse_csv("T\n"), "t"), ValidationError);
        CHECK(io::load_trace(io::parse_csv("T\n0.5\n0.25\n")) == std::vector<double>{0.5, 0.25});
    }
}

TEST_SUITE("runs")
{
    TEST_CASE("run files reproduce the run exactly")
    {
        ProtocolParams p;
        p.V = 3.0;
        const auto run = simulate_run(TransmittanceDistribution::log_negative_weibull(1.25, 0.8), p, 20, 7, 44);
        const auto pairs = io::parse_csv(io::run_table(run).to_string());
        const auto sidecar = io::json::parse(io::dump(io::run_sidecar(run)));
        const auto back = io::load_run(pairs, sidecar);
        REQUIRE(back.packages.size() == 7);
        CHECK(back.n == 20);
        CHECK(back.seed == 44);
        CHECK(back.protocol.V == 3.0);
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(back.packages[i].M == run.packages[i].M);
            CHECK(back.packages[i].B == run.packages[i].B);
            CHECK(std::isnan(back.packages[i].true_T));
        }
        const auto truth = io::load_truth(io::parse_csv(io::truth_table(run).to_string()), 7);
        for (std::size_t i = 0; i < 7; ++i)
            CHECK(truth[i] == run.packages[i].true_T);

        const auto es = estimate_run(run);
        const auto es_back = io::load_estimates(io::parse_csv(io::estimates_table(es).to_string()));
        REQUIRE(es_back.size() == es.size());
        for (std::size_t i = 0; i < es.size(); ++i) {
            CHECK(es_back[i].sqrtT_hat == es[i].sqrtT_hat);
            CHECK(es_back[i].T_hat == es[i].T_hat);
            CHECK(es_back[i].sigma_sqrtT == es[i].sigma_sqrtT);
            CHECK(es_back[i].k == es[i].k);
        }
        CHECK(estimate_run(back)[3].sqrtT_hat == es[3].sqrtT_hat);
    }

    TEST_CASE("schema problems are reported")
    {
        const auto run = simulate_run(TransmittanceDistribution::uniform(0.0, 1.0), ProtocolParams{}, 4, 2, 1);
        const auto sidecar = io::run_sidecar(run);
        auto table = io::run_table(run);
        auto short_table = table;
        short_table.rows.pop_back();
        CHECK(error_of([&] { io::load_run(short_table, sidecar); }).find("expected 8 data rows") !=
              std::string::npos);
        auto swapped = table;
        std::swap(swapped.rows[0], swapped.rows[1]);
        CHECK(error_of([&] { io::load_run(swapped, sidecar); }).find("line 2") != std::string::npos);
        auto no_b = table;
        no_b.header[3] = "X";
        CHECK(error_of([&] { io::load_run(no_b, sidecar); }).find("missing column 'B'") != std::string::npos);
        CHECK_THROWS_AS(io::load_run(table, io::json{{"m", 2}}), ValidationError);
    }
}

TEST_SUITE("json")
{
    TEST_CASE("protocol round trip and auto confidence")
    {
        ProtocolParams p;
        p.V = 7.0;
        p.noise_floor = NoiseFloor::subtract;
        p.modulation = Modulation::both_quadratures;
        const auto back = io::protocol_from_json(io::to_json(p));
        CHECK(back.V == 7.0);
        CHECK(back.noise_floor == NoiseFloor::subtract);
        CHECK(back.modulation == Modulation::both_quadratures);
        const auto z = io::protocol_from_json({{"z_conf", "auto"}, {"eps_PE", 0.0227501319481792}});
        CHECK(z.z_conf == doctest::Approx(2.0).epsilon(1e-9));
        CHECK_THROWS_AS(io::protocol_from_json({{"z_conf", "high"}}), ValidationError);
        CHECK_THROWS_AS(io::protocol_from_json({{"r", 1.5}}), ParameterError);
        CHECK_THROWS_AS(io::protocol_from_json({{"V", "big"}}), ValidationError);
    }

    TEST_CASE("distribution descriptors round trip")
    {
        for (const auto& d : {TransmittanceDistribution::uniform(0.1, 0.7),
                              TransmittanceDistribution::truncated_normal(0.4, 0.2),
                              TransmittanceDistribution::log_negative_weibull(1.47, 0.6),
                              TransmittanceDistribution::empirical({0.2, 0.4, 0.9}, 0.05)}) {
            const auto back = io::distribution_from_json(io::to_json(d));
            CHECK(back.label() == d.label());
            CHECK(moments(back).var_sqrtT == moments(d).var_sqrtT);
        }
        CHECK_THROWS_AS(io::distribution_from_json({{"type", "gamma"}}), ValidationError);
        CHECK_THROWS_AS(io::distribution_from_json({{"type", "empirical"}}), ValidationError);
    }

    TEST_CASE("empirical descriptor can point at a trace file")
    {
        const auto dir = scratch("trace");
        io::write_file(dir / "trace.csv", "T\n0.25\n0.81\n");
        const auto d = io::distribution_from_json({{"type", "empirical"}, {"path", "trace.csv"}}, dir);
        CHECK(moments(d).mean_sqrtT == doctest::Approx(0.7));
    }

    TEST_CASE("plans serialize infinite edges as null")
    {
        const auto plan = total_key_rate(TransmittanceDistribution::uniform(0.0, 1.0),
                                         std::vector<double>{-unbounded, 0.5, unbounded}, 100, 100, ProtocolParams{});
        const auto j = io::to_json(plan);
        CHECK(j.at("edges")[0].is_null());
        CHECK(j.at("edges")[1].get<double>() == 0.5);
        CHECK(j.at("per_cluster").size() == 2);
    }
}

TEST_SUITE("configuration")
{
    TEST_CASE("file, environment and flags apply in that order")
    {
        const auto dir = scratch("config");
        io::write_file(dir / "scenario.json", R"({"seed": 5, "out": "from_file", "n": 50, "m": 40,
            "clusters_max": 1, "protocol": {"z_conf": 3.0, "V": 4.0},
            "distribution": {"type": "uniform", "lo": 0.2, "hi": 0.8},
            "edges": [null, 0.5, null]})");
        const auto file = dir / "scenario.json";

        auto cfg = load_scenario(file, {}, env_from({}));
        CHECK(cfg.seed == 5);
        CHECK(cfg.out == "from_file");
        CHECK(cfg.n == 50);
        CHECK(cfg.protocol.z_conf == 3.0);
        CHECK(cfg.protocol.V == 4.0);
        CHECK(cfg.distribution.label() == "Uniform[0.2,0.8]");
        REQUIRE(cfg.edges.size() == 3);
        CHECK(cfg.edges.front() == -unbounded);
        CHECK(cfg.edges.back() == unbounded);

        cfg = load_scenario(file, {}, env_from({{"FADING_CVQKD_SEED", "9"}, {"FADING_CVQKD_Z_CONF", "2.5"}}));
        CHECK(cfg.seed == 9);
        CHECK(cfg.protocol.z_conf == 2.5);
        CHECK(cfg.out == "from_file");

        Overrides flags;
        flags.seed = 11;
        flags.out = "from_flag";
        flags.clusters = 2;
        cfg = load_scenario(file, flags, env_from({{"FADING_CVQKD_SEED", "9"}, {"FADING_CVQKD_CLUSTERS", "3"}}));
        CHECK(cfg.seed == 11);
        CHECK(cfg.out == "from_flag");
        CHECK(cfg.clusters_max == 2);

        flags = {};
        flags.paper_scale = true;
        cfg = load_scenario(std::nullopt, flags, env_from({}));
        CHECK(cfg.n == 10000);
        CHECK(cfg.m == 10000);
        CHECK(cfg.paper_scale);
    }

    TEST_CASE("configurations survive serialization")
    {
        ScenarioConfig cfg;
        cfg.seed = 77;
        cfg.n = 123;
        cfg.mode = EvaluationMode::monte_carlo;
        cfg.evaluation_distribution = TransmittanceDistribution::uniform(0.0, 1.0);
        cfg.optimizer.grid_points = 5;
        const auto back = config_from_json(io::json::parse(to_json(cfg).dump()));
        CHECK(back.seed == 77);
        CHECK(back.n == 123);
        CHECK(back.mode == EvaluationMode::monte_carlo);
        CHECK(back.evaluation_distribution.has_value());
        CHECK(back.optimizer.grid_points == 5);
        CHECK(to_json(back) == to_json(cfg));
    }

    TEST_CASE("bad values are rejected")
    {
        CHECK_THROWS_AS(load_scenario(std::nullopt, {}, env_from({{"FADING_CVQKD_SEED", "-3"}})), ValidationError);
        CHECK_THROWS_AS(load_scenario(std::nullopt, {}, env_from({{"FADING_CVQKD_Z_CONF", "two"}})),
                        ValidationError);
        CHECK_THROWS_AS(config_from_json(io::json{{"mode", "guess"}}), ValidationError);
        CHECK_THROWS_AS(config_from_json(io::json::array()), ValidationError);
        const auto dir = scratch("badjson");
        io::write_file(dir / "c.json", "{not json");
        CHECK_THROWS_AS(load_scenario(dir / "c.json", {}, env_from({})), ValidationError);
    }
}
