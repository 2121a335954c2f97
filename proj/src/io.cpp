#include "fcvqkd/io.hpp"

#include "fcvqkd/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fcvqkd::io {

std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::string quote(const std::string& field)
{
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string fmt_size(std::size_t x) { return std::to_string(x); }

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }

std::string CsvTable::to_string() const
{
    std::string out;
    auto emit = [&](const std::vector<std::string>& rec) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i)
                out += ',';
            out += quote(rec[i]);
        }
        out += '\n';
    };
    emit(header);
    for (const auto& r : rows)
        emit(r);
    return out;
}

CsvTable parse_csv(const std::string& text, const std::string& source)
{
    std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
    std::vector<std::string> rec;
    std::string field;
    bool in_quotes = false, field_started = false, any = false;
    std::size_t line = 1, rec_line = 1;

    auto end_field = [&] {
        rec.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        const bool blank = rec.size() == 1 && rec[0].empty();
        if (!blank)
            records.emplace_back(rec_line, std::move(rec));
        rec.clear();
        any = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        if (!any) {
            rec_line = line;
            any = true;
        }
        switch (c) {
        case '"':
            if (field_started) {
                std::ostringstream msg;
                msg << source << ": line " << line << ": stray quote";
                throw ValidationError(msg.str());
            }
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) {
        std::ostringstream msg;
        msg << source << ": unterminated quoted field starting on line " << rec_line;
        throw ValidationError(msg.str());
    }
    if (any)
        end_record();

    if (records.empty())
        throw ValidationError(source + ": empty file (a header is required)");
    CsvTable table;
    table.header = std::move(records.front().second);
    for (auto& h : table.header) {
        // tolerate surrounding whitespace in header names
        const auto a = h.find_first_not_of(" \t");
        const auto b = h.find_last_not_of(" \t");
        h = a == std::string::npos ? std::string() : h.substr(a, b - a + 1);
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].second.size() != table.header.size()) {
            std::ostringstream msg;
            msg << source << ": line " << records[r].first << ": expected " << table.header.size()
                << " fields, found " << records[r].second.size();
            throw ValidationError(msg.str());
        }
        table.rows.push_back(std::move(records[r].second));
    }
    return table;
}

std::size_t column(const CsvTable& table, const std::string& name, const std::string& source)
{
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == name)
            return i;
    throw ValidationError(source + ": missing column '" + name + "'");
}

double parse_number(const std::string& field, std::size_t line, const std::string& source)
{
    std::size_t a = field.find_first_not_of(" \t");
    std::size_t b = field.find_last_not_of(" \t");
    double value = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    if (a != std::string::npos) {
        const char* first = field.data() + a;
        const char* last = field.data() + b + 1;
        if (*first == '+')
            ++first;
        const auto res = std::from_chars(first, last, value);
        ok = res.ec == std::errc() && res.ptr == last && std::isfinite(value);
    }
    if (!ok) {
        std::ostringstream msg;
        msg << source << ": line " << line << ": '" << field << "' is not a finite number";
        throw ValidationError(msg.str());
    }
    return value;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

CsvTable run_table(const Run& run)
{
    CsvTable t;
    t.header = {"package", "j", "M", "B"};
    for (std::size_t i = 0; i < run.packages.size(); ++i) {
        const auto& pkg = run.packages[i];
        for (std::size_t j = 0; j < pkg.M.size(); ++j)
            t.add_row({fmt_size(i), fmt_size(j), format_double(pkg.M[j]), format_double(pkg.B[j])});
    }
    return t;
}

CsvTable truth_table(const Run& run)
{
    CsvTable t;
    t.header = {"package", "T_true"};
    for (std::size_t i = 0; i < run.packages.size(); ++i)
        t.add_row({fmt_size(i), format_double(run.packages[i].true_T)});
    return t;
}

json run_sidecar(const Run& run)
{
    return json{{"n", run.n},
                {"m", run.packages.size()},
                {"seed", run.seed},
                {"protocol", to_json(run.protocol)},
                {"distribution", to_json(run.dist)}};
}

namespace {

std::size_t parse_index(const std::string& field, std::size_t line, const std::string& source)
{
    std::size_t value = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        std::ostringstream msg;
        msg << source << ": line " << line << ": '" << field << "' is not a non-negative integer";
        throw ValidationError(msg.str());
    }
    return value;
}

}  // namespace

Run load_run(const CsvTable& pairs, const json& sidecar, const std::string& source)
{
    const auto c_pkg = column(pairs, "package", source), c_j = column(pairs, "j", source),
               c_m = column(pairs, "M", source), c_b = column(pairs, "B", source);
    std::size_t n = 0, m = 0;
    std::uint64_t seed = 0;
    try {
        n = sidecar.at("n").get<std::size_t>();
        m = sidecar.at("m").get<std::size_t>();
        seed = sidecar.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run sidecar: ") + e.what());
    }
    if (n < 2 || m < 1)
        throw ValidationError("run sidecar: need n >= 2 and m >= 1");
    if (pairs.rows.size() != n * m) {
        std::ostringstream msg;
        msg << source << ": expected " << n * m << " data rows (n=" << n << ", m=" << m << "), found "
            << pairs.rows.size();
        throw ValidationError(msg.str());
    }
    const ProtocolParams p = protocol_from_json(sidecar.value("protocol", json::object()));
    const TransmittanceDistribution dist = sidecar.contains("distribution")
                                               ? distribution_from_json(sidecar.at("distribution"))
                                               : TransmittanceDistribution::uniform(0.0, 1.0);

    std::vector<Package> packages(m);
    for (auto& pkg : packages) {
        pkg.true_T = std::numeric_limits<double>::quiet_NaN();
        pkg.M.resize(n);
        pkg.B.resize(n);
    }
    for (std::size_t r = 0; r < pairs.rows.size(); ++r) {
        const auto& row = pairs.rows[r];
        const std::size_t line = r + 2;
        const auto i = parse_index(row[c_pkg], line, source);
        const auto j = parse_index(row[c_j], line, source);
        if (i != r / n || j != r % n) {
            std::ostringstream msg;
            msg << source << ": line " << line << ": expected package " << r / n << ", j " << r % n;
            throw ValidationError(msg.str());
        }
        packages[i].M[j] = parse_number(row[c_m], line, source);
        packages[i].B[j] = parse_number(row[c_b], line, source);
    }
    return Run{std::move(packages), dist, p, seed, n};
}

std::vector<double> load_truth(const CsvTable& table, std::size_t m, const std::string& source)
{
    const auto c_pkg = column(table, "package", source), c_t = column(table, "T_true", source);
    if (table.rows.size() != m)
        throw ValidationError(source + ": expected one row per package");
    std::vector<double> out(m);
    for (std::size_t r = 0; r < m; ++r) {
        const auto i = parse_index(table.rows[r][c_pkg], r + 2, source);
        if (i != r)
            throw ValidationError(source + ": line " + std::to_string(r + 2) + ": packages out of order");
        out[r] = parse_number(table.rows[r][c_t], r + 2, source);
    }
    return out;
}

CsvTable estimates_table(const std::vector<PackageEstimate>& estimates)
{
    CsvTable t;
    t.header = {"package", "sqrtT_hat", "T_hat", "sigma_sqrtT", "sigma_T", "vN_hat", "k"};
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& e = estimates[i];
        t.add_row({fmt_size(i), format_double(e.sqrtT_hat), format_double(e.T_hat), format_double(e.sigma_sqrtT),
                   format_double(e.sigma_T), format_double(e.vN_hat), fmt_size(e.k)});
    }
    return t;
}

std::vector<PackageEstimate> load_estimates(const CsvTable& table, const std::string& source)
{
    const auto c_s = column(table, "sqrtT_hat", source), c_t = column(table, "T_hat", source),
               c_ss = column(table, "sigma_sqrtT", source), c_st = column(table, "sigma_T", source),
               c_v = column(table, "vN_hat", source), c_k = column(table, "k", source);
    std::vector<PackageEstimate> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = r + 2;
        PackageEstimate e;
        e.sqrtT_hat = parse_number(row[c_s], line, source);
        e.T_hat = parse_number(row[c_t], line, source);
        e.sigma_sqrtT = parse_number(row[c_ss], line, source);
        e.sigma_T = parse_number(row[c_st], line, source);
        e.vN_hat = parse_number(row[c_v], line, source);
        e.k = parse_index(row[c_k], line, source);
        e.sign_anomaly = e.sqrtT_hat < 0.0;
        out.push_back(e);
    }
    return out;
}

std::vector<double> load_trace(const CsvTable& table, const std::string& source)
{
    const auto c = column(table, "T", source);
    if (table.rows.empty())
        throw ValidationError(source + ": no data rows");
    std::vector<double> out;
    out.reserve(table.rows.size());
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const double t = parse_number(table.rows[r][c], r + 2, source);
        if (!(t >= 0.0 && t <= 1.0))
            bad.push_back(r + 2);
        out.push_back(t);
    }
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << source << ": values outside [0, 1] on line" << (bad.size() > 1 ? "s" : "");
        for (std::size_t i = 0; i < bad.size() && i < 20; ++i)
            msg << ' ' << bad[i];
        if (bad.size() > 20)
            msg << " ... (" << bad.size() << " in total)";
        throw ValidationError(msg.str());
    }
    return out;
}

json to_json(const ProtocolParams& p)
{
    return json{{"V", p.V},
                {"V_S", p.V_S},
                {"epsilon", p.epsilon},
                {"beta", p.beta},
                {"r", p.r},
                {"eps_PE", p.eps_PE},
                {"eps_bar", p.eps_bar},
                {"z_conf", p.z_conf},
                {"noise_floor", p.noise_floor == NoiseFloor::keep ? "keep" : "subtract"},
                {"modulation", p.modulation == Modulation::auto_select        ? "auto"
                               : p.modulation == Modulation::both_quadratures ? "both_quadratures"
                                                                               : "squeezed_quadrature"}};
}

ProtocolParams protocol_from_json(const json& j, ProtocolParams p)
{
    try {
        if (!j.is_object())
            throw ValidationError("protocol: expected an object");
        auto number = [&](const char* key, double& field) {
            if (j.contains(key))
                field = j.at(key).get<double>();
        };
        number("V", p.V);
        number("V_S", p.V_S);
        number("epsilon", p.epsilon);
        number("beta", p.beta);
        number("r", p.r);
        number("eps_PE", p.eps_PE);
        number("eps_bar", p.eps_bar);
        if (j.contains("z_conf")) {
            const auto& z = j.at("z_conf");
            if (z.is_string()) {
                if (z.get<std::string>() != "auto")
                    throw ValidationError("protocol: z_conf must be a number or \"auto\"");
                p.z_conf = z_from_probability(p.eps_PE);
            } else {
                p.z_conf = z.get<double>();
            }
        }
        if (j.contains("noise_floor")) {
            const auto s = j.at("noise_floor").get<std::string>();
            if (s == "keep")
                p.noise_floor = NoiseFloor::keep;
            else if (s == "subtract")
                p.noise_floor = NoiseFloor::subtract;
            else
                throw ValidationError("protocol: noise_floor must be \"keep\" or \"subtract\"");
        }
        if (j.contains("modulation")) {
            const auto s = j.at("modulation").get<std::string>();
            if (s == "auto")
                p.modulation = Modulation::auto_select;
            else if (s == "both_quadratures")
                p.modulation = Modulation::both_quadratures;
            else if (s == "squeezed_quadrature")
                p.modulation = Modulation::squeezed_quadrature;
            else
                throw ValidationError("protocol: unknown modulation '" + s + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("protocol: ") + e.what());
    }
    p.validate();
    return p;
}

json to_json(const TransmittanceDistribution& dist)
{
    struct Visitor {
        json operator()(const Uniform& u) const { return {{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}}; }
        json operator()(const TruncatedNormal& t) const
        {
            return {{"type", "truncated_normal"}, {"mean", t.mean}, {"std", t.std}};
        }
        json operator()(const LogNegativeWeibull& w) const
        {
            return {{"type", "log_negative_weibull"}, {"w_over_a", w.w_over_a}, {"sigma_b", w.sigma_b},
                    {"peak", w.peak},           {"shape", w.shape},       {"scale", w.scale}};
        }
        json operator()(const Empirical& e) const
        {
            json j{{"type", "empirical"}, {"samples", e.samples()}};
            if (e.bin_width_overridden())
                j["bin_width"] = e.bin_width();
            return j;
        }
    };
    return std::visit(Visitor{}, dist.variant());
}

TransmittanceDistribution distribution_from_json(const json& j, const std::filesystem::path& base_dir)
{
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "uniform")
            return TransmittanceDistribution::uniform(j.value("lo", 0.0), j.value("hi", 1.0));
        if (type == "truncated_normal")
            return TransmittanceDistribution::truncated_normal(j.at("mean").get<double>(), j.at("std").get<double>());
        if (type == "log_negative_weibull") {
            auto w = make_log_negative_weibull(j.at("w_over_a").get<double>(), j.at("sigma_b").get<double>());
            // Pinned shape constants take precedence over the derived ones.
            w.peak = j.value("peak", w.peak);
            w.shape = j.value("shape", w.shape);
            w.scale = j.value("scale", w.scale);
            return TransmittanceDistribution::Variant{w};
        }
        if (type == "empirical") {
            const double width = j.value("bin_width", 0.0);
            if (j.contains("samples"))
                return TransmittanceDistribution::empirical(j.at("samples").get<std::vector<double>>(), width);
            if (j.contains("path")) {
                std::filesystem::path path = j.at("path").get<std::string>();
                if (path.is_relative())
                    path = base_dir / path;
                const auto table = parse_csv(read_file(path), path.string());
                return TransmittanceDistribution::empirical(load_trace(table, path.string()), width);
            }
            throw ValidationError("distribution: empirical needs 'samples' or 'path'");
        }
        throw ValidationError("distribution: unknown type '" + type + "'");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("distribution: ") + e.what());
    }
}

json to_json(const Moments& mo)
{
    return {{"mean_T", mo.mean_T}, {"mean_sqrtT", mo.mean_sqrtT}, {"var_sqrtT", mo.var_sqrtT}};
}

json to_json(const FluctuationEstimate& f)
{
    return {{"mean_T", f.mean_T}, {"se_mean_T", f.se_mean_T}, {"X1", f.X1},
            {"X2", f.X2},         {"se_X1", f.se_X1},         {"se_X2", f.se_X2}};
}

json to_json(const AggregateStats& s)
{
    return {{"mean_sqrtT_hat", s.mean_sqrtT_hat},
            {"se_mean_sqrtT", s.se_mean_sqrtT},
            {"mean_T_hat", s.mean_T_hat},
            {"mean_estimator_var", s.mean_estimator_var},
            {"X1_hat", s.X1_hat},
            {"X2_hat", s.X2_hat},
            {"se_X1", s.se_X1},
            {"se_X2", s.se_X2},
            {"corrected", to_json(s.corrected)},
            {"raw", to_json(s.raw)},
            {"mean_vN", s.mean_vN},
            {"eps_hat", s.eps_hat},
            {"k_total", s.k_total},
            {"m_used", s.m_used},
            {"sign_anomalies", s.sign_anomalies}};
}

json to_json(const WorstCaseChannel& wc)
{
    return {{"T_eff_low", wc.T_eff_low}, {"eps_eff_up", wc.eps_eff_up}, {"X1_up", wc.X1_up},
            {"X2_low", wc.X2_low},       {"eps_up", wc.eps_up},         {"unusable", wc.unusable},
            {"clamped_above", wc.clamped_above}};
}

json to_json(const KeyRateReport& k)
{
    return {{"T", k.T},         {"eps", k.eps},     {"I_AB", k.I_AB}, {"S_BE", k.S_BE},        {"K_inf", k.K_inf},
            {"delta", k.delta}, {"K", k.K},         {"K_raw", k.K_raw}, {"N_used", k.N_used}};
}

namespace {

// Infinite edges are stored as null.
json edge_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json edges_json(const std::vector<double>& edges)
{
    json j = json::array();
    for (double x : edges)
        j.push_back(edge_json(x));
    return j;
}

}  // namespace

json to_json(const ClusterReport& c)
{
    json j{{"interval", {edge_json(c.interval.lo), edge_json(c.interval.hi)}},
           {"mass", c.mass},
           {"cond_moments", to_json(c.cond_moments)},
           {"m_c", c.m_c},
           {"N_c", c.N_c},
           {"K_c", c.K_c},
           {"empty", c.empty},
           {"too_small", c.too_small},
           {"low_mass", c.low_mass}};
    if (!c.too_small) {
        j["stats"] = to_json(c.stats);
        j["worst_case"] = to_json(c.wc);
        j["key_rate"] = to_json(c.rate);
    }
    return j;
}

json to_json(const ClusterPlan& plan)
{
    json clusters = json::array();
    for (const auto& c : plan.per_cluster)
        clusters.push_back(to_json(c));
    json j{{"C", plan.C},         {"edges", edges_json(plan.edges)}, {"per_cluster", clusters},
           {"total_rate", plan.total_rate}, {"discarded_mass", plan.discarded_mass},
           {"r", plan.r},         {"V", plan.V},         {"n", plan.n},
           {"m", plan.m}};
    if (!plan.diagnostic.empty())
        j["diagnostic"] = plan.diagnostic;
    return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace fcvqkd::io
