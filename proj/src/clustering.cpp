#include "fcvqkd/clustering.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fcvqkd {

namespace {

constexpr double empty_mass = 1e-14;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Weighted sums over the fading-law nodes of quantities whose cluster
// averages feed the expected aggregate statistics. Index 0/1 of u2 and uy
// select whether the estimator-noise floor is kept (0) or subtracted (1).
struct Sums {
    double w = 0.0, t = 0.0, s = 0.0, v = 0.0;
    double u2[2] = {0.0, 0.0};
    double uy[2] = {0.0, 0.0};

    Sums operator-(const Sums& o) const
    {
        Sums d;
        d.w = w - o.w;
        d.t = t - o.t;
        d.s = s - o.s;
        d.v = v - o.v;
        for (int q = 0; q < 2; ++q) {
            d.u2[q] = u2[q] - o.u2[q];
            d.uy[q] = uy[q] - o.uy[q];
        }
        return d;
    }
};

// The fading law as weighted nodes together with the per-node law of the
// package estimates at a fixed (k, V).
class Model {
public:
    Model(const std::vector<quad::Node>& nodes, std::size_t k, const ProtocolParams& p)
    {
        const double kd = static_cast<double>(k);
        const std::size_t count = nodes.size();
        t_.resize(count);
        w_.resize(count);
        s_.resize(count);
        v_.resize(count);
        sig_.resize(count);
        lo_ = unbounded;
        hi_ = -unbounded;
        for (std::size_t j = 0; j < count; ++j) {
            const double t = nodes[j].x;
            t_[j] = t;
            w_[j] = nodes[j].w;
            s_[j] = std::sqrt(t);
            v_[j] = (2.0 * t + p.V_N(t) / p.V) / kd;
            sig_[j] = std::sqrt(4.0 * t * v_[j]);
            lo_ = std::min(lo_, t - 8.5 * sig_[j]);
            hi_ = std::max(hi_, t + 8.5 * sig_[j]);
        }
        total_ = accumulate([](std::size_t) { return 1.0; });
    }

    const Sums& total() const noexcept { return total_; }

    // Prefix sums: every node weighted by P(T_hat <= x | T = t_j).
    Sums at(double x) const
    {
        if (x == -unbounded)
            return {};
        if (x == unbounded)
            return total_;
        return accumulate([&](std::size_t j) { return selection(j, x); });
    }

    double selection(std::size_t j, double x) const
    {
        if (sig_[j] > 0.0)
            return normal_cdf((x - t_[j]) / sig_[j]);
        return x >= t_[j] ? 1.0 : 0.0;
    }

    double cdf(double x) const
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < t_.size(); ++j)
            acc += w_[j] * selection(j, x);
        return acc / total_.w;
    }

    // Quantiles of the T_hat law at levels l / L, l = 1 .. L - 1.
    std::vector<double> quantiles(int L) const
    {
        constexpr int table_size = 512;
        std::vector<double> xs(table_size + 1), fs(table_size + 1);
        for (int i = 0; i <= table_size; ++i) {
            xs[i] = lo_ + (hi_ - lo_) * i / table_size;
            fs[i] = cdf(xs[i]);
        }
        fs.front() = 0.0;
        fs.back() = 1.0;
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(L - 1));
        std::size_t i = 0;
        for (int l = 1; l < L; ++l) {
            const double level = static_cast<double>(l) / L;
            while (i + 1 < xs.size() && fs[i + 1] < level)
                ++i;
            const double a = xs[i], b = xs[std::min(i + 1, xs.size() - 1)];
            auto g = [&](double x) {
                if (x <= a)
                    return fs[i] - level;
                if (x >= b)
                    return fs[std::min(i + 1, xs.size() - 1)] - level;
                return cdf(x) - level;
            };
            std::uintmax_t iters = 100;
            const auto root = boost::math::tools::toms748_solve(g, a, b, g(a), g(b),
                                                                boost::math::tools::eps_tolerance<double>(45), iters);
            out.push_back(0.5 * (root.first + root.second));
        }
        return out;
    }

private:
    template <class Weight>
    Sums accumulate(Weight weight) const
    {
        Sums acc;
        for (std::size_t j = 0; j < t_.size(); ++j) {
            const double ww = w_[j] * weight(j);
            if (ww == 0.0)
                continue;
            const double t = t_[j], s = s_[j], v = v_[j];
            acc.w += ww;
            acc.t += ww * t;
            acc.s += ww * s;
            acc.v += ww * v;
            for (int q = 0; q < 2; ++q) {
                // u = T_hat - q sigma^2 with T_hat = y^2, y ~ N(s, v).
                acc.u2[q] += ww * (t * t + 6.0 * t * v + 3.0 * v * v - 2.0 * q * v * (t + v) + q * q * v * v);
                acc.uy[q] += ww * s * (t + 3.0 * v - q * v);
            }
        }
        return acc;
    }

    std::vector<double> t_, w_, s_, v_, sig_;
    double lo_ = 0.0, hi_ = 1.0;
    Sums total_;
};

FluctuationEstimate expected_fluctuation(const Sums& c, double m_c, int q)
{
    const double W = c.w;
    const double mean_a = (c.t + c.v - q * c.v) / W;
    const double s_bar = c.s / W;
    const double e_a2 = c.u2[q] / W, e_ay = c.uy[q] / W, e_y2 = (c.t + c.v) / W;
    auto var_phi = [&](double coef) {
        const double e = mean_a + 2.0 * coef * s_bar;
        return std::max(0.0, e_a2 + 4.0 * coef * e_ay + 4.0 * coef * coef * e_y2 - e * e);
    };
    FluctuationEstimate f;
    f.mean_T = mean_a;
    f.se_mean_T = std::sqrt(std::max(0.0, e_a2 - mean_a * mean_a) / m_c);
    f.X1 = mean_a - s_bar * s_bar;
    f.X2 = mean_a + s_bar * s_bar;
    f.se_X1 = std::sqrt(var_phi(-s_bar) / m_c);
    f.se_X2 = std::sqrt(var_phi(s_bar) / m_c);
    return f;
}

struct EvalContext {
    std::size_t n, m, k;
    const ProtocolParams& p;
    double min_mass;
};

ClusterReport evaluate_cluster(const Sums& c, Interval iv, const EvalContext& ctx)
{
    ClusterReport rep;
    rep.interval = iv;
    rep.mass = std::max(0.0, c.w);
    if (rep.mass < empty_mass) {
        rep.empty = true;
        rep.too_small = true;
        return rep;
    }
    const double W = c.w;
    rep.cond_moments.mean_T = c.t / W;
    rep.cond_moments.mean_sqrtT = c.s / W;
    rep.cond_moments.var_sqrtT =
        std::max(0.0, rep.cond_moments.mean_T - rep.cond_moments.mean_sqrtT * rep.cond_moments.mean_sqrtT);
    rep.m_c = rep.mass * static_cast<double>(ctx.m);
    rep.N_c = rep.m_c * static_cast<double>(ctx.n);
    rep.low_mass = rep.mass < 0.01;
    if (rep.m_c < 2.0 || rep.mass < ctx.min_mass) {
        rep.too_small = true;
        return rep;
    }

    auto& st = rep.stats;
    const double s_bar = c.s / W;
    st.mean_sqrtT_hat = s_bar;
    st.se_mean_sqrtT = std::sqrt(std::max(0.0, (c.t + c.v) / W - s_bar * s_bar) / rep.m_c);
    st.mean_T_hat = (c.t + c.v) / W;
    st.mean_estimator_var = c.v / W;
    st.raw = expected_fluctuation(c, rep.m_c, 0);
    st.corrected = expected_fluctuation(c, rep.m_c, 1);
    st.X1_hat = st.corrected.X1;
    st.X2_hat = st.corrected.X2;
    st.se_X1 = st.corrected.se_X1;
    st.se_X2 = st.corrected.se_X2;
    st.m_used = static_cast<std::size_t>(rep.m_c);
    st.k_total = static_cast<std::size_t>(rep.m_c * static_cast<double>(ctx.k));
    st.mean_vN = ctx.p.V_N(rep.cond_moments.mean_T);
    st.eps_hat = ctx.p.epsilon;

    const double z = ctx.p.z_conf;
    const double eps_up =
        ctx.p.epsilon + z * std::sqrt(2.0 / (static_cast<double>(ctx.k) * rep.m_c)) * st.mean_vN;
    rep.wc = worst_case(st, eps_up, ctx.p.V_prime(), z, ctx.p.noise_floor);
    rep.rate = key_rate(rep.wc, rep.N_c, ctx.p);
    rep.K_c = rep.rate.K;
    return rep;
}

void check_interval(Interval iv)
{
    if (std::isnan(iv.lo) || std::isnan(iv.hi) || !(iv.lo < iv.hi))
        throw ParameterError("cluster interval needs lo < hi");
}

std::vector<double> checked_edges(std::span<const double> edges)
{
    if (edges.empty())
        return {-unbounded, unbounded};
    if (edges.size() < 2)
        throw ParameterError("cluster edges: need at least two values");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (std::isnan(edges[i]))
            throw ParameterError("cluster edges: NaN");
        if (i > 0 && edges[i] < edges[i - 1])
            throw ParameterError("cluster edges must be non-decreasing");
    }
    return {edges.begin(), edges.end()};
}

ClusterPlan evaluate_plan(const Model& model, std::vector<double> edges, std::size_t C, const EvalContext& ctx)
{
    ClusterPlan plan;
    plan.C = C;
    plan.r = ctx.p.r;
    plan.V = ctx.p.V;
    plan.n = ctx.n;
    plan.m = ctx.m;
    std::vector<Sums> prefix(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i)
        prefix[i] = model.at(edges[i]);
    double kept = 0.0;
    for (std::size_t c = 0; c + 1 < edges.size(); ++c) {
        auto rep = evaluate_cluster(prefix[c + 1] - prefix[c], {edges[c], edges[c + 1]}, ctx);
        kept += rep.mass;
        plan.total_rate += rep.mass * rep.K_c;
        plan.per_cluster.push_back(rep);
    }
    plan.discarded_mass = std::max(0.0, 1.0 - kept / model.total().w);
    plan.edges = std::move(edges);
    return plan;
}

}  // namespace

ConditionalDensity::ConditionalDensity(TransmittanceDistribution f, Interval interval, std::size_t k, ProtocolParams p)
    : f_(std::move(f)), interval_(interval), k_(k), p_(p)
{
    check_interval(interval);
    if (k < 2)
        throw ParameterError("conditional_pdf: k must be at least 2");
    p_.validate();
    // The selection edge has width sigma_T at the interval ends; the node
    // spacing must stay well below it or the mass picks up a step error.
    int panels = 256;
    for (double x : {interval.lo, interval.hi}) {
        if (!(x > 0.0 && x <= 1.0))
            continue;
        const double v = (2.0 * x + p_.V_N(x) / p_.V) / static_cast<double>(k_);
        const double sig = std::sqrt(4.0 * x * v);
        panels = std::max(panels, static_cast<int>(std::min(2.0e5, std::ceil(4.0 / sig))));
    }
    const Model model(probability_nodes(f_, panels), k_, p_);
    const Sums c = model.at(interval.hi) - model.at(interval.lo);
    mass_ = std::max(0.0, c.w / model.total().w);
    if (mass_ < empty_mass)
        throw EmptyClusterError("conditional_pdf: no estimates fall in the interval");
    moments_.mean_T = c.t / c.w;
    moments_.mean_sqrtT = c.s / c.w;
    moments_.var_sqrtT = std::max(0.0, moments_.mean_T - moments_.mean_sqrtT * moments_.mean_sqrtT);
}

double ConditionalDensity::selection_probability(double s) const
{
    if (!(s >= 0.0 && s <= 1.0))
        throw ParameterError("conditional density: s outside [0, 1]");
    const double v = (2.0 * s + p_.V_N(s) / p_.V) / static_cast<double>(k_);
    const double sig = std::sqrt(4.0 * s * v);
    auto Phi = [&](double x) {
        if (x == -unbounded)
            return 0.0;
        if (x == unbounded)
            return 1.0;
        if (sig > 0.0)
            return normal_cdf((x - s) / sig);
        return x >= s ? 1.0 : 0.0;
    };
    return Phi(interval_.hi) - Phi(interval_.lo);
}

double ConditionalDensity::operator()(double s) const
{
    return density(f_, s) * selection_probability(s) / mass_;
}

ConditionalDensity conditional_pdf(const TransmittanceDistribution& f, Interval interval, std::size_t k,
                                   const ProtocolParams& p)
{
    return ConditionalDensity(f, interval, k, p);
}

ClusterReport cluster_stats(const TransmittanceDistribution& f, Interval interval, std::size_t n, std::size_t m,
                            const ProtocolParams& p)
{
    check_interval(interval);
    if (n < 2 || m < 1)
        throw ParameterError("cluster_stats: need n >= 2 and m >= 1");
    p.validate();
    const std::size_t k = p.disclosed(n);
    const Model model(probability_nodes(f), k, p);
    const EvalContext ctx{n, m, k, p, 0.0};
    auto rep = evaluate_cluster(model.at(interval.hi) - model.at(interval.lo), interval, ctx);
    if (rep.empty)
        throw EmptyClusterError("cluster_stats: no estimates fall in the interval");
    if (rep.too_small)
        throw ClusterTooSmallError("cluster_stats: fewer than two packages expected in the cluster");
    return rep;
}

ClusterPlan total_key_rate(const TransmittanceDistribution& f, std::span<const double> edges, std::size_t n,
                           std::size_t m, const ProtocolParams& p, const EvaluationSettings& settings)
{
    if (n < 2 || m < 1)
        throw ParameterError("total_key_rate: need n >= 2 and m >= 1");
    p.validate();
    auto e = checked_edges(edges);
    const std::size_t C = edges.empty() ? 0 : e.size() - 1;
    const std::size_t k = p.disclosed(n);
    const Model model(probability_nodes(f, settings.panels), k, p);
    return evaluate_plan(model, std::move(e), C, EvalContext{n, m, k, p, settings.min_mass});
}

namespace {

struct Candidate {
    double value = -1.0;
    double r = 0.0, V = 0.0;
    std::vector<double> edges;
};

// Best layouts for every C <= C_max at one (r, V) using boundaries drawn
// from the T_hat quantiles at resolution 1 / L.
std::vector<Candidate> best_layouts(const std::vector<quad::Node>& nodes, std::size_t C_max, std::size_t n,
                                    std::size_t m, const ProtocolParams& p, int L, double min_mass)
{
    const std::size_t k = p.disclosed(n);
    const Model model(nodes, k, p);
    const EvalContext ctx{n, m, k, p, min_mass};

    if (C_max == 0) {
        const auto rep = evaluate_cluster(model.total(), {}, ctx);
        return {Candidate{rep.mass * rep.K_c, p.r, p.V, {-unbounded, unbounded}}};
    }

    std::vector<double> bounds;
    bounds.reserve(static_cast<std::size_t>(L) + 1);
    bounds.push_back(-unbounded);
    for (double q : model.quantiles(L))
        bounds.push_back(q);
    bounds.push_back(unbounded);
    const std::size_t B = bounds.size();

    std::vector<Sums> prefix(B);
    for (std::size_t i = 0; i < B; ++i)
        prefix[i] = model.at(bounds[i]);

    // value[i][j]: mass * K of the cluster [bounds[i], bounds[j]].
    std::vector<double> value(B * B, 0.0);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = i + 1; j < B; ++j) {
            const auto rep = evaluate_cluster(prefix[j] - prefix[i], {bounds[i], bounds[j]}, ctx);
            value[i * B + j] = rep.mass * rep.K_c;
        }

    std::vector<Candidate> out(C_max + 1);
    out[0].value = value[B - 1];
    out[0].edges = {-unbounded, unbounded};

    // best[c][j]: best total of c clusters whose last edge is bounds[j].
    std::vector<std::vector<double>> best(C_max + 1, std::vector<double>(B, 0.0));
    std::vector<std::vector<std::size_t>> from(C_max + 1, std::vector<std::size_t>(B, 0));
    for (std::size_t j = 0; j < B; ++j)
        from[0][j] = j;
    for (std::size_t c = 1; c <= C_max; ++c) {
        for (std::size_t j = 0; j < B; ++j) {
            double top = -1.0;
            std::size_t arg = 0;
            for (std::size_t i = 0; i <= j; ++i) {
                const double cand = best[c - 1][i] + (i < j ? value[i * B + j] : 0.0);
                if (cand > top) {
                    top = cand;
                    arg = i;
                }
            }
            best[c][j] = top;
            from[c][j] = arg;
        }
        std::size_t end = 0;
        for (std::size_t j = 1; j < B; ++j)
            if (best[c][j] > best[c][end])
                end = j;
        std::vector<double> edges(c + 1);
        std::size_t j = end;
        for (std::size_t cc = c; cc > 0; --cc) {
            edges[cc] = bounds[j];
            j = from[cc][j];
        }
        edges[0] = bounds[j];
        out[c].value = best[c][end];
        out[c].edges = std::move(edges);
    }
    for (auto& cand : out) {
        cand.r = p.r;
        cand.V = p.V;
    }
    return out;
}

std::vector<double> geometric_grid(double lo, double hi, int count)
{
    std::vector<double> xs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        xs[static_cast<std::size_t>(i)] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    return xs;
}

}  // namespace

std::vector<ClusterPlan> optimize_sweep(const TransmittanceDistribution& f, std::size_t C_max, std::size_t n,
                                        std::size_t m, const ProtocolParams& p_template,
                                        const OptimizerSettings& settings)
{
    if (n < 2 || m < 1)
        throw ParameterError("optimize: need n >= 2 and m >= 1");
    if (settings.grid_points < 1 || settings.quantile_levels < 2 || settings.refine_passes < 0)
        throw ParameterError("optimize: invalid optimizer settings");
    p_template.validate();
    // Keep V' = V + V_S - 1 non-negative so the worst-case direction of the
    // fluctuation bound is well defined.
    const double V_lo = std::max(settings.V_min, 1.0 - p_template.V_S);
    const double r_lo = settings.r_min, r_hi = settings.r_max, V_hi = settings.V_max;
    if (!(r_lo > 0.0 && r_lo <= r_hi && r_hi < 1.0 && V_lo > 0.0 && V_lo <= V_hi))
        throw ParameterError("optimize: invalid search ranges");

    const auto nodes = probability_nodes(f, settings.panels);
    const auto rs = geometric_grid(r_lo, r_hi, settings.grid_points);
    const auto Vs = geometric_grid(V_lo, V_hi, settings.grid_points);
    const std::size_t G = static_cast<std::size_t>(settings.grid_points);

    auto at = [&](double r, double V, int L) {
        ProtocolParams p = p_template;
        p.r = r;
        p.V = V;
        return best_layouts(nodes, C_max, n, m, p, L, settings.min_mass);
    };

    // Coarse grid, r outer and V inner; ties keep the earlier point.
    std::vector<std::vector<Candidate>> coarse(G * G);
    parallel_for(G * G, [&](std::size_t idx) {
        coarse[idx] = at(rs[idx / G], Vs[idx % G], settings.quantile_levels);
    });

    const double step_r = G > 1 ? std::log(r_hi / r_lo) / static_cast<double>(G - 1) : 0.0;
    const double step_V = G > 1 ? std::log(V_hi / V_lo) / static_cast<double>(G - 1) : 0.0;
    const int L_final = settings.quantile_levels << settings.refine_passes;

    std::vector<ClusterPlan> plans;
    Candidate previous;
    for (std::size_t C = 0; C <= C_max; ++C) {
        Candidate best;
        for (const auto& point : coarse)
            if (point[C].value > best.value)
                best = point[C];

        for (int pass = 1; pass <= settings.refine_passes; ++pass) {
            const double scale = std::ldexp(1.0, -pass);
            const int L = settings.quantile_levels << pass;
            std::vector<std::pair<double, double>> pts;
            for (int i = -1; i <= 1; ++i)
                for (int j = -1; j <= 1; ++j)
                    pts.emplace_back(std::clamp(best.r * std::exp(i * scale * step_r), r_lo, r_hi),
                                     std::clamp(best.V * std::exp(j * scale * step_V), V_lo, V_hi));
            std::vector<Candidate> found(pts.size());
            parallel_for(pts.size(), [&](std::size_t q) { found[q] = at(pts[q].first, pts[q].second, L)[C]; });
            Candidate pass_best;
            for (auto& cand : found)
                if (cand.value > pass_best.value)
                    pass_best = std::move(cand);
            best = std::move(pass_best);
        }

        if (C > 0) {
            // The previous optimum with one more (possibly empty) cluster.
            auto seeded = at(previous.r, previous.V, L_final)[C];
            if (seeded.value > best.value)
                best = std::move(seeded);
        }
        previous = best;

        ProtocolParams p = p_template;
        p.r = best.r;
        p.V = best.V;
        const std::size_t k = p.disclosed(n);
        const Model model(nodes, k, p);
        auto plan = evaluate_plan(model, best.edges, C, EvalContext{n, m, k, p, settings.min_mass});
        if (!(plan.total_rate > 0.0))
            plan.diagnostic = "no positive key rate anywhere on the search grid";
        plans.push_back(std::move(plan));
    }
    return plans;
}

ClusterPlan optimize(const TransmittanceDistribution& f, std::size_t C, std::size_t n, std::size_t m,
                     const ProtocolParams& p_template, const OptimizerSettings& settings)
{
    return optimize_sweep(f, C, n, m, p_template, settings).back();
}

ClusterPlan empirical_key_rate(std::span<const PackageEstimate> estimates, std::span<const double> edges,
                               std::size_t n, const ProtocolParams& p)
{
    if (estimates.empty())
        throw InsufficientDataError("empirical_key_rate: no package estimates");
    p.validate();
    auto e = checked_edges(edges);
    ClusterPlan plan;
    plan.C = edges.empty() ? 0 : e.size() - 1;
    plan.r = p.r;
    plan.V = p.V;
    plan.n = n;
    plan.m = estimates.size();
    const double m = static_cast<double>(estimates.size());
    double kept = 0.0;
    for (std::size_t c = 0; c + 1 < e.size(); ++c) {
        const bool last = c + 2 == e.size();
        std::vector<PackageEstimate> members;
        for (const auto& est : estimates)
            if (est.T_hat >= e[c] && (est.T_hat < e[c + 1] || (last && est.T_hat <= e[c + 1])))
                members.push_back(est);

        ClusterReport rep;
        rep.interval = {e[c], e[c + 1]};
        rep.mass = static_cast<double>(members.size()) / m;
        rep.m_c = static_cast<double>(members.size());
        rep.N_c = rep.m_c * static_cast<double>(n);
        rep.empty = members.empty();
        rep.low_mass = rep.mass < 0.01;
        kept += rep.mass;
        if (members.size() < 2) {
            rep.too_small = true;
            plan.per_cluster.push_back(rep);
            continue;
        }
        rep.stats = aggregate(members, p);
        const auto& fl = rep.stats.corrected;
        rep.cond_moments = {fl.mean_T, rep.stats.mean_sqrtT_hat, std::max(0.0, fl.X1)};
        const double eps_up = eps_upper_bound(rep.stats, p.z_conf);
        rep.wc = worst_case(rep.stats, eps_up, p.V_prime(), p.z_conf, p.noise_floor);
        rep.rate = key_rate(rep.wc, rep.N_c, p);
        rep.K_c = rep.rate.K;
        plan.total_rate += rep.mass * rep.K_c;
        plan.per_cluster.push_back(rep);
    }
    plan.discarded_mass = std::max(0.0, 1.0 - kept);
    plan.edges = std::move(e);
    return plan;
}

AsymptoticOptimum asymptotic_optimum(const TransmittanceDistribution& f, const ProtocolParams& p_template,
                                     const OptimizerSettings& settings)
{
    p_template.validate();
    const Moments mo = moments(f);
    const double V_lo = std::max(settings.V_min, 1.0 - p_template.V_S), V_hi = settings.V_max;
    auto rate = [&](double V) {
        ProtocolParams p = p_template;
        p.V = V;
        const EffectiveChannel ch{mo.mean_sqrtT * mo.mean_sqrtT, p.epsilon + mo.var_sqrtT * p.V_prime()};
        return asymptotic_rate(ch, p);
    };
    constexpr int points = 200;
    const auto grid = geometric_grid(V_lo, V_hi, points);
    std::size_t best = 0;
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        values[i] = rate(grid[i]);
        if (values[i] > values[best])
            best = i;
    }
    const double a = grid[best == 0 ? 0 : best - 1], b = grid[std::min(best + 1, grid.size() - 1)];
    std::uintmax_t iters = 200;
    const auto res = boost::math::tools::brent_find_minima([&](double V) { return -rate(V); }, a, b, 50, iters);
    AsymptoticOptimum out;
    out.V = -res.second >= values[best] ? res.first : grid[best];
    out.K_inf = std::max(-res.second, values[best]);
    ProtocolParams p = p_template;
    p.V = out.V;
    out.channel = {mo.mean_sqrtT * mo.mean_sqrtT, p.epsilon + mo.var_sqrtT * p.V_prime()};
    return out;
}

}  // namespace fcvqkd
