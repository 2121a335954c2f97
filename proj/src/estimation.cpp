#include "fcvqkd/estimation.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fcvqkd {

namespace {

void check_inputs(std::span<const double> M, std::span<const double> B, double V)
{
    if (M.size() != B.size())
        throw ParameterError("estimation: M and B differ in length");
    if (M.size() < 2)
        throw InsufficientDataError("estimation: need at least two pairs");
    if (!(V > 0.0))
        throw ParameterError("estimation: V must be positive");
}

double cross_sum(std::span<const double> M, std::span<const double> B)
{
    double s = 0.0;
    for (std::size_t j = 0; j < M.size(); ++j)
        s += M[j] * B[j];
    return s;
}

double residual_variance(std::span<const double> M, std::span<const double> B, double g)
{
    double ss = 0.0;
    for (std::size_t j = 0; j < M.size(); ++j) {
        const double e = B[j] - g * M[j];
        ss += e * e;
    }
    return ss / static_cast<double>(M.size() - 1);
}

}  // namespace

ValueWithSigma estimate_sqrtT(std::span<const double> M, std::span<const double> B, double V)
{
    check_inputs(M, B, V);
    const double k = static_cast<double>(M.size());
    const double s = cross_sum(M, B) / (V * k);
    const double T = s * s;
    const double vN = residual_variance(M, B, s);
    return {s, std::sqrt((2.0 * T + vN / V) / k)};
}

ValueWithSigma estimate_T(std::span<const double> M, std::span<const double> B, double V)
{
    const auto s = estimate_sqrtT(M, B, V);
    const double T = s.value * s.value;
    // sigma_T^2 = 4 T sigma_sqrtT^2
    return {T, 2.0 * std::abs(s.value) * s.sigma};
}

NoiseEstimate estimate_noise(std::span<const double> M, std::span<const double> B, double V, double V_S)
{
    check_inputs(M, B, V);
    const double k = static_cast<double>(M.size());
    const double s = cross_sum(M, B) / (V * k);
    NoiseEstimate out;
    out.vN_hat = residual_variance(M, B, s);
    out.eps_raw = out.vN_hat - 1.0 + s * s * (1.0 - V_S);
    out.eps_clamped = out.eps_raw < 0.0;
    out.eps_hat = std::max(0.0, out.eps_raw);
    return out;
}

PackageEstimate estimate_package(const Package& pkg, const ProtocolParams& p)
{
    if (pkg.M.size() != pkg.B.size())
        throw ValidationError("package: M and B differ in length");
    const std::size_t k = p.disclosed(pkg.M.size());
    if (k > pkg.M.size())
        throw InsufficientDataError("package holds fewer than two pairs");
    const std::span<const double> M(pkg.M.data(), k), B(pkg.B.data(), k);

    const auto s = estimate_sqrtT(M, B, p.V);
    const auto t = estimate_T(M, B, p.V);
    const auto noise = estimate_noise(M, B, p.V, p.V_S);

    PackageEstimate e;
    e.sqrtT_hat = s.value;
    e.T_hat = t.value;
    e.sigma_sqrtT = s.sigma;
    e.sigma_T = t.sigma;
    e.vN_hat = noise.vN_hat;
    e.eps_hat = noise.eps_hat;
    e.eps_clamped = noise.eps_clamped;
    e.sign_anomaly = s.value < 0.0;
    e.k = k;
    return e;
}

std::vector<PackageEstimate> estimate_run(const Run& run)
{
    std::vector<PackageEstimate> out(run.packages.size());
    parallel_for(out.size(), [&](std::size_t i) { out[i] = estimate_package(run.packages[i], run.protocol); });
    return out;
}

namespace {

double mean(const std::vector<double>& xs)
{
    double s = 0.0;
    for (double x : xs)
        s += x;
    return s / static_cast<double>(xs.size());
}

// Standard error of the mean of xs (sample sd / sqrt m).
double std_error(const std::vector<double>& xs)
{
    const double mu = mean(xs);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mu) * (x - mu);
    const double m = static_cast<double>(xs.size());
    return std::sqrt(ss / (m - 1.0) / m);
}

// a_i: per-package T estimate, b_i: per-package sqrtT estimate.
FluctuationEstimate fluctuation(const std::vector<double>& a, const std::vector<double>& b)
{
    const double a_bar = mean(a), b_bar = mean(b);
    std::vector<double> phi1(a.size()), phi2(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        phi1[i] = a[i] - 2.0 * b_bar * b[i];
        phi2[i] = a[i] + 2.0 * b_bar * b[i];
    }
    FluctuationEstimate f;
    f.mean_T = a_bar;
    f.se_mean_T = std_error(a);
    f.X1 = a_bar - b_bar * b_bar;
    f.X2 = a_bar + b_bar * b_bar;
    f.se_X1 = std_error(phi1);
    f.se_X2 = std_error(phi2);
    return f;
}

}  // namespace

AggregateStats aggregate(std::span<const PackageEstimate> estimates, const ProtocolParams& p)
{
    const std::size_t m = estimates.size();
    if (m < 2)
        throw InsufficientDataError("aggregate: need at least two packages");

    std::vector<double> s(m), t_raw(m), t_corr(m), var(m), vn(m), slope_bias(m);
    AggregateStats st;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& e = estimates[i];
        if (e.k < 2)
            throw InsufficientDataError("aggregate: package estimate built from fewer than two pairs");
        s[i] = e.sqrtT_hat;
        t_raw[i] = e.T_hat;
        var[i] = e.sigma_sqrtT * e.sigma_sqrtT;
        t_corr[i] = e.T_hat - var[i];
        vn[i] = e.vN_hat;
        // The residuals use the moment slope rather than the least-squares
        // one, which inflates E[vN_hat] by 2 T V / (k - 1) to leading order.
        slope_bias[i] = 2.0 * t_corr[i] * p.V / static_cast<double>(e.k - 1);
        st.k_total += e.k;
        st.sign_anomalies += e.sign_anomaly ? 1 : 0;
    }
    st.m_used = m;
    st.mean_sqrtT_hat = mean(s);
    st.se_mean_sqrtT = std_error(s);
    st.mean_T_hat = mean(t_raw);
    st.mean_estimator_var = mean(var);
    st.raw = fluctuation(t_raw, s);
    st.corrected = fluctuation(t_corr, s);
    st.X1_hat = st.corrected.X1;
    st.X2_hat = st.corrected.X2;
    st.se_X1 = st.corrected.se_X1;
    st.se_X2 = st.corrected.se_X2;
    st.mean_vN = mean(vn);
    st.eps_hat = st.mean_vN - mean(slope_bias) - 1.0 + st.corrected.mean_T * (1.0 - p.V_S);
    return st;
}

double eps_upper_bound(const AggregateStats& stats, double z_conf)
{
    if (stats.k_total < 2)
        throw InsufficientDataError("eps_upper_bound: no disclosed pairs");
    const double se = std::sqrt(2.0 / static_cast<double>(stats.k_total)) * stats.mean_vN;
    return std::max(0.0, stats.eps_hat + z_conf * se);
}

namespace {

void check_bound_inputs(double eps_up, double V_prime, double z_conf)
{
    if (!(z_conf >= 0.0))
        throw ParameterError("worst_case: z_conf must be non-negative");
    if (!(eps_up >= 0.0))
        throw ParameterError("worst_case: eps_up must be non-negative");
    if (!(V_prime >= 0.0))
        throw ParameterError("worst_case: V' must be non-negative");
}

WorstCaseChannel from_bounds(double X1_up, double X2_low, double eps_up, double V_prime)
{
    WorstCaseChannel wc;
    wc.X1_up = X1_up;
    wc.X2_low = X2_low;
    wc.eps_up = eps_up;
    wc.T_eff_low = (X2_low - X1_up) / 2.0;
    if (wc.T_eff_low < 0.0) {
        wc.T_eff_low = 0.0;
        wc.unusable = true;
    } else if (wc.T_eff_low > 1.0) {
        wc.T_eff_low = 1.0;
        wc.clamped_above = true;
    }
    wc.eps_eff_up = eps_up + X1_up * V_prime;
    return wc;
}

}  // namespace

WorstCaseChannel worst_case(const AggregateStats& stats, double eps_up, double V_prime, double z_conf,
                            NoiseFloor mode)
{
    check_bound_inputs(eps_up, V_prime, z_conf);
    const auto& f = stats.fluctuation(mode);
    const double X1_up = std::max(0.0, f.X1 + z_conf * f.se_X1);
    const double X2_low = f.X2 - z_conf * f.se_X2;
    return from_bounds(X1_up, X2_low, eps_up, V_prime);
}

WorstCaseChannel worst_case_rectangular(const AggregateStats& stats, double eps_up, double V_prime, double z_conf,
                                        NoiseFloor mode)
{
    check_bound_inputs(eps_up, V_prime, z_conf);
    const auto& f = stats.fluctuation(mode);
    const double T_up = f.mean_T + z_conf * f.se_mean_T;
    const double s_low = std::max(0.0, stats.mean_sqrtT_hat - z_conf * stats.se_mean_sqrtT);
    const double X1_up = std::max(0.0, T_up - s_low * s_low);
    const double X2_low = T_up + s_low * s_low;
    return from_bounds(X1_up, X2_low, eps_up, V_prime);
}

}  // namespace fcvqkd
