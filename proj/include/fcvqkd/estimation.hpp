#pragma once

#include "fcvqkd/channel.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fcvqkd {

struct ValueWithSigma {
    double value = 0.0;
    double sigma = 0.0;  // predicted standard deviation
};

struct NoiseEstimate {
    double vN_hat = 0.0;   // residual variance of B - sqrtT_hat * M
    double eps_hat = 0.0;  // implied excess noise, clamped at 0
    double eps_raw = 0.0;  // before clamping
    bool eps_clamped = false;
};

struct PackageEstimate {
    double sqrtT_hat = 0.0;
    double T_hat = 0.0;
    double sigma_sqrtT = 0.0;
    double sigma_T = 0.0;
    double vN_hat = 0.0;
    double eps_hat = 0.0;
    std::size_t k = 0;
    bool sign_anomaly = false;  // sqrtT_hat < 0
    bool eps_clamped = false;
};

/// sqrtT_hat = sum(M B) / (V k) with its predicted spread
/// sigma^2 = (2 T + V_N / V) / k evaluated at the plug-in (T_hat, vN_hat).
ValueWithSigma estimate_sqrtT(std::span<const double> M, std::span<const double> B, double V);

/// T_hat = sqrtT_hat^2 with sigma_T^2 = 4 T (2 T + V_N / V) / k.
ValueWithSigma estimate_T(std::span<const double> M, std::span<const double> B, double V);

NoiseEstimate estimate_noise(std::span<const double> M, std::span<const double> B, double V, double V_S);

/// Estimates from the first k = round(r n) pairs of the package.
PackageEstimate estimate_package(const Package& pkg, const ProtocolParams& p);

std::vector<PackageEstimate> estimate_run(const Run& run);

/// Moment estimates of the fluctuation variables X1 = <T> - <sqrtT>^2 and
/// X2 = <T> + <sqrtT>^2 with delta-method standard errors.
struct FluctuationEstimate {
    double mean_T = 0.0;
    double se_mean_T = 0.0;
    double X1 = 0.0;
    double X2 = 0.0;
    double se_X1 = 0.0;
    double se_X2 = 0.0;
};

struct AggregateStats {
    double mean_sqrtT_hat = 0.0;
    double se_mean_sqrtT = 0.0;
    double mean_T_hat = 0.0;
    double mean_estimator_var = 0.0;  // mean predicted Var(sqrtT_hat)

    // Headline values with the estimator-noise floor removed.
    double X1_hat = 0.0;
    double X2_hat = 0.0;
    double se_X1 = 0.0;
    double se_X2 = 0.0;

    FluctuationEstimate corrected;  // noise floor subtracted
    FluctuationEstimate raw;        // noise floor kept

    double mean_vN = 0.0;
    double eps_hat = 0.0;  // pooled excess-noise estimate
    std::size_t k_total = 0;
    std::size_t m_used = 0;
    std::size_t sign_anomalies = 0;

    const FluctuationEstimate& fluctuation(NoiseFloor mode) const noexcept
    {
        return mode == NoiseFloor::keep ? raw : corrected;
    }
};

/// Deterministic fold over the package estimates. Needs at least two.
AggregateStats aggregate(std::span<const PackageEstimate> estimates, const ProtocolParams& p);

/// Upper confidence bound on the excess noise pooled over the packages.
double eps_upper_bound(const AggregateStats& stats, double z_conf);

struct WorstCaseChannel {
    double T_eff_low = 0.0;
    double eps_eff_up = 0.0;
    double X1_up = 0.0;
    double X2_low = 0.0;
    double eps_up = 0.0;
    bool unusable = false;       // bounds crossed, T_eff_low clamped to 0
    bool clamped_above = false;  // T_eff_low clamped to 1
};

/// X1_up = max(0, X1 + z se_X1), X2_low = X2 - z se_X2,
/// T_eff_low = (X2_low - X1_up) / 2, eps_eff_up = eps_up + X1_up V'.
WorstCaseChannel worst_case(const AggregateStats& stats, double eps_up, double V_prime, double z_conf,
                            NoiseFloor mode = NoiseFloor::keep);

/// Baseline with separate intervals for <T> and <sqrtT>:
/// Var bound = <T>^UP - (<sqrtT>^LOW)^2.
WorstCaseChannel worst_case_rectangular(const AggregateStats& stats, double eps_up, double V_prime, double z_conf,
                                        NoiseFloor mode = NoiseFloor::keep);

}  // namespace fcvqkd
