#pragma once

#include "fcvqkd/distributions.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fcvqkd {

/// How the estimator-noise floor enters the fluctuation estimate fed to the
/// key rate: `keep` uses the raw spread of the estimates (conservative),
/// `subtract` removes the average predicted estimator variance.
enum class NoiseFloor { keep, subtract };

/// Signal ensemble assumed by the Holevo evaluation.
///  - both_quadratures: symmetric Gaussian modulation of x and p.
///  - squeezed_quadrature: x-squeezed states displaced along x only.
///  - auto_select: squeezed_quadrature when V_S < 1, otherwise both_quadratures.
enum class Modulation { auto_select, both_quadratures, squeezed_quadrature };

struct ProtocolParams {
    double V = 2.5;         // modulation variance (SNU)
    double V_S = 0.1;       // signal-state quadrature variance (SNU)
    double epsilon = 0.01;  // channel excess noise (SNU)
    double beta = 0.95;     // reconciliation efficiency
    double r = 0.2;         // fraction of each package disclosed for estimation
    double eps_PE = 1e-10;  // parameter-estimation failure probability
    double eps_bar = 1e-10; // smoothing parameter in the privacy-amplification term
    double z_conf = 2.0;    // confidence multiplier
    NoiseFloor noise_floor = NoiseFloor::keep;
    Modulation modulation = Modulation::auto_select;

    /// V' = V + V_S - 1.
    double V_prime() const noexcept { return V + V_S - 1.0; }

    /// Variance of the aggregated channel noise at transmittance T.
    double V_N(double T) const noexcept { return 1.0 + epsilon - T * (1.0 - V_S); }

    /// Number of disclosed pairs in a package of n states (at least 2).
    std::size_t disclosed(std::size_t n) const;

    /// Throws ParameterError when a field is outside its domain.
    void validate() const;
};

/// Multiplier z with P(N(0,1) > z) = eps (one-sided normal quantile).
double z_from_probability(double eps);

struct Package {
    double true_T = 0.0;
    std::vector<double> M;
    std::vector<double> B;
};

struct Run {
    std::vector<Package> packages;
    TransmittanceDistribution dist;
    ProtocolParams protocol;
    std::uint64_t seed = 0;
    std::size_t n = 0;
};

/// n pairs through a channel of fixed transmittance T.
Package simulate_package(double T, const ProtocolParams& p, std::size_t n, std::uint64_t seed);

/// m packages with T_i drawn i.i.d. from `dist`; package i only depends on
/// (seed, i), so growing m keeps earlier packages unchanged.
Run simulate_run(const TransmittanceDistribution& dist, const ProtocolParams& p, std::size_t n, std::size_t m,
                 std::uint64_t seed);

}  // namespace fcvqkd
