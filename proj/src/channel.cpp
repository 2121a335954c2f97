#include "fcvqkd/channel.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/parallel.hpp"
#include "fcvqkd/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace fcvqkd {

std::size_t ProtocolParams::disclosed(std::size_t n) const
{
    const auto k = static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 2, std::max<std::size_t>(n, 2));
}

void ProtocolParams::validate() const
{
    if (!(V > 0.0) || !std::isfinite(V))
        throw ParameterError("protocol: V must be positive");
    if (!(V_S > 0.0) || !std::isfinite(V_S))
        throw ParameterError("protocol: V_S must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ParameterError("protocol: epsilon must be non-negative");
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ParameterError("protocol: beta must lie in [0, 1]");
    if (!(r > 0.0 && r < 1.0))
        throw ParameterError("protocol: r must lie in (0, 1)");
    if (!(eps_PE > 0.0 && eps_PE < 1.0) || !(eps_bar > 0.0 && eps_bar < 1.0))
        throw ParameterError("protocol: eps_PE and eps_bar must lie in (0, 1)");
    if (!(z_conf >= 0.0) || !std::isfinite(z_conf))
        throw ParameterError("protocol: z_conf must be non-negative");
}

double z_from_probability(double eps)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw ParameterError("z_from_probability: eps must lie in (0, 1)");
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), eps));
}

Package simulate_package(double T, const ProtocolParams& p, std::size_t n, std::uint64_t seed)
{
    if (!(T >= 0.0 && T <= 1.0))
        throw ParameterError("simulate_package: T outside [0, 1]");
    if (n < 2)
        throw ParameterError("simulate_package: n must be at least 2");
    p.validate();
    const double v_n = p.V_N(T);
    if (!(v_n >= 0.0))
        throw ParameterError("simulate_package: negative channel noise variance");

    Package pkg;
    pkg.true_T = T;
    pkg.M.resize(n);
    pkg.B.resize(n);
    Stream rng(seed);
    const double sd_m = std::sqrt(p.V), sd_n = std::sqrt(v_n), gain = std::sqrt(T);
    for (std::size_t j = 0; j < n; ++j) {
        const double m = sd_m * rng.normal();
        pkg.M[j] = m;
        pkg.B[j] = gain * m + sd_n * rng.normal();
    }
    return pkg;
}

Run simulate_run(const TransmittanceDistribution& dist, const ProtocolParams& p, std::size_t n, std::size_t m,
                 std::uint64_t seed)
{
    if (n < 2 || m < 1)
        throw ParameterError("simulate_run: need n >= 2 and m >= 1");
    p.validate();
    const auto ts = sample(dist, derive_seed(seed, tag_transmittance, 0), m);
    std::vector<Package> packages(m);
    parallel_for(m, [&](std::size_t i) { packages[i] = simulate_package(ts[i], p, n, derive_seed(seed, tag_package, i)); });
    return Run{std::move(packages), dist, p, seed, n};
}

}  // namespace fcvqkd
