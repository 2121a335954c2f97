#pragma once

#include "fcvqkd/quadrature.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fcvqkd {

/// Uniform transmittance on [lo, hi] with 0 <= lo < hi <= 1.
struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};

/// Normal(mean, std) truncated to [0, 1] and renormalized.
struct TruncatedNormal {
    double mean = 0.5;
    double std = 0.1;
};

/// Beam-wandering (log-negative Weibull) fading law.
///
/// The beam centre is displaced by r ~ Rayleigh(sigma_b) (in units of the
/// aperture radius) and the transmittance is
///
///     T = peak * exp(-0.5 * (r / scale)^shape)
///
/// `peak`, `shape` and `scale` follow from the beam-spot-to-aperture ratio
/// W/a through the standard beam-wandering relations; see
/// make_log_negative_weibull(). They are stored explicitly so a descriptor
/// can pin or override them.
struct LogNegativeWeibull {
    double w_over_a = 1.25;
    double sigma_b = 0.8;
    double peak = 0.0;
    double shape = 0.0;
    double scale = 0.0;
};

/// Builds a LogNegativeWeibull with its shape constants derived from W/a.
LogNegativeWeibull make_log_negative_weibull(double w_over_a, double sigma_b);

/// Empirical transmittance trace. The density is a histogram whose bin
/// width follows the Freedman-Diaconis rule unless `bin_width` overrides it.
class Empirical {
public:
    explicit Empirical(std::vector<double> samples, double bin_width = 0.0);

    const std::vector<double>& samples() const noexcept { return samples_; }
    double bin_width() const noexcept { return width_; }
    bool bin_width_overridden() const noexcept { return overridden_; }
    double histogram_density(double t) const noexcept;

private:
    std::vector<double> samples_;
    bool overridden_ = false;
    double width_ = 0.0;
    double origin_ = 0.0;
    std::vector<double> heights_;
};

/// Fading-law model f(T). Always valid once constructed.
class TransmittanceDistribution {
public:
    using Variant = std::variant<Uniform, TruncatedNormal, LogNegativeWeibull, Empirical>;

    TransmittanceDistribution(Variant v);  // NOLINT: implicit on purpose

    static TransmittanceDistribution uniform(double lo, double hi) { return Variant{Uniform{lo, hi}}; }
    static TransmittanceDistribution truncated_normal(double mean, double std)
    {
        return Variant{TruncatedNormal{mean, std}};
    }
    static TransmittanceDistribution log_negative_weibull(double w_over_a, double sigma_b)
    {
        return Variant{make_log_negative_weibull(w_over_a, sigma_b)};
    }
    static TransmittanceDistribution empirical(std::vector<double> samples, double bin_width = 0.0)
    {
        return Variant{Empirical(std::move(samples), bin_width)};
    }

    const Variant& variant() const noexcept { return v_; }
    std::string kind() const;
    std::string label() const;

    /// Interval outside of which the density vanishes.
    std::pair<double, double> support() const noexcept;

private:
    Variant v_;
    double norm_ = 1.0;  // truncated-normal normalizer

    friend double density(const TransmittanceDistribution&, double);
};

struct Moments {
    double mean_T = 0.0;
    double mean_sqrtT = 0.0;
    double var_sqrtT = 0.0;  // <T> - <sqrt T>^2
};

/// f(t) for t in [0, 1]. Throws ParameterError outside that range.
double density(const TransmittanceDistribution& dist, double t);

/// `count` i.i.d. draws. Draw i depends only on (seed, i).
std::vector<double> sample(const TransmittanceDistribution& dist, std::uint64_t seed, std::size_t count);

/// Exact moments: adaptive quadrature for analytic laws, averaging for traces.
Moments moments(const TransmittanceDistribution& dist);

/// Integral of the density over [0, 1]; a diagnostic for the analytic laws.
double total_probability(const TransmittanceDistribution& dist);

/// Discrete probability measure {(t_j, w_j)} with sum w_j = 1 that
/// integrates smooth functions of T against f. Analytic laws use a
/// composite Gauss-Legendre rule in a variable that removes the sqrt(T)
/// endpoint behaviour; traces use their atoms.
std::vector<quad::Node> probability_nodes(const TransmittanceDistribution& dist, int panels = 256);

}  // namespace fcvqkd
