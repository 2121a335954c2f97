#include "fcvqkd/distributions.hpp"

#include "fcvqkd/errors.hpp"
#include "fcvqkd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace fcvqkd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Linear-interpolation quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q)
{
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Transmittance reached at Rayleigh quantile p of the beam displacement.
double weibull_transmittance(const LogNegativeWeibull& w, double p)
{
    const double u = std::sqrt(-2.0 * std::log1p(-p));
    const double r = w.sigma_b * u;
    return w.peak * std::exp(-0.5 * std::pow(r / w.scale, w.shape));
}

void validate(const Uniform& u)
{
    if (!(u.lo >= 0.0 && u.lo < u.hi && u.hi <= 1.0))
        throw ParameterError("uniform transmittance needs 0 <= lo < hi <= 1");
}

double validate(const TruncatedNormal& n)
{
    if (!std::isfinite(n.mean) || !(n.std > 0.0) || !std::isfinite(n.std))
        throw ParameterError("truncated normal needs a finite mean and std > 0");
    const double z = normal_cdf((1.0 - n.mean) / n.std) - normal_cdf(-n.mean / n.std);
    if (!(z > 1e-12))
        throw ParameterError("truncated normal has no mass on [0, 1]");
    return z;
}

void validate(const LogNegativeWeibull& w)
{
    if (!(w.sigma_b > 0.0) || !std::isfinite(w.sigma_b))
        throw ParameterError("log-negative Weibull needs sigma_b > 0");
    if (!(w.peak > 0.0 && w.peak <= 1.0) || !(w.shape > 0.0) || !(w.scale > 0.0))
        throw ParameterError("log-negative Weibull shape constants out of range");
}

}  // namespace

LogNegativeWeibull make_log_negative_weibull(double w_over_a, double sigma_b)
{
    if (!(w_over_a >= 0.1 && w_over_a <= 100.0))
        throw ParameterError("log-negative Weibull needs 0.1 <= W/a <= 100");
    if (!(sigma_b > 0.0))
        throw ParameterError("log-negative Weibull needs sigma_b > 0");

    // Beam-wandering relations with x = a^2 / W^2; e0, e1 are the scaled
    // modified Bessel functions exp(-4x) I_{0,1}(4x).
    const double x = 1.0 / (w_over_a * w_over_a);
    const double peak = -std::expm1(-2.0 * x);
    const double e0 = std::exp(-4.0 * x) * std::cyl_bessel_i(0.0, 4.0 * x);
    const double e1 = std::exp(-4.0 * x) * std::cyl_bessel_i(1.0, 4.0 * x);
    const double log_term = std::log(2.0 * peak / (1.0 - e0));
    if (!(log_term > 0.0))
        throw ParameterError("log-negative Weibull: W/a outside the beam-wandering regime");
    const double shape = 8.0 * x * e1 / (1.0 - e0) / log_term;
    const double scale = std::pow(log_term, -1.0 / shape);
    return {w_over_a, sigma_b, peak, shape, scale};
}

Empirical::Empirical(std::vector<double> samples, double bin_width)
    : samples_(std::move(samples)), overridden_(bin_width > 0.0)
{
    if (samples_.empty())
        throw ParameterError("empirical distribution needs at least one sample");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!(samples_[i] >= 0.0 && samples_[i] <= 1.0)) {
            std::ostringstream msg;
            msg << "empirical sample " << i << " = " << samples_[i] << " outside [0, 1]";
            throw ParameterError(msg.str());
        }
    }
    if (bin_width < 0.0 || !std::isfinite(bin_width))
        throw ParameterError("empirical bin width must be positive");

    std::vector<double> sorted = samples_;
    std::sort(sorted.begin(), sorted.end());
    width_ = bin_width;
    if (!overridden_) {
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        width_ = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
        // Degenerate traces (zero IQR) fall back to a fixed 0.01 bin.
        if (!(width_ > 0.0))
            width_ = 0.01;
    }
    origin_ = sorted.front();
    const auto bins = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil((sorted.back() - origin_) / width_)));
    heights_.assign(bins, 0.0);
    for (double t : sorted) {
        auto b = static_cast<std::size_t>((t - origin_) / width_);
        heights_[std::min(b, bins - 1)] += 1.0;
    }
    const double scale = 1.0 / (static_cast<double>(sorted.size()) * width_);
    for (double& h : heights_)
        h *= scale;
}

double Empirical::histogram_density(double t) const noexcept
{
    if (t < origin_)
        return 0.0;
    const double pos = (t - origin_) / width_;
    if (pos > static_cast<double>(heights_.size()))
        return 0.0;
    const auto b = std::min(static_cast<std::size_t>(pos), heights_.size() - 1);
    return heights_[b];
}

TransmittanceDistribution::TransmittanceDistribution(Variant v) : v_(std::move(v))
{
    std::visit(overloaded{
                   [](const Uniform& u) { validate(u); },
                   [this](const TruncatedNormal& n) { norm_ = validate(n); },
                   [](const LogNegativeWeibull& w) { validate(w); },
                   [](const Empirical&) {},
               },
               v_);
}

std::string TransmittanceDistribution::kind() const
{
    return std::visit(overloaded{
                          [](const Uniform&) { return std::string("uniform"); },
                          [](const TruncatedNormal&) { return std::string("truncated_normal"); },
                          [](const LogNegativeWeibull&) { return std::string("log_negative_weibull"); },
                          [](const Empirical&) { return std::string("empirical"); },
                      },
                      v_);
}

std::string TransmittanceDistribution::label() const
{
    std::ostringstream out;
    std::visit(overloaded{
                   [&](const Uniform& u) { out << "Uniform[" << u.lo << "," << u.hi << "]"; },
                   [&](const TruncatedNormal& n) { out << "Normal[" << n.mean << "," << n.std << "]"; },
                   [&](const LogNegativeWeibull& w) { out << "Weibull[" << w.w_over_a << "," << w.sigma_b << "]"; },
                   [&](const Empirical& e) { out << "Empirical[" << e.samples().size() << "]"; },
               },
               v_);
    return out.str();
}

std::pair<double, double> TransmittanceDistribution::support() const noexcept
{
    return std::visit(overloaded{
                          [](const Uniform& u) { return std::pair{u.lo, u.hi}; },
                          [](const TruncatedNormal&) { return std::pair{0.0, 1.0}; },
                          [](const LogNegativeWeibull& w) { return std::pair{0.0, w.peak}; },
                          [](const Empirical& e) {
                              const auto [lo, hi] = std::minmax_element(e.samples().begin(), e.samples().end());
                              return std::pair{*lo, *hi};
                          },
                      },
                      v_);
}

double density(const TransmittanceDistribution& dist, double t)
{
    if (!(t >= 0.0 && t <= 1.0))
        throw ParameterError("density: transmittance outside [0, 1]");
    return std::visit(
        overloaded{
            [&](const Uniform& u) { return (t >= u.lo && t <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0; },
            [&](const TruncatedNormal& n) { return normal_pdf((t - n.mean) / n.std) / (n.std * dist.norm_); },
            [&](const LogNegativeWeibull& w) {
                if (t <= 0.0 || t >= w.peak)
                    return 0.0;
                // Change of variables from the Rayleigh displacement r.
                const double q = 2.0 * std::log(w.peak / t);  // (r/scale)^shape
                const double r = w.scale * std::pow(q, 1.0 / w.shape);
                const double s2 = w.sigma_b * w.sigma_b;
                const double f_r = r / s2 * std::exp(-0.5 * r * r / s2);
                const double dr_dt = 2.0 * w.scale / (w.shape * t) * std::pow(q, 1.0 / w.shape - 1.0);
                return f_r * dr_dt;
            },
            [&](const Empirical& e) { return e.histogram_density(t); },
        },
        dist.variant());
}

namespace {

double draw(const TransmittanceDistribution& dist, Stream& rng)
{
    return std::visit(overloaded{
                          [&](const Uniform& u) { return u.lo + (u.hi - u.lo) * rng.uniform(); },
                          [&](const TruncatedNormal& n) {
                              for (;;) {
                                  const double t = n.mean + n.std * rng.normal();
                                  if (t >= 0.0 && t <= 1.0)
                                      return t;
                              }
                          },
                          [&](const LogNegativeWeibull& w) { return weibull_transmittance(w, rng.uniform()); },
                          [&](const Empirical& e) {
                              const auto n = e.samples().size();
                              const auto i = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * n));
                              return e.samples()[i];
                          },
                      },
                      dist.variant());
}

}  // namespace

std::vector<double> sample(const TransmittanceDistribution& dist, std::uint64_t seed, std::size_t count)
{
    if (count < 1)
        throw ParameterError("sample: count must be at least 1");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        Stream rng(derive_seed(seed, tag_sample, i));
        out[i] = draw(dist, rng);
    }
    return out;
}

namespace {

struct Expectations {
    double t, sqrt_t;
};

// E[T] and E[sqrt T] by adaptive quadrature in a variable free of the
// sqrt endpoint singularity.
Expectations analytic_expectations(const TransmittanceDistribution& dist)
{
    return std::visit(
        overloaded{
            [&](const Uniform& u) {
                const double a = std::sqrt(u.lo), b = std::sqrt(u.hi), c = 1.0 / (u.hi - u.lo);
                // u = sqrt(T): dT = 2u du
                const double e_t = quad::integral([&](double x) { return x * x * c * 2.0 * x; }, a, b);
                const double e_s = quad::integral([&](double x) { return x * c * 2.0 * x; }, a, b);
                return Expectations{e_t, e_s};
            },
            [&](const TruncatedNormal&) {
                auto f = [&](double x) { return density(dist, x * x) * 2.0 * x; };
                const double e_t = quad::integral([&](double x) { return x * x * f(x); }, 0.0, 1.0);
                const double e_s = quad::integral([&](double x) { return x * f(x); }, 0.0, 1.0);
                return Expectations{e_t, e_s};
            },
            [&](const LogNegativeWeibull& w) {
                // Integrate over the displacement u = r / sigma_b, whose
                // Rayleigh weight u exp(-u^2/2) is negligible beyond u = 40.
                auto t_of = [&](double u) {
                    const double r = w.sigma_b * u;
                    return w.peak * std::exp(-0.5 * std::pow(r / w.scale, w.shape));
                };
                auto weight = [](double u) { return u * std::exp(-0.5 * u * u); };
                const double e_t = quad::integral([&](double u) { return t_of(u) * weight(u); }, 0.0, 40.0);
                const double e_s = quad::integral([&](double u) { return std::sqrt(t_of(u)) * weight(u); }, 0.0, 40.0);
                return Expectations{e_t, e_s};
            },
            [&](const Empirical&) { return Expectations{0.0, 0.0}; },
        },
        dist.variant());
}

}  // namespace

Moments moments(const TransmittanceDistribution& dist)
{
    if (const auto* e = std::get_if<Empirical>(&dist.variant())) {
        const auto& xs = e->samples();
        const double n = static_cast<double>(xs.size());
        double sum_t = 0.0, sum_s = 0.0;
        for (double t : xs) {
            sum_t += t;
            sum_s += std::sqrt(t);
        }
        const double mean_s = sum_s / n;
        double ss = 0.0;
        for (double t : xs) {
            const double d = std::sqrt(t) - mean_s;
            ss += d * d;
        }
        return {sum_t / n, mean_s, ss / n};
    }
    const auto [e_t, e_s] = analytic_expectations(dist);
    return {e_t, e_s, std::max(0.0, e_t - e_s * e_s)};
}

double total_probability(const TransmittanceDistribution& dist)
{
    return std::visit(overloaded{
                          [&](const Uniform& u) {
                              return quad::integral([&](double t) { return density(dist, t); }, u.lo, u.hi);
                          },
                          [&](const TruncatedNormal&) {
                              return quad::integral([&](double t) { return density(dist, t); }, 0.0, 1.0);
                          },
                          [&](const LogNegativeWeibull& w) {
                              // Map back to the displacement u = r / sigma_b; the
                              // Jacobian removes the integrable spike at T = peak.
                              return quad::integral(
                                  [&](double u) {
                                      const double x = std::pow(w.sigma_b * u / w.scale, w.shape);
                                      const double t = w.peak * std::exp(-0.5 * x);
                                      if (!(t > 0.0 && t < w.peak))
                                          return 0.0;
                                      const double dt_du = 0.5 * t * w.shape * x / u;
                                      return density(dist, t) * dt_du;
                                  },
                                  0.0, 40.0);
                          },
                          [&](const Empirical& e) {
                              // histogram mass
                              const auto [lo, hi] = dist.support();
                              return quad::integral([&](double t) { return e.histogram_density(t); }, lo,
                                                    lo + std::ceil((hi - lo) / e.bin_width() + 1e-12) * e.bin_width(),
                                                    1e-6);
                          },
                      },
                      dist.variant());
}

std::vector<quad::Node> probability_nodes(const TransmittanceDistribution& dist, int panels)
{
    std::vector<quad::Node> nodes = std::visit(
        overloaded{
            [&](const Uniform& u) {
                auto xs = quad::composite_gauss_legendre(std::sqrt(u.lo), std::sqrt(u.hi), panels);
                for (auto& n : xs) {
                    n.w *= 2.0 * n.x / (u.hi - u.lo);
                    n.x *= n.x;
                }
                return xs;
            },
            [&](const TruncatedNormal&) {
                auto xs = quad::composite_gauss_legendre(0.0, 1.0, panels);
                for (auto& n : xs) {
                    n.w *= 2.0 * n.x * density(dist, n.x * n.x);
                    n.x *= n.x;
                }
                return xs;
            },
            [&](const LogNegativeWeibull& w) {
                // Displacement u = r / sigma_b with Rayleigh weight; the
                // tail beyond u = 12 carries less than exp(-72).
                auto xs = quad::composite_gauss_legendre(0.0, 12.0, panels);
                for (auto& n : xs) {
                    n.w *= n.x * std::exp(-0.5 * n.x * n.x);
                    n.x = w.peak * std::exp(-0.5 * std::pow(w.sigma_b * n.x / w.scale, w.shape));
                }
                return xs;
            },
            [&](const Empirical& e) {
                std::vector<double> sorted = e.samples();
                std::sort(sorted.begin(), sorted.end());
                std::vector<quad::Node> xs;
                const double w = 1.0 / static_cast<double>(sorted.size());
                for (double t : sorted) {
                    if (!xs.empty() && xs.back().x == t)
                        xs.back().w += w;
                    else
                        xs.push_back({t, w});
                }
                return xs;
            },
        },
        dist.variant());

    double total = 0.0;
    for (const auto& n : nodes)
        total += n.w;
    if (!(total > 0.0))
        throw NumericalError("probability_nodes: distribution has no mass");
    for (auto& n : nodes)
        n.w /= total;
    return nodes;
}

}  // namespace fcvqkd
