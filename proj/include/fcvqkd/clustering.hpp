#pragma once

#include "fcvqkd/channel.hpp"
#include "fcvqkd/distributions.hpp"
#include "fcvqkd/estimation.hpp"
#include "fcvqkd/security.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace fcvqkd {

inline constexpr double unbounded = std::numeric_limits<double>::infinity();

/// Closed interval on the estimated-transmittance axis. Either end may be
/// infinite.
struct Interval {
    double lo = -unbounded;
    double hi = unbounded;
};

/// Density of the actual transmittance of packages whose estimate T_hat
/// falls in `interval`:
///
///     p(s) = f(s) [Phi_s(hi) - Phi_s(lo)] / mass
///
/// where Phi_s is the normal law of T_hat given T = s with standard
/// deviation sigma_T(s) evaluated at V_N(s).
class ConditionalDensity {
public:
    ConditionalDensity(TransmittanceDistribution f, Interval interval, std::size_t k, ProtocolParams p);

    double operator()(double s) const;
    double selection_probability(double s) const;
    double mass() const noexcept { return mass_; }
    const Moments& moments() const noexcept { return moments_; }
    Interval interval() const noexcept { return interval_; }

private:
    TransmittanceDistribution f_;
    Interval interval_;
    std::size_t k_;
    ProtocolParams p_;
    double mass_ = 0.0;
    Moments moments_;
};

/// Throws EmptyClusterError when the interval carries no probability.
ConditionalDensity conditional_pdf(const TransmittanceDistribution& f, Interval interval, std::size_t k,
                                   const ProtocolParams& p);

struct ClusterReport {
    Interval interval;
    double mass = 0.0;  // P(T_hat in interval)
    Moments cond_moments;
    AggregateStats stats;  // expected statistics of the packages in the cluster
    WorstCaseChannel wc;
    KeyRateReport rate;
    double m_c = 0.0;  // expected number of packages
    double N_c = 0.0;  // expected number of states
    double K_c = 0.0;  // bits per state within the cluster (clamped)
    bool empty = false;
    bool too_small = false;  // fewer than two packages or below the min-mass knob
    bool low_mass = false;   // mass below 1 %
};

/// Expected cluster statistics and worst-case channel under the fading law.
/// Throws EmptyClusterError or ClusterTooSmallError.
ClusterReport cluster_stats(const TransmittanceDistribution& f, Interval interval, std::size_t n, std::size_t m,
                            const ProtocolParams& p);

/// C clusters are given by C + 1 non-decreasing edges; cluster c is
/// [edges[c], edges[c+1]]. Packages outside [edges.front(), edges.back()]
/// are discarded. C = 0 (a single pair of infinite edges with `pooled` set)
/// denotes no clusterization.
struct ClusterPlan {
    std::size_t C = 0;
    std::vector<double> edges;
    std::vector<ClusterReport> per_cluster;
    double total_rate = 0.0;  // sum over clusters of mass * K_c
    double discarded_mass = 0.0;
    double r = 0.0;
    double V = 0.0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::string diagnostic;  // set when every candidate rate is zero
};

struct EvaluationSettings {
    int panels = 256;       // quadrature panels for the fading law
    double min_mass = 0.0;  // clusters lighter than this contribute nothing
};

/// Analytic evaluation of a cluster layout. Clusters that are empty or too
/// small contribute zero and are flagged. Pass empty `edges` (or C = 0) for
/// the pooled channel.
ClusterPlan total_key_rate(const TransmittanceDistribution& f, std::span<const double> edges, std::size_t n,
                           std::size_t m, const ProtocolParams& p, const EvaluationSettings& settings = {});

struct OptimizerSettings {
    double r_min = 0.01;
    double r_max = 0.9;
    double V_min = 0.5;
    double V_max = 50.0;
    int grid_points = 12;
    int quantile_levels = 64;
    int refine_passes = 2;
    int panels = 128;
    double min_mass = 0.0;
};

/// Best plans for C = 0 .. C_max. The search for C starts from the optimum
/// of C - 1 as well as the shared coarse grid, so the rates are
/// non-decreasing in C.
std::vector<ClusterPlan> optimize_sweep(const TransmittanceDistribution& f, std::size_t C_max, std::size_t n,
                                        std::size_t m, const ProtocolParams& p_template,
                                        const OptimizerSettings& settings = {});

/// Best plan with exactly C clusters (empty clusters allowed).
ClusterPlan optimize(const TransmittanceDistribution& f, std::size_t C, std::size_t n, std::size_t m,
                     const ProtocolParams& p_template, const OptimizerSettings& settings = {});

struct AsymptoticOptimum {
    double K_inf = 0.0;  // best beta I - S over V at the exact effective channel
    double V = 0.0;
    EffectiveChannel channel;
};

/// Infinite-data reference: the effective channel built from the exact
/// moments of f, with V optimized and no estimation overhead.
AsymptoticOptimum asymptotic_optimum(const TransmittanceDistribution& f, const ProtocolParams& p_template,
                                     const OptimizerSettings& settings = {});

/// Evaluation on measured data: packages are assigned to clusters by their
/// T_hat, each cluster is aggregated and bounded on its own.
ClusterPlan empirical_key_rate(std::span<const PackageEstimate> estimates, std::span<const double> edges,
                               std::size_t n, const ProtocolParams& p);

}  // namespace fcvqkd
