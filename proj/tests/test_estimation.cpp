#include "fcvqkd/channel.hpp"
#include "fcvqkd/errors.hpp"
#include "fcvqkd/estimation.hpp"
#include "fcvqkd/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace fcvqkd;

namespace {

ProtocolParams params(double V, double V_S, double eps)
{
    ProtocolParams p;
    p.V = V;
    p.V_S = V_S;
    p.epsilon = eps;
    return p;
}

struct Spread {
    double mean = 0.0;
    double var = 0.0;
};

Spread spread(const std::vector<double>& xs)
{
    const double n = static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs)
        s += x;
    const double mu = s / n;
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mu) * (x - mu);
    return {mu, ss / (n - 1.0)};
}

// Replicated estimates of sqrtT and T from fresh packages of k pairs.
struct Replicas {
    std::vector<double> s, t;
};

Replicas replicate(double T, const ProtocolParams& p, std::size_t k, std::size_t reps, std::uint64_t seed)
{
    Replicas out;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto pkg = simulate_package(T, p, k, derive_seed(seed, 1, i));
        out.s.push_back(estimate_sqrtT(pkg.M, pkg.B, p.V).value);
        out.t.push_back(estimate_T(pkg.M, pkg.B, p.V).value);
    }
    return out;
}

// Stats with zero standard errors and the given population moments.
AggregateStats exact_stats(double mean_T, double mean_sqrtT)
{
    AggregateStats st;
    FluctuationEstimate f;
    f.mean_T = mean_T;
    f.X1 = mean_T - mean_sqrtT * mean_sqrtT;
    f.X2 = mean_T + mean_sqrtT * mean_sqrtT;
    st.raw = st.corrected = f;
    st.mean_sqrtT_hat = mean_sqrtT;
    st.mean_T_hat = mean_T;
    st.X1_hat = f.X1;
    st.X2_hat = f.X2;
    return st;
}

}  // namespace

TEST_SUITE("per-package estimators")
{
    TEST_CASE("zero output gives a zero estimate")
    {
        const std::vector<double> M = {1.0, -2.0, 0.5, 3.0}, B(4, 0.0);
        CHECK(estimate_sqrtT(M, B, 2.0).value == 0.0);
        CHECK(estimate_T(M, B, 2.0).value == 0.0);
    }

    TEST_CASE("noiseless identity channel tends to one")
    {
        Stream rng(3);
        std::vector<double> M(1000000);
        for (double& m : M)
            m = std::sqrt(2.0) * rng.normal();
        CHECK(estimate_sqrtT(M, M, 2.0).value == doctest::Approx(1.0).epsilon(5e-3));
    }

    TEST_CASE("anti-correlated data is flagged")
    {
        Package pkg;
        Stream rng(4);
        for (int j = 0; j < 100; ++j) {
            pkg.M.push_back(rng.normal());
            pkg.B.push_back(-pkg.M.back());
        }
        ProtocolParams p = params(1.0, 1.0, 0.0);
        p.r = 0.5;
        const auto e = estimate_package(pkg, p);
        CHECK(e.sqrtT_hat < 0.0);
        CHECK(e.T_hat > 0.0);
        CHECK(e.sign_anomaly);
        CHECK(e.k == 50);
    }

    TEST_CASE("package estimate consistency")
    {
        ProtocolParams p = params(4.0, 0.1, 0.01);
        const auto pkg = simulate_package(0.6, p, 500, 77);
        const auto e = estimate_package(pkg, p);
        CHECK(e.T_hat == e.sqrtT_hat * e.sqrtT_hat);
        CHECK(e.sigma_sqrtT > 0.0);
        CHECK(e.sigma_T > 0.0);
        CHECK(e.k == 100);
        // Only the disclosed prefix is used.
        const std::vector<double> M(pkg.M.begin(), pkg.M.begin() + 100), B(pkg.B.begin(), pkg.B.begin() + 100);
        CHECK(e.sqrtT_hat == estimate_sqrtT(M, B, p.V).value);
        CHECK(e.vN_hat == estimate_noise(M, B, p.V, p.V_S).vN_hat);
    }

    TEST_CASE("input checks")
    {
        const std::vector<double> one = {1.0}, two = {1.0, 2.0}, three = {1.0, 2.0, 3.0};
        CHECK_THROWS_AS(estimate_sqrtT(one, one, 1.0), InsufficientDataError);
        CHECK_THROWS_AS(estimate_sqrtT(two, three, 1.0), ParameterError);
        CHECK_THROWS_AS(estimate_T(two, two, 0.0), ParameterError);
        CHECK_THROWS_AS(estimate_noise(one, one, 1.0, 1.0), InsufficientDataError);
    }

    TEST_CASE("Monte Carlo spread at T = 0.5, V = 10, V_N = 1.5, k = 1000")
    {
        const ProtocolParams p = params(10.0, 1.0, 0.5);
        REQUIRE(p.V_N(0.5) == doctest::Approx(1.5));
        const auto r = replicate(0.5, p, 1000, 10000, 2024);
        CHECK(spread(r.s).var == doctest::Approx(0.00115).epsilon(0.05));
        CHECK(spread(r.t).var == doctest::Approx(0.0023).epsilon(0.05));
    }

    TEST_CASE("variance law over a grid of k and T")
    {
        const ProtocolParams p = params(5.0, 0.1, 0.01);
        std::uint64_t seed = 500;
        for (std::size_t k : {100u, 1000u, 10000u})
            for (double T : {0.1, 0.5, 0.9}) {
                CAPTURE(k);
                CAPTURE(T);
                const std::size_t reps = 3000;
                const auto r = replicate(T, p, k, reps, seed++);
                const double predicted = (2.0 * T + p.V_N(T) / p.V) / static_cast<double>(k);
                const auto sp = spread(r.s);
                CHECK(std::abs(sp.var / predicted - 1.0) < 0.10);
                // Unbiased for sqrtT.
                CHECK(std::abs(sp.mean - std::sqrt(T)) < 4.0 * std::sqrt(predicted / reps));
                // T_hat carries the estimator variance as its leading bias.
                const auto tp = spread(r.t);
                CHECK(std::abs(tp.mean - predicted - T) < 4.0 * std::sqrt(tp.var / reps));
            }
    }
}

TEST_SUITE("noise estimation")
{
    TEST_CASE("noiseless input is clamped")
    {
        Stream rng(8);
        const double T = 0.64;
        std::vector<double> M(1000000), B(M.size());
        for (std::size_t j = 0; j < M.size(); ++j) {
            M[j] = std::sqrt(3.0) * rng.normal();
            B[j] = std::sqrt(T) * M[j];
        }
        const auto ne = estimate_noise(M, B, 3.0, 0.1);
        CHECK(ne.vN_hat < 1e-4);
        CHECK(ne.eps_clamped);
        CHECK(ne.eps_hat == 0.0);
        CHECK(ne.eps_raw == doctest::Approx(-(1.0 - T * 0.9)).epsilon(1e-3));
    }

    TEST_CASE("excess noise is recovered at k = 1e5")
    {
        const ProtocolParams p = params(5.0, 1.0, 0.01);
        const auto pkg = simulate_package(0.5, p, 100000, 12);
        const auto ne = estimate_noise(pkg.M, pkg.B, p.V, p.V_S);
        CHECK(std::abs(ne.eps_raw - 0.01) < 4.0 * std::sqrt(2.0 / 1e5) * p.V_N(0.5));
    }

    TEST_CASE("lossless vacuum-limited channel")
    {
        const ProtocolParams p = params(5.0, 1.0, 0.0);
        const auto pkg = simulate_package(1.0, p, 100000, 13);
        const auto ne = estimate_noise(pkg.M, pkg.B, p.V, p.V_S);
        CHECK(ne.vN_hat == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_SUITE("aggregation")
{
    TEST_CASE("identical noiseless packages")
    {
        std::vector<PackageEstimate> es(5);
        for (auto& e : es) {
            e.sqrtT_hat = std::sqrt(0.3);
            e.T_hat = 0.3;
            e.k = 10;
        }
        const auto st = aggregate(es, ProtocolParams{});
        CHECK(st.X1_hat == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(st.X2_hat == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(st.se_X1 == doctest::Approx(0.0));
        CHECK(st.m_used == 5);
        CHECK(st.k_total == 50);
    }

    TEST_CASE("aggregation needs two packages with k >= 2")
    {
        std::vector<PackageEstimate> es(1);
        es[0].k = 10;
        CHECK_THROWS_AS(aggregate(es, ProtocolParams{}), InsufficientDataError);
        es.resize(2);
        es[1].k = 1;
        CHECK_THROWS_AS(aggregate(es, ProtocolParams{}), InsufficientDataError);
    }

    TEST_CASE("uniform fluctuation recovered from 1e4 packages")
    {
        const ProtocolParams p = params(5.0, 0.1, 0.01);
        const auto run = simulate_run(TransmittanceDistribution::uniform(0.0, 1.0), p, 1000, 10000, 71);
        const auto es = estimate_run(run);
        const auto st = aggregate(es, p);
        CHECK(std::abs(st.X1_hat - 1.0 / 18.0) < 4.0 * st.se_X1);
        CHECK(st.X2_hat >= st.X1_hat - 4.0 * (st.se_X1 + st.se_X2));
        // Without the floor correction the estimate is visibly inflated.
        CHECK(st.raw.X1 - st.corrected.X1 == doctest::Approx(st.mean_estimator_var));
    }

    TEST_CASE("truncated normal fluctuation and pooled excess noise")
    {
        const ProtocolParams p = params(5.0, 0.1, 0.01);
        const auto run = simulate_run(TransmittanceDistribution::truncated_normal(0.5, 0.1), p, 1000, 2000, 72);
        const auto st = aggregate(estimate_run(run), p);
        CHECK(std::abs(st.X1_hat - 0.0052) < 4.0 * st.se_X1);
        CHECK(std::abs(st.eps_hat - 0.01) < 4.0 * std::sqrt(2.0 / st.k_total) * st.mean_vN);
        const double up = eps_upper_bound(st, 2.0);
        CHECK(up == doctest::Approx(st.eps_hat + 2.0 * std::sqrt(2.0 / st.k_total) * st.mean_vN));
        CHECK(up > 0.01);
    }
}

TEST_SUITE("worst-case bounds")
{
    TEST_CASE("zero standard errors reproduce the effective channel")
    {
        const double mt = 0.5, ms = 0.7;
        const auto st = exact_stats(mt, ms);
        const double vp = 1.6;
        for (auto mode : {NoiseFloor::keep, NoiseFloor::subtract}) {
            const auto wc = worst_case(st, 0.02, vp, 2.0, mode);
            CHECK(wc.T_eff_low == doctest::Approx(ms * ms).epsilon(1e-15));
            CHECK(wc.eps_eff_up == doctest::Approx(0.02 + (mt - ms * ms) * vp).epsilon(1e-15));
            CHECK(wc.T_eff_low == (wc.X2_low - wc.X1_up) / 2.0);
            const auto rect = worst_case_rectangular(st, 0.02, vp, 2.0, mode);
            CHECK(rect.T_eff_low == doctest::Approx(wc.T_eff_low).epsilon(1e-15));
            CHECK(rect.eps_eff_up == doctest::Approx(wc.eps_eff_up).epsilon(1e-15));
        }
    }

    TEST_CASE("crossed bounds mark the channel unusable")
    {
        auto st = exact_stats(0.02, 0.1);
        st.raw.se_X1 = 0.05;
        st.raw.se_X2 = 0.05;
        const auto wc = worst_case(st, 0.0, 1.0, 2.0);
        CHECK(wc.X2_low < wc.X1_up);
        CHECK(wc.T_eff_low == 0.0);
        CHECK(wc.unusable);
        CHECK(wc.eps_eff_up >= wc.eps_up);
    }

    TEST_CASE("X1 upper bound is floored at zero")
    {
        auto st = exact_stats(0.25, 0.5);
        st.raw.X1 = -0.01;
        const auto wc = worst_case(st, 0.0, 1.0, 0.0);
        CHECK(wc.X1_up == 0.0);
    }

    TEST_CASE("argument checks")
    {
        const auto st = exact_stats(0.5, 0.7);
        CHECK_THROWS_AS(worst_case(st, 0.0, 1.0, -1.0), ParameterError);
        CHECK_THROWS_AS(worst_case(st, -0.1, 1.0, 2.0), ParameterError);
        CHECK_THROWS_AS(worst_case(st, 0.0, -0.5, 2.0), ParameterError);
        CHECK_THROWS_AS(worst_case_rectangular(st, 0.0, 1.0, -1.0), ParameterError);
    }

    TEST_CASE("rectangular bound is looser on simulated data")
    {
        const ProtocolParams p = params(5.0, 0.1, 0.01);
        const auto run = simulate_run(TransmittanceDistribution::truncated_normal(0.5, 0.1), p, 1000, 1000, 91);
        const auto st = aggregate(estimate_run(run), p);
        const double eps_up = eps_upper_bound(st, 2.0);
        const auto wc = worst_case(st, eps_up, p.V_prime(), 2.0);
        const auto rect = worst_case_rectangular(st, eps_up, p.V_prime(), 2.0);
        CHECK(rect.eps_eff_up > wc.eps_eff_up);
        CHECK(rect.X1_up > wc.X1_up);
        CHECK(wc.eps_eff_up >= wc.eps_up);
        CHECK(wc.T_eff_low >= 0.0);
        CHECK(wc.T_eff_low <= 1.0);
    }

    TEST_CASE("X1/X2 bounds never lose to the rectangular ones beyond second order")
    {
        // eps: the rectangular X1 bound exceeds the X1/X2 one up to z^2 se_s^2.
        // T: the two lower bounds differ by at most z se_X1 in favour of the
        // rectangular one (triangle inequality on the delta-method spreads).
        const std::vector<TransmittanceDistribution> laws = {
            TransmittanceDistribution::uniform(0.0, 1.0), TransmittanceDistribution::truncated_normal(0.5, 0.1),
            TransmittanceDistribution::log_negative_weibull(1.25, 0.8),
            TransmittanceDistribution::log_negative_weibull(1.47, 0.6)};
        const ProtocolParams p = params(5.0, 0.1, 0.01);
        const double z = 2.0;
        std::uint64_t seed = 1;
        for (const auto& d : laws)
            for (int rep = 0; rep < 5; ++rep) {
                const auto run = simulate_run(d, p, 200, 50, seed++);
                const auto st = aggregate(estimate_run(run), p);
                const double eps_up = eps_upper_bound(st, z);
                const auto wc = worst_case(st, eps_up, p.V_prime(), z);
                const auto rect = worst_case_rectangular(st, eps_up, p.V_prime(), z);
                const double se_s = st.se_mean_sqrtT;
                CHECK(wc.eps_eff_up <= rect.eps_eff_up + z * z * se_s * se_s * p.V_prime() + 1e-15);
                CHECK(wc.T_eff_low >= rect.T_eff_low - z * st.raw.se_X1 - 1e-15);
            }
    }
}
