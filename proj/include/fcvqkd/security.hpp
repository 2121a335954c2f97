#pragma once

#include "fcvqkd/channel.hpp"
#include "fcvqkd/estimation.hpp"

#include <array>

namespace fcvqkd {

struct EffectiveChannel {
    double T = 0.0;
    double eps = 0.0;
};

struct KeyRateReport {
    double T = 0.0;    // transmittance the rate was evaluated at
    double eps = 0.0;  // excess noise the rate was evaluated at
    double I_AB = 0.0;
    double S_BE = 0.0;
    double K_inf = 0.0;  // beta I_AB - S_BE
    double delta = 0.0;
    double K = 0.0;      // max(K_raw, 0)
    double K_raw = 0.0;
    double N_used = 0.0; // states entering the key, (1 - r) N
};

namespace symplectic {

/// Row-major 2x2 block over (x, p).
using Mat2 = std::array<double, 4>;

/// Two-mode covariance matrix [[A, C], [C^T, B]].
struct TwoModeState {
    Mat2 A{};
    Mat2 B{};
    Mat2 C{};
};

double det(const Mat2& m) noexcept;

/// Symplectic eigenvalues (nu_plus, nu_minus) of the two-mode state.
std::array<double, 2> eigenvalues(const TwoModeState& s);

/// Symplectic eigenvalue of mode A after homodyne detection of x on mode B:
/// A - C (X B X)^+ C^T with X = diag(1, 0).
double conditional_eigenvalue(const TwoModeState& s);

/// Purification of the signal ensemble seen by the eavesdropper after the
/// channel (T, eps). Mode A has the ensemble's symplectic spectrum, mode B
/// is what reaches the receiver.
TwoModeState purification(const EffectiveChannel& ch, const ProtocolParams& p);

}  // namespace symplectic

/// Gaussian entropy of a mode with symplectic eigenvalue nu >= 1.
double entropy_g(double nu);

/// Maps numerically-unit eigenvalues to exactly 1 and rejects values below
/// 1 - 1e-9 with UnphysicalStateError.
double checked_eigenvalue(double nu);

/// Modulation that auto_select resolves to.
Modulation resolved_modulation(const ProtocolParams& p) noexcept;

/// 0.5 log2(V_B / V_{B|M}) with V_B = T V' + 1 + eps and
/// V_{B|M} = T (V_S - 1) + 1 + eps.
double mutual_information(const EffectiveChannel& ch, const ProtocolParams& p);

/// Reverse-reconciliation Holevo bound S(B:E) = S(AB) - S(A|x_B).
double holevo_bound(const EffectiveChannel& ch, const ProtocolParams& p);

/// beta I_AB - S_BE.
double asymptotic_rate(const EffectiveChannel& ch, const ProtocolParams& p);

/// 7 sqrt(log2(2 / eps_bar) / n_key).
double delta_fs(double n_key, const ProtocolParams& p);

/// (1 - r) [beta I - S - Delta((1 - r) N_total)] at the worst-case channel.
KeyRateReport key_rate(const WorstCaseChannel& wc, double N_total, const ProtocolParams& p);

/// Same as key_rate for an explicitly given channel.
KeyRateReport key_rate(const EffectiveChannel& ch, double N_total, const ProtocolParams& p);

}  // namespace fcvqkd
