#include "fcvqkd/security.hpp"

#include "fcvqkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fcvqkd {

namespace symplectic {

namespace {

constexpr double pinv_cutoff = 1e-12;

Mat2 mul(const Mat2& a, const Mat2& b) noexcept
{
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

Mat2 transpose(const Mat2& a) noexcept { return {a[0], a[2], a[1], a[3]}; }

Mat2 inverse(const Mat2& a)
{
    const double d = det(a);
    if (d == 0.0)
        throw NumericalError("symplectic: singular block");
    return {a[3] / d, -a[1] / d, -a[2] / d, a[0] / d};
}

Mat2 sub(const Mat2& a, const Mat2& b) noexcept { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }

}  // namespace

double det(const Mat2& m) noexcept { return m[0] * m[3] - m[1] * m[2]; }

std::array<double, 2> eigenvalues(const TwoModeState& s)
{
    const double dA = det(s.A), dB = det(s.B), dC = det(s.C);
    const double delta = dA + dB + 2.0 * dC;
    // det of the full matrix through the Schur complement of A.
    const Mat2 schur = sub(s.B, mul(transpose(s.C), mul(inverse(s.A), s.C)));
    const double d_full = dA * det(schur);
    double disc = delta * delta - 4.0 * d_full;
    const bool decoupled = s.A[1] == 0.0 && s.A[2] == 0.0 && s.B[1] == 0.0 && s.B[2] == 0.0 && s.C[1] == 0.0 &&
                           s.C[2] == 0.0 && s.A[0] == s.A[3];
    if (decoupled) {
        // With x and p decoupled and A = a I the discriminant factorizes,
        // which keeps nearly pure states from losing half their digits.
        const double a = s.A[0], bx = s.B[0], bp = s.B[3], cx = s.C[0], cp = -s.C[3];
        const double u = a * a - bx * bp;
        disc = u * u + 4.0 * (cx * a - bx * cp) * (cx * bp - cp * a);
    }
    disc = std::max(0.0, disc);
    const double nu_plus = std::sqrt((delta + std::sqrt(disc)) / 2.0);
    // nu_minus from the product nu_plus * nu_minus = sqrt(det) avoids cancellation.
    const double nu_minus = std::sqrt(std::max(0.0, d_full)) / nu_plus;
    return {nu_plus, nu_minus};
}

double conditional_eigenvalue(const TwoModeState& s)
{
    // (X B X)^+ keeps only the measured x entry.
    const double bxx = s.B[0];
    const double inv = std::abs(bxx) > pinv_cutoff ? 1.0 / bxx : 0.0;
    const Mat2 pinv{inv, 0.0, 0.0, 0.0};
    const Mat2 cond = sub(s.A, mul(s.C, mul(pinv, transpose(s.C))));
    return std::sqrt(std::max(0.0, det(cond)));
}

TwoModeState purification(const EffectiveChannel& ch, const ProtocolParams& p)
{
    const double Vx = p.V + p.V_S;
    const double Vp = resolved_modulation(p) == Modulation::squeezed_quadrature ? 1.0 / p.V_S : p.V + p.V_S;
    const double nu = std::sqrt(Vx * Vp);
    const double z = std::sqrt(ch.T * std::max(0.0, nu * nu - 1.0));
    TwoModeState s;
    s.A = {nu, 0.0, 0.0, nu};
    s.C = {z * std::sqrt(Vx / nu), 0.0, 0.0, -z * std::sqrt(Vp / nu)};
    s.B = {ch.T * (Vx - 1.0) + 1.0 + ch.eps, 0.0, 0.0, ch.T * (Vp - 1.0) + 1.0 + ch.eps};
    return s;
}

}  // namespace symplectic

double entropy_g(double nu)
{
    if (nu <= 1.0)
        return 0.0;
    const double a = (nu + 1.0) / 2.0, b = (nu - 1.0) / 2.0;
    return a * std::log2(a) - b * std::log2(b);
}

double checked_eigenvalue(double nu)
{
    constexpr double tol = 1e-9;
    if (!(nu >= 1.0 - tol)) {
        std::ostringstream msg;
        msg << "symplectic eigenvalue " << nu << " below 1";
        throw UnphysicalStateError(msg.str());
    }
    return std::max(1.0, nu);
}

Modulation resolved_modulation(const ProtocolParams& p) noexcept
{
    if (p.modulation != Modulation::auto_select)
        return p.modulation;
    return p.V_S < 1.0 ? Modulation::squeezed_quadrature : Modulation::both_quadratures;
}

namespace {

void check_channel(const EffectiveChannel& ch)
{
    if (!(ch.T >= 0.0 && ch.T <= 1.0))
        throw ParameterError("channel: T outside [0, 1]");
    if (!(ch.eps >= 0.0) || !std::isfinite(ch.eps))
        throw ParameterError("channel: eps must be non-negative");
}

}  // namespace

double mutual_information(const EffectiveChannel& ch, const ProtocolParams& p)
{
    check_channel(ch);
    const double v_b = ch.T * p.V_prime() + 1.0 + ch.eps;
    const double v_cond = ch.T * (p.V_S - 1.0) + 1.0 + ch.eps;
    if (!(v_cond > 0.0))
        throw ParameterError("mutual_information: conditional variance not positive");
    return 0.5 * std::log2(v_b / v_cond);
}

double holevo_bound(const EffectiveChannel& ch, const ProtocolParams& p)
{
    check_channel(ch);
    const auto state = symplectic::purification(ch, p);
    const auto nus = symplectic::eigenvalues(state);
    const double nu1 = checked_eigenvalue(nus[0]);
    const double nu2 = checked_eigenvalue(nus[1]);
    const double nu3 = checked_eigenvalue(symplectic::conditional_eigenvalue(state));
    return std::max(0.0, entropy_g(nu1) + entropy_g(nu2) - entropy_g(nu3));
}

double asymptotic_rate(const EffectiveChannel& ch, const ProtocolParams& p)
{
    return p.beta * mutual_information(ch, p) - holevo_bound(ch, p);
}

double delta_fs(double n_key, const ProtocolParams& p)
{
    if (!(n_key >= 1.0))
        throw ParameterError("delta_fs: need at least one key state");
    return 7.0 * std::sqrt(std::log2(2.0 / p.eps_bar) / n_key);
}

KeyRateReport key_rate(const EffectiveChannel& ch, double N_total, const ProtocolParams& p)
{
    if (!(N_total >= 1.0))
        throw ParameterError("key_rate: N_total must be at least 1");
    KeyRateReport rep;
    rep.T = ch.T;
    rep.eps = ch.eps;
    rep.I_AB = mutual_information(ch, p);
    rep.S_BE = holevo_bound(ch, p);
    rep.K_inf = p.beta * rep.I_AB - rep.S_BE;
    rep.N_used = (1.0 - p.r) * N_total;
    rep.delta = rep.N_used >= 1.0 ? delta_fs(rep.N_used, p) : delta_fs(1.0, p);
    rep.K_raw = (1.0 - p.r) * (rep.K_inf - rep.delta);
    rep.K = std::max(0.0, rep.K_raw);
    return rep;
}

KeyRateReport key_rate(const WorstCaseChannel& wc, double N_total, const ProtocolParams& p)
{
    return key_rate(EffectiveChannel{wc.T_eff_low, wc.eps_eff_up}, N_total, p);
}

}  // namespace fcvqkd
