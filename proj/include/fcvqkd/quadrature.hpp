#pragma once

#include <functional>
#include <vector>

namespace fcvqkd::quad {

inline constexpr double default_abs_tol = 1e-8;

struct Result {
    double value;
    double error;  // estimated absolute error
};

/// Adaptive Gauss-Kronrod (21-point) integration of f over [a, b].
/// Throws NumericalError when the error estimate stays above abs_tol.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = default_abs_tol);

/// Convenience wrapper returning only the value.
inline double integral(const std::function<double(double)>& f, double a, double b,
                       double abs_tol = default_abs_tol)
{
    return integrate(f, a, b, abs_tol).value;
}

struct Node {
    double x;
    double w;
};

/// Composite 8-point Gauss-Legendre rule on [a, b] with `panels` equal panels.
std::vector<Node> composite_gauss_legendre(double a, double b, int panels);

}  // namespace fcvqkd::quad
