#include "fcvqkd/quadrature.hpp"

#include "fcvqkd/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <sstream>

namespace fcvqkd::quad {

Result integrate(const std::function<double(double)>& f, double a, double b, double abs_tol)
{
    if (!(a <= b))
        throw ParameterError("integrate: lower limit above upper limit");
    if (a == b)
        return {0.0, 0.0};

    constexpr unsigned max_depth = 20;
    double error = 0.0;
    double l1 = 0.0;
    // Boost's tolerance is relative to the L1 norm; asking for abs_tol/100
    // relative leaves head-room for integrands of order one.
    const double value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        f, a, b, max_depth, abs_tol * 1e-2, &error, &l1);
    if (!std::isfinite(value) || error > abs_tol) {
        std::ostringstream msg;
        msg << "quadrature did not converge on [" << a << ", " << b << "]: value=" << value
            << " error_estimate=" << error << " tolerance=" << abs_tol << " L1=" << l1;
        throw NumericalError(msg.str());
    }
    return {value, error};
}

std::vector<Node> composite_gauss_legendre(double a, double b, int panels)
{
    if (panels < 1 || !(a < b))
        throw ParameterError("composite_gauss_legendre: need a < b and at least one panel");
    using rule = boost::math::quadrature::gauss<double, 8>;
    const auto& abscissa = rule::abscissa();  // non-negative half
    const auto& weights = rule::weights();

    std::vector<Node> nodes;
    nodes.reserve(static_cast<std::size_t>(panels) * 8);
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + width * p;
        const double mid = lo + 0.5 * width;
        const double half = 0.5 * width;
        // Even-order rule: no node at the panel centre.
        for (std::size_t i = abscissa.size(); i-- > 0;)
            nodes.push_back({mid - half * abscissa[i], half * weights[i]});
        for (std::size_t i = 0; i < abscissa.size(); ++i)
            nodes.push_back({mid + half * abscissa[i], half * weights[i]});
    }
    return nodes;
}

}  // namespace fcvqkd::quad
