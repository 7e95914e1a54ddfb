#include "elastic/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

#include "elastic/errors.hpp"

namespace elastic {

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                           double abs_floor, const char* what) {
    if (a == b) return {0.0, 0.0};
    bool bad = false;
    double bad_at = 0.0;
    auto guarded = [&](double y) {
        const double v = f(y);
        if (!std::isfinite(v)) {
            if (!bad) bad_at = y;
            bad = true;
            return 0.0;
        }
        return v;
    };
    double error = 0.0;
    double l1 = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(guarded, a, b, 20, rel_tol, &error, &l1);
    if (bad) {
        std::ostringstream os;
        os << what << ": non-finite integrand at y=" << bad_at;
        throw NumericalAbort(os.str());
    }
    if (!std::isfinite(v) || error > std::max(rel_tol * std::abs(v), abs_floor)) {
        std::ostringstream os;
        os << what << ": quadrature did not converge on [" << a << ", " << b << "], value " << v
           << ", error estimate " << error;
        throw NumericalAbort(os.str());
    }
    return {v, error};
}

}  // namespace elastic
