#pragma once

#include <functional>

namespace elastic {

struct QuadratureResult {
    double value;
    double error;
};

// Adaptive 15-point Gauss-Kronrod on [a,b]. Accepts the result when the
// error estimate is below max(rel_tol*|value|, abs_floor); otherwise, or if
// the integrand returns a non-finite value, throws NumericalAbort naming `what`.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                           double abs_floor, const char* what);

}  // namespace elastic
