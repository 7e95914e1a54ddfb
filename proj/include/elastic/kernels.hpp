#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace elastic {

struct KernelParams {
    double epsilon;  // variance of the Gaussian part, > 0
    double kappa;    // elastic rate, >= 0; 0 gives the reflecting kernel
    void check() const;
};

// Samples f(x_j) on x_j = j*dx, j = 0..M.
struct GridFunction {
    double dx = 1.0;
    std::vector<double> values;

    static GridFunction zeros(double dx, std::size_t points) { return {dx, std::vector<double>(points, 0.0)}; }
    // Grid on [0, x_max] with spacing close to dx_target that hits x_max exactly.
    static GridFunction on_interval(double x_max, double dx_target);

    std::size_t size() const { return values.size(); }
    double x(std::size_t j) const { return static_cast<double>(j) * dx; }
    double x_max() const { return x(values.size() - 1); }
    void check() const;

    double integral() const;  // trapezoid
    double l2_norm() const;   // trapezoid on the squares
};

// exp(z^2) * erfc(z).
double erfcx(double z);

// Test hook: multiplies the kappa prefactor of the correction term (1 = exact).
void set_kernel_fault_scale(double scale);
double kernel_fault_scale();

double gaussian_kernel(double eps, double x);
double reflecting_kernel(double eps, double x, double y);
double elastic_correction(double eps, double kappa, double x, double y);
double elastic_kernel(double eps, double kappa, double x, double y);

// phi(x) = integral over y >= 0 of the elastic kernel. The Gaussian parts
// integrate to 1 exactly, the correction is integrated numerically.
double boundary_test_function(double eps, double kappa, double x);
// phi'(x); equals the correction term at y = 0.
inline double boundary_test_function_derivative(double eps, double kappa, double x) {
    return elastic_correction(eps, kappa, x, 0.0);
}
GridFunction tabulate_boundary_test_function(double eps, double kappa, double dx, std::size_t points);

struct MollifyDiagnostics {
    std::size_t atoms_at_zero = 0;
    std::size_t atoms_beyond_grid = 0;
};

// Sum over atoms of weight * G(x_j, atom) on the output grid.
GridFunction mollify_atoms(std::span<const double> atoms, double weight, const KernelParams& p, double dx,
                           std::size_t points, MollifyDiagnostics* diag = nullptr);
// Trapezoid quadrature of G(x_j, .) against f.
GridFunction mollify(const GridFunction& f, const KernelParams& p, double dx, std::size_t points);

// F(x_j) = -integral of f over [x_j, x_max], right-to-left trapezoid.
// Appends a warning when |f(x_max)| exceeds tail_tol.
GridFunction antiderivative(const GridFunction& f, double tail_tol = 1e-8,
                            std::vector<std::string>* warnings = nullptr);

// Identity residuals, each scaled as |r| / (1 + max |term|).
double derivative_switch_residual(double eps, double kappa, std::span<const std::pair<double, double>> points);
double robin_identity_residual(double eps, double kappa, std::span<const double> points);
double chapman_kolmogorov_residual(double s, double t, double kappa, double x, double y);

}  // namespace elastic
