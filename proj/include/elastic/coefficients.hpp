#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "elastic/expr.hpp"

namespace elastic {

// A coefficient field f(t, x). Built-in shapes carry analytic derivatives;
// expressions fall back to 5-point central differences.
class ScalarField {
public:
    enum class Kind { Constant, Affine, TanhRamp, Expr };

    static ScalarField constant(double c);
    // a + b*x + c*t
    static ScalarField affine(double a, double b, double c);
    // lo + (hi - lo) * (1 + tanh((x - center)/width)) / 2
    static ScalarField tanh_ramp(double lo, double hi, double center, double width);
    static ScalarField expression(const std::string& source);

    // Parses "constant 0", "affine 1 0.1 0", "tanh-ramp lo hi c w", "expr <text>".
    static ScalarField parse(const std::string& spec);
    // Inverse of parse; numbers use the shortest exact decimal form.
    std::string spec() const;

    double operator()(double t, double x) const {
        switch (kind_) {
            case Kind::Constant: return p_[0];
            case Kind::Affine: return p_[0] + p_[1] * x + p_[2] * t;
            case Kind::TanhRamp: return p_[0] + (p_[1] - p_[0]) * 0.5 * (1.0 + std::tanh((x - p_[2]) / p_[3]));
            case Kind::Expr: return (*expr_)(t, x);
        }
        return 0.0;
    }

    double dx(double t, double x, double h) const;
    double dxx(double t, double x, double h) const;
    double dt(double t, double x, double h) const;

    Kind kind() const { return kind_; }
    bool is_constant() const { return kind_ == Kind::Constant; }
    bool depends_on_x() const;
    bool depends_on_t() const;

private:
    Kind kind_ = Kind::Constant;
    double p_[4] = {0, 0, 0, 1};
    std::shared_ptr<const Expression> expr_;
};

struct CoefficientSet {
    ScalarField mu = ScalarField::constant(0.0);
    ScalarField sigma = ScalarField::constant(1.0);
    ScalarField rho = ScalarField::constant(0.0);  // function of t only
    double kappa = 0.0;
    double bound_C = 2.0;
    double fd_step = 1e-5;

    // Throws ConfigError when rho depends on x, kappa < 0 or bound_C <= 0.
    void check_shape() const;
};

struct Violation {
    std::string constraint;
    double t;
    double x;
    double value;
};

struct ValidationReport {
    std::vector<Violation> violations;  // sorted by (constraint, t, x)
    std::size_t t_points = 0;
    std::size_t x_points = 0;
    double mu_tilde_bound = 0.0;      // max |transformed drift| over the grid
    double dt_sigma_integral = 0.0;   // max over t of the integral of |d_t sigma| on [0, x_max]
    std::string note;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_assumptions(const CoefficientSet& c, const std::vector<double>& t_grid,
                                      const std::vector<double>& x_grid);

// zeta(t,x) = integral over [0,x] of dy / sigma(t,y).
double scale_transform(const CoefficientSet& c, double t, double x);

// Solves zeta(t, x) = z for x >= 0.
double inverse_scale_transform(const CoefficientSet& c, double t, double z);

// (mu/sigma - d_x sigma)(t,x) - integral over [0,x] of d_t sigma / sigma^2.
double transformed_drift(const CoefficientSet& c, double t, double x);

}  // namespace elastic
