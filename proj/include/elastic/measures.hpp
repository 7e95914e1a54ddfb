#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "elastic/coefficients.hpp"
#include "elastic/kernels.hpp"

namespace elastic {

// Atoms of mass 1/N where N is the original particle count.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    EmpiricalMeasure(std::vector<double> atoms, std::size_t n_original);
    // Alive positions of a particle system.
    static EmpiricalMeasure from_alive(std::span<const double> x, std::span<const std::uint8_t> alive);

    const std::vector<double>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    std::size_t n_original() const { return n_; }
    double weight() const { return n_ ? 1.0 / static_cast<double>(n_) : 0.0; }
    double total_mass() const { return weight() * static_cast<double>(atoms_.size()); }
    double max_atom() const { return atoms_.empty() ? 0.0 : atoms_.back(); }

    // Mass of the open interval (a, b).
    double interval_mass(double a, double b) const;
    // <nu, phi>; throws NumericalAbort when phi is not finite at an atom.
    double pair(const std::function<double(double)>& phi) const;

private:
    std::vector<double> atoms_;
    std::size_t n_ = 0;
};

struct D0Result {
    double value;        // exact maximum over grid-piecewise-linear test functions
    double error_bound;  // d0 lies in [value, value + error_bound]
    double h;
};

// Total variation norm of m1 - m2.
double total_variation(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2);

// Bounded-Lipschitz distance: sup of <psi, m1 - m2> over |psi| <= 1, Lip(psi) <= 1.
// h = 0 picks the default spacing max(1e-3 * x_max, 1e-4), then h is shrunk so 1/h is an integer.
D0Result bounded_lipschitz_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, double h = 0.0);

// L2 norm of the anti-derivative of T(m1 - m2) plus |integral of T(m1 - m2)|.
double h_minus1_proxy(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, const KernelParams& p, double dx,
                      std::size_t points);

GridFunction mollify(const EmpiricalMeasure& m, const KernelParams& p, double dx, std::size_t points,
                     MollifyDiagnostics* diag = nullptr);

struct Histogram {
    double bin = 1.0;
    std::vector<double> density;  // mass / bin width; bin j covers [j*bin, (j+1)*bin)
    double overflow_mass = 0.0;   // atoms at or beyond the last edge
    double integral() const;
};

Histogram density_histogram(const EmpiricalMeasure& m, double bin, std::size_t bins);
GridFunction density_mollified(const EmpiricalMeasure& m, const KernelParams& p, double dx, std::size_t points);

// phi(x) = (1 + kappa x) exp(-lambda x^2), so phi'(0) = kappa phi(0).
struct TestFunction {
    double kappa;
    double lambda;
    double value(double x) const;
    double d1(double x) const;
    double d2(double x) const;
    // Throws std::invalid_argument unless phi'(0) = k phi(0) within 1e-8 (checked numerically).
    void check_boundary(double k) const;
};

// Series of the martingale components for one run and one test function.
struct MartingaleSeries {
    std::vector<double> t;
    std::vector<double> M;
    std::vector<double> S;
    std::vector<double> C;
    std::vector<double> evolution;  // M minus the Ito integral of <nu, sigma rho phi'> dW
};

// Online evaluation of the martingale components along a trajectory. Feed the
// measure at every grid time t_0, t_1, ... in order together with the step
// increment of W0 that follows it. extra_drift is added to mu at every atom,
// which carries the frozen interaction term of the nonlinear system.
class MartingaleAccumulator {
public:
    MartingaleAccumulator(const CoefficientSet& c, std::vector<TestFunction> phis, double dt);

    void observe(double t, std::span<const double> x, std::span<const std::uint8_t> alive, std::size_t n_original,
                 double dW_next, double extra_drift = 0.0);
    const std::vector<MartingaleSeries>& series() const { return out_; }

private:
    struct Running {
        double p0 = 0.0;
        double drift = 0.0;   // sum of A dt
        double qv = 0.0;      // sum of B^2 dt
        double cross = 0.0;   // sum of B dt
        double ito = 0.0;     // sum of B dW
        double pending_A = 0.0;
        double pending_B = 0.0;
    };
    const CoefficientSet& c_;
    std::vector<TestFunction> phis_;
    double dt_;
    double w_ = 0.0;
    double pending_dw_ = 0.0;
    bool started_ = false;
    std::vector<Running> run_;
    std::vector<MartingaleSeries> out_;
};

// Batch form over stored snapshots on the full time grid.
std::vector<MartingaleSeries> martingale_components(const std::vector<EmpiricalMeasure>& trajectory,
                                                    const std::vector<double>& dW, const CoefficientSet& c,
                                                    const std::vector<TestFunction>& phis, double dt);

}  // namespace elastic
