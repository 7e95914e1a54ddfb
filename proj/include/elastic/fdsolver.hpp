#pragma once

#include <functional>
#include <string>
#include <vector>

#include "elastic/coefficients.hpp"
#include "elastic/kernels.hpp"
#include "elastic/measures.hpp"
#include "elastic/noise.hpp"
#include "elastic/particles.hpp"

namespace elastic {

struct SolverConfig {
    double T = 1.0;
    double x_max = 8.0;
    double dx = 1e-2;
    double dt = 1e-4;  // noise dt divided by a power of two
    BoundaryMode mode = BoundaryMode::Elastic;
    double stability_guard = 0.05;  // dt <= guard * dx^2 whenever rho is not identically 0
    double tail_threshold = 1e-6;
    std::vector<double> snapshot_times;
};

// Default truncation: max support of nu0 plus 6 max(sigma) sqrt(T).
double default_x_max(const InitialLaw& law, double sigma_max, double T);

// Control-volume averages of nu0 on the solver grid; throws ConfigError if the law
// has no density or the values integrate above 1.
GridFunction discretize_initial(const InitialLaw& law, double x_max, double dx);

struct SolveResult {
    std::vector<double> snapshot_t;
    std::vector<GridFunction> snapshots;
    std::vector<double> t;          // every solver time
    std::vector<double> mass;       // control-volume mass at every solver time
    std::vector<double> boundary;   // V(t, 0)
    double dt = 0.0;
    double dx = 0.0;
    int refine_levels = 0;
    double guard = 0.0;
    bool guard_enforced = false;
    double tail_mass_max = 0.0;     // max over time of the mass in the last 10 cells
    double min_value = 0.0;         // min over time and space of V
    std::size_t limiter_activations = 0;  // cell-steps where the positivity limiter scaled fluxes
    std::vector<std::string> warnings;
};

// Called at every solver time with the nodal values (node M is the Dirichlet edge).
using SolverObserver = std::function<void(std::size_t n, double t, const std::vector<double>& V)>;

SolveResult solve_spde_path(const CoefficientSet& c, const NoisePath& noise, const SolverConfig& cfg,
                            const GridFunction& V0, const SolverObserver& observer = {});

// Mass of V in the solver's control volumes: dx/2 for node 0, dx elsewhere.
double control_volume_mass(const GridFunction& V);
// Same weighting applied to |V1 - V2|.
double l1_distance(const GridFunction& V1, const GridFunction& V2);

struct MassLossSeries {
    std::vector<double> t;
    std::vector<double> rate;       // -kappa sigma(t,0)^2/2 V_t(0)
    std::vector<double> predicted;  // cumulative integral of -rate (trapezoid)
    std::vector<double> actual;     // mass(0) - mass(t)
    double relative_gap() const;    // |predicted - actual| / actual at the final time
};
MassLossSeries mass_loss_series(const SolveResult& r, const CoefficientSet& c, double kappa);

// Residual of the weak boundary identity for the solver density, evaluated online.
class WeakBoundaryMonitor {
public:
    WeakBoundaryMonitor(const CoefficientSet& c, double eps, double dx, std::size_t points, const NoisePath& fine_noise);
    void operator()(std::size_t n, double t, const std::vector<double>& V);
    const std::vector<double>& residual() const { return residual_; }
    double sup() const;

private:
    const CoefficientSet& c_;
    double dx_;
    GridFunction phi_, g0_, gbar_;
    const NoisePath& noise_;
    double p0_ = 0.0, acc_ = 0.0;
    double pend_dt_ = 0.0, pend_dw_ = 0.0;
    std::vector<double> residual_;
};

// Analytic density at time T for sigma = 1, mu = 0, rho = 0: integral of G_T(x, y) V0(y) dy.
GridFunction analytic_elastic_solution(const InitialLaw& law, double kappa, double T, double dx, std::size_t points);

// Bins V into [j*bin, (j+1)*bin) masses; bin must be a multiple of V.dx.
std::vector<double> bin_masses(const GridFunction& V, double bin, std::size_t bins);
std::vector<double> bin_masses(const EmpiricalMeasure& m, double bin, std::size_t bins);

struct ComparisonRow {
    double t;
    double l1;
    double mass_diff;
};
std::vector<ComparisonRow> compare_particle_vs_solver(const std::vector<double>& particle_t,
                                                      const std::vector<EmpiricalMeasure>& particles,
                                                      const SolveResult& solver, double bin);

struct KappaRow {
    double kappa;
    double d_absorbing;
    double d_reflecting;
};
std::vector<KappaRow> kappa_limit_study(const std::vector<double>& kappas, const NoisePath& noise,
                                        const CoefficientSet& c, const SolverConfig& cfg, const GridFunction& V0);

}  // namespace elastic
