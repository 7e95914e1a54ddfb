#pragma once

#include <string>
#include <vector>

#include "elastic/config.hpp"

namespace elastic {

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

// A CSV table: header plus numeric rows.
struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct Report {
    std::string kind;
    std::vector<Check> checks;
    std::vector<Table> tables;
    std::vector<std::string> warnings;
    // Scalar facts echoed into the manifest (scheme parameters, guards, sizes).
    std::vector<std::pair<std::string, std::string>> facts;

    bool pass() const;
    const Check* find(const std::string& name) const;
    Check& add(std::string name, bool pass, double value, double threshold, std::string detail = {});
};

// Mean and standard error of a sample.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& xs);

// Least-squares slope of y on x with its leave-one-out jackknife standard error over
// replications: samples[r][i] is replication r at abscissa i, and the fit uses
// log(mean over replications).
struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
};
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);
SlopeFit jackknife_log_slope(const std::vector<double>& x, const std::vector<std::vector<double>>& samples);

Report cmd_verify_kernels(const ExperimentConfig& c);
Report cmd_convergence(const ExperimentConfig& c);
Report cmd_class_lambda(const ExperimentConfig& c);
Report cmd_compare(const ExperimentConfig& c);
Report cmd_kappa_limits(const ExperimentConfig& c);
Report cmd_mass_loss(const ExperimentConfig& c);
Report cmd_simulate(const ExperimentConfig& c);
Report cmd_solve(const ExperimentConfig& c);

// Dispatches on c.kind.
Report run_experiment(const ExperimentConfig& c);

// Solver configuration derived from an experiment config: default x_max and the
// coarsest power-of-two refinement of the particle dt meeting the guard.
SolverConfig solver_config(const ExperimentConfig& c, const InitialLaw& law);

}  // namespace elastic
