#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elastic/coefficients.hpp"
#include "elastic/fdsolver.hpp"
#include "elastic/particles.hpp"

namespace elastic {

// Flat, typed, sectioned key-value configuration. Every field has a default;
// unknown keys and malformed values are ConfigErrors.
struct ExperimentConfig {
    // [experiment]
    std::string kind = "simulate";
    std::uint64_t seed = 1;
    int replications = 10;
    std::string output = "out";

    // [coefficients]
    std::string mu = "constant 0";
    std::string sigma = "constant 1";
    std::string rho = "constant 0.5";
    double kappa = 1.0;
    double bound_C = 2.0;
    double fd_step = 1e-5;
    int validate_t_points = 11;   // assumption spot-check grid on [0, T]
    int validate_x_points = 201;  // and on [0, solver x_max]

    // [initial]
    std::string law = "gaussian 1 0.1";
    std::vector<double> tail_alpha = {0.5, 1.0, 2.0};

    // [particles]
    std::int64_t N = 100000;
    double T = 1.0;
    double dt = 1e-3;
    std::string mode = "elastic";
    std::vector<double> snapshot_times = {0.0, 0.5, 1.0};
    std::vector<std::int64_t> N_ladder = {2500, 10000, 40000};

    // [nonlinear]
    bool interaction = false;
    double b = 0.0;
    std::string shape = "tanh";
    double clip = 5.0;
    double lipschitz = 1.0;
    int probe_pairs = 100;

    // [solver]
    double dx = 1e-2;
    double solver_dt = 0.0;  // 0: largest noise refinement allowed by the guard
    double x_max = 0.0;      // 0: default truncation
    double guard = 0.05;
    double tail_threshold = 1e-6;

    // [kernels]
    std::vector<double> kernel_eps = {0.01, 0.05, 0.25, 0.5, 1.0};
    std::vector<double> kernel_kappa = {0.0, 0.5, 1.0, 2.0, 5.0};
    int kernel_points = 100;
    int contraction_trials = 100;
    double fault_kappa_scale = 1.0;

    // [study]
    double bin = 0.05;
    std::vector<double> eps_ladder = {0.02, 0.03, 0.05, 0.08, 0.12, 0.2, 0.3};
    std::vector<double> kappa_ladder = {0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> compare_kappas = {0.0, 1.0};
    std::vector<double> tail_lambdas = {4.0, 6.0, 8.0};
    double spatial_a = 1.0;
    double spatial_delta = 0.5;
    std::vector<double> pair_eps = {0.02, 0.05, 0.1};
    double pair_rho = 0.5;
    double pair_t = 1.0;
    std::int64_t pair_M = 10000000;
    std::vector<double> test_lambdas = {0.5, 1.0, 2.0};
    std::vector<double> check_times = {0.25, 0.5, 1.0};
    int kernel_every = 1;
    double weak_eps = 0.01;
    std::vector<double> loss_eps = {0.1, 0.05, 0.02, 0.01};
    std::vector<double> spatial_widths = {0.01, 0.02, 0.05, 0.1, 0.2};
    int ladder_replications = 40;

    bool operator==(const ExperimentConfig&) const = default;

    CoefficientSet coefficients() const;
    InitialLaw initial_law() const;
    SimConfig sim_config() const;
    NonlinearDrift nonlinear() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& c);

// The fixed subcommand set.
const std::vector<std::string>& experiment_kinds();

}  // namespace elastic
