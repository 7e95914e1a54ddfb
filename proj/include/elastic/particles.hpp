#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "elastic/coefficients.hpp"
#include "elastic/measures.hpp"
#include "elastic/noise.hpp"

namespace elastic {

enum class BoundaryMode { Elastic, Absorbing, Reflecting };
std::string to_string(BoundaryMode m);
BoundaryMode parse_boundary_mode(const std::string& s);

// Law of the initial positions on (0, inf).
class InitialLaw {
public:
    enum class Kind { Gaussian, Uniform, Point, Exponential };

    // Normal(center, width^2) conditioned on (0, inf).
    static InitialLaw gaussian(double center, double width);
    static InitialLaw uniform(double a, double b);
    static InitialLaw point(double x0);
    static InitialLaw exponential(double rate);
    // "gaussian c w", "uniform a b", "point x0", "exponential r".
    static InitialLaw parse(const std::string& spec);
    std::string spec() const;

    Kind kind() const { return kind_; }
    // Draw for particle i; the attempt counter drives rejection sampling.
    double sample(std::uint64_t seed, std::uint64_t stream) const;
    bool has_density() const { return kind_ != Kind::Point; }
    double density(double x) const;
    // nu0((lambda, inf)) in closed form.
    double tail(double lambda) const;
    // A point beyond which the law has mass below 1e-15.
    double support_max() const;
    // Interval carrying the density up to a relative 1e-20, with jumps only at its ends.
    std::pair<double, double> density_support() const;

private:
    Kind kind_ = Kind::Point;
    double a_ = 1.0, b_ = 0.0;
    double norm_ = 1.0;
};

struct TailProbe {
    double alpha;
    double worst_ratio;  // max over the grid of R(lambda) / R(0), R(lambda) = nu0(lambda,inf) e^{alpha lambda}
    bool decays;
};
// Probe grid: 201 points on [0, support_max]. decays holds when R is non-increasing on
// the last quarter of the grid and ends below R(0).
std::vector<TailProbe> probe_initial_tail(const InitialLaw& law, const std::vector<double>& alphas);

// mu(t, x, nu) = mu(t, x) + b <nu, f> with f bounded and Lipschitz.
struct NonlinearDrift {
    enum class Shape { Tanh, ClippedLinear };
    bool enabled = false;
    double b = 0.0;
    Shape shape = Shape::Tanh;
    double clip = 5.0;
    double lipschitz_constant = 1.0;  // declared c in |mu(nu) - mu(nu')| <= c d0(nu, nu')

    double f(double x) const { return shape == Shape::Tanh ? std::tanh(x) : std::clamp(x, -clip, clip); }
    static Shape parse_shape(const std::string& s);
    static std::string to_string(Shape s);
};

struct SimConfig {
    std::size_t N = 1000;
    double T = 1.0;
    double dt = 1e-3;
    BoundaryMode mode = BoundaryMode::Elastic;
    std::vector<double> snapshot_times;
    NonlinearDrift nonlinear;
};

struct ParticleSystemState {
    std::vector<double> x;
    std::vector<double> L;
    std::vector<double> chi;
    std::vector<std::uint8_t> alive;
    std::vector<double> tau;  // NaN until killed
    double t = 0.0;
    std::size_t step = 0;
    std::size_t killed = 0;

    std::size_t n() const { return x.size(); }
    double loss() const { return static_cast<double>(killed) / static_cast<double>(x.size()); }
    EmpiricalMeasure measure() const { return EmpiricalMeasure::from_alive(x, alive); }
};

ParticleSystemState initial_state(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law,
                                  const NoisePath& noise);

// <nu, f> over the alive particles with weight 1/N.
double interaction_mean(const ParticleSystemState& s, const NonlinearDrift& d);
// b <nu, f>, or exactly 0 when the interaction is off or b = 0.
double interaction_drift(const ParticleSystemState& s, const NonlinearDrift& d);

// One Euler step with one-step Skorokhod reflection and elastic killing.
// extra_drift is added to mu for every particle (the frozen interaction term).
void step(ParticleSystemState& s, const CoefficientSet& c, const NoisePath& noise, double extra_drift = 0.0);

struct SimResult {
    std::vector<double> snapshot_t;
    std::vector<EmpiricalMeasure> snapshots;
    std::vector<double> loss;  // loss at every grid time t_0..t_K
    std::vector<double> tau;
    ParticleSystemState final_state;
    std::vector<std::string> warnings;
    double lipschitz_worst_ratio = 0.0;  // max |mu(nu) - mu(nu')| / (c * d0 bound) over consecutive snapshots
};

// Called at t_0 and after every step.
using ParticleObserver = std::function<void(const ParticleSystemState&)>;

SimResult simulate(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law, const NoisePath& noise,
                   const ParticleObserver& observer = {});

// Same as simulate with mu replaced by mu + b <nu_{t_k}, f> on step k.
SimResult simulate_nonlinear(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law,
                             const NoisePath& noise, const ParticleObserver& observer = {});

struct LipschitzProbe {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // |mu(nu) - mu(nu')| / (c * d0 upper bound)
};
// Random empirical-measure pairs drawn from shifted and reweighted laws.
LipschitzProbe lipschitz_probe(const NonlinearDrift& drift, std::size_t pairs, std::size_t atoms, std::uint64_t seed);

struct PairEstimate {
    double estimate;
    double se;
    double ceiling;  // 2 eps^2 / (pi sqrt(1 - rho^2) t)
};
// Monte Carlo estimate of P(0 < |X0 + W1_t| < eps, 0 < |Y0 + W2_t| < eps) for correlated W1, W2.
PairEstimate pair_boundary_probability(double rho, double t, double eps, std::size_t M, std::uint64_t seed,
                                       const InitialLaw& law);

// Grid index of time t on a grid of step dt; ConfigError when t is off-grid.
std::size_t grid_index(double t, double dt);

}  // namespace elastic
