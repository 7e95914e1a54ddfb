#pragma once

#include <cstdint>
#include <vector>

#include "elastic/rng.hpp"

namespace elastic {

// Discretized common noise W0 on a uniform grid plus keyed access to the
// idiosyncratic increments. Level l holds the path refined l times by
// Brownian-bridge halving of the level-0 grid.
class NoisePath {
public:
    // Draws K = round(T/dt) level-0 increments ~ Normal(0, dt).
    NoisePath(std::uint64_t seed, double T, double dt);

    std::uint64_t seed() const { return seed_; }
    double horizon() const { return T_; }
    double dt() const { return dt_; }
    int level() const { return level_; }
    std::size_t steps() const { return dw_.size(); }
    double increment(std::size_t k) const { return dw_[k]; }
    const std::vector<double>& increments() const { return dw_; }
    double time(std::size_t k) const { return static_cast<double>(k) * dt_; }

    // W0(t_k), left-to-right cumulative sum.
    std::vector<double> cumulative() const;

    // Same W0 on a grid finer by 2^levels; every coarse increment is the sum
    // of its refined children.
    NoisePath refined(int levels) const;

    // Refines until dt equals target_dt; target_dt must be dt/2^l.
    NoisePath refined_to(double target_dt) const;

    // Idiosyncratic replica: particles of replica r draw from disjoint streams
    // while sharing this W0.
    NoisePath with_replica(std::uint64_t r) const;
    std::uint64_t replica() const { return replica_; }

    // Standard normal driving particle i at step k.
    double idiosyncratic_normal(std::uint64_t i, std::uint64_t k) const {
        return Stream(seed_, Purpose::Idiosyncratic, i | (replica_ << 40) | (static_cast<std::uint64_t>(level_) << 56))
            .ziggurat_normal(k);
    }

    // Copy with every increment replaced, used for hand-built paths in tests.
    static NoisePath from_increments(std::uint64_t seed, double dt, std::vector<double> dw);

private:
    NoisePath() = default;
    std::uint64_t seed_ = 0;
    std::uint64_t replica_ = 0;
    double T_ = 0.0;
    double dt_ = 0.0;
    int level_ = 0;
    std::vector<double> dw_;
};

// Number of steps T/dt, or ConfigError if T/dt is not an integer within 1e-9.
std::size_t integral_steps(double T, double dt, const char* what);

}  // namespace elastic
