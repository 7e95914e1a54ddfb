#include "elastic/noise.hpp"

#include <cmath>
#include <string>

#include "elastic/errors.hpp"

namespace elastic {

std::size_t integral_steps(double T, double dt, const char* what) {
    if (!(dt > 0.0) || !(T > 0.0) || !std::isfinite(T / dt))
        throw ConfigError(std::string(what) + ": T and dt must be positive");
    const double ratio = T / dt;
    const double k = std::round(ratio);
    if (std::abs(ratio - k) > 1e-9 * std::max(1.0, k) || k < 1.0)
        throw ConfigError(std::string(what) + ": T/dt is not an integer");
    return static_cast<std::size_t>(k);
}

NoisePath::NoisePath(std::uint64_t seed, double T, double dt) : seed_(seed), T_(T), dt_(dt) {
    const std::size_t K = integral_steps(T, dt, "noise path");
    dw_.resize(K);
    const Stream s(seed, Purpose::CommonNoise, 0);
    const double sd = std::sqrt(dt);
    for (std::size_t k = 0; k < K; ++k) dw_[k] = sd * s.normal(k);
}

NoisePath NoisePath::from_increments(std::uint64_t seed, double dt, std::vector<double> dw) {
    NoisePath p;
    p.seed_ = seed;
    p.dt_ = dt;
    p.T_ = dt * static_cast<double>(dw.size());
    p.dw_ = std::move(dw);
    return p;
}

std::vector<double> NoisePath::cumulative() const {
    std::vector<double> w(dw_.size() + 1, 0.0);
    for (std::size_t k = 0; k < dw_.size(); ++k) w[k + 1] = w[k] + dw_[k];
    return w;
}

NoisePath NoisePath::refined(int levels) const {
    NoisePath p = *this;
    for (int l = 0; l < levels; ++l) {
        const int next = p.level_ + 1;
        const Stream s(seed_, Purpose::Bridge, static_cast<std::uint64_t>(next));
        const double half_sd = std::sqrt(p.dt_ / 4.0);
        std::vector<double> fine(2 * p.dw_.size());
        for (std::size_t k = 0; k < p.dw_.size(); ++k) {
            const double z = half_sd * s.normal(k);
            fine[2 * k] = 0.5 * p.dw_[k] + z;
            fine[2 * k + 1] = 0.5 * p.dw_[k] - z;
        }
        p.dw_ = std::move(fine);
        p.dt_ *= 0.5;
        p.level_ = next;
    }
    return p;
}

NoisePath NoisePath::refined_to(double target_dt) const {
    if (!(target_dt > 0.0)) throw ConfigError("refinement target dt must be positive");
    const double ratio = dt_ / target_dt;
    const double l = std::round(std::log2(ratio));
    if (l < 0.0 || std::abs(ratio - std::exp2(l)) > 1e-9 * ratio)
        throw ConfigError("solver dt must equal the noise dt divided by a power of two");
    return refined(static_cast<int>(l));
}

NoisePath NoisePath::with_replica(std::uint64_t r) const {
    NoisePath p = *this;
    p.replica_ = r;
    return p;
}

}  // namespace elastic
