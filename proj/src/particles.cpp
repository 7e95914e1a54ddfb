#include "elastic/particles.hpp"

#include <charconv>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/format.hpp"
#include "elastic/parallel.hpp"

namespace elastic {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::uint64_t particle_stream(std::uint64_t i, std::uint64_t replica) { return i | (replica << 40); }

}  // namespace

std::string to_string(BoundaryMode m) {
    switch (m) {
        case BoundaryMode::Elastic: return "elastic";
        case BoundaryMode::Absorbing: return "absorbing";
        case BoundaryMode::Reflecting: return "reflecting";
    }
    return "?";
}

BoundaryMode parse_boundary_mode(const std::string& s) {
    if (s == "elastic") return BoundaryMode::Elastic;
    if (s == "absorbing") return BoundaryMode::Absorbing;
    if (s == "reflecting") return BoundaryMode::Reflecting;
    throw ConfigError("unknown boundary mode '" + s + "' (elastic, absorbing, reflecting)");
}

InitialLaw InitialLaw::gaussian(double center, double width) {
    if (!(width > 0.0) || !std::isfinite(center)) throw ConfigError("gaussian initial law needs width > 0");
    InitialLaw l;
    l.kind_ = Kind::Gaussian;
    l.a_ = center;
    l.b_ = width;
    l.norm_ = normal_cdf(center / width);
    if (!(l.norm_ > 1e-6)) throw ConfigError("gaussian initial law has almost no mass on (0, inf)");
    return l;
}

InitialLaw InitialLaw::uniform(double a, double b) {
    if (!(a >= 0.0) || !(b > a)) throw ConfigError("uniform initial law needs 0 <= a < b");
    InitialLaw l;
    l.kind_ = Kind::Uniform;
    l.a_ = a;
    l.b_ = b;
    return l;
}

InitialLaw InitialLaw::point(double x0) {
    if (!(x0 > 0.0)) throw ConfigError("point initial law needs x0 > 0");
    InitialLaw l;
    l.kind_ = Kind::Point;
    l.a_ = x0;
    return l;
}

InitialLaw InitialLaw::exponential(double rate) {
    if (!(rate > 0.0)) throw ConfigError("exponential initial law needs rate > 0");
    InitialLaw l;
    l.kind_ = Kind::Exponential;
    l.a_ = rate;
    return l;
}

InitialLaw InitialLaw::parse(const std::string& spec) {
    std::istringstream is(spec);
    std::string kind;
    is >> kind;
    std::vector<double> v;
    for (std::string tok; is >> tok;) {
        double d = 0.0;
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
        if (ec != std::errc() || end != tok.data() + tok.size())
            throw ConfigError("initial law '" + spec + "': bad number '" + tok + "'");
        v.push_back(d);
    }
    auto need = [&](std::size_t n) {
        if (v.size() != n) throw ConfigError("initial law '" + spec + "': wrong parameter count");
    };
    if (kind == "gaussian") {
        need(2);
        return gaussian(v[0], v[1]);
    }
    if (kind == "uniform") {
        need(2);
        return uniform(v[0], v[1]);
    }
    if (kind == "point") {
        need(1);
        return point(v[0]);
    }
    if (kind == "exponential") {
        need(1);
        return exponential(v[0]);
    }
    throw ConfigError("initial law '" + spec + "': unknown kind '" + kind + "'");
}

std::string InitialLaw::spec() const {
    switch (kind_) {
        case Kind::Gaussian: return "gaussian " + format_double(a_) + " " + format_double(b_);
        case Kind::Uniform: return "uniform " + format_double(a_) + " " + format_double(b_);
        case Kind::Point: return "point " + format_double(a_);
        case Kind::Exponential: return "exponential " + format_double(a_);
    }
    return {};
}

double InitialLaw::sample(std::uint64_t seed, std::uint64_t stream) const {
    const Stream s(seed, Purpose::InitialPosition, stream);
    switch (kind_) {
        case Kind::Gaussian:
            for (std::uint64_t attempt = 0;; ++attempt) {
                const double x = a_ + b_ * s.normal(attempt);
                if (x > 0.0) return x;
            }
        case Kind::Uniform: {
            const double x = a_ + (b_ - a_) * s.uniform(0);
            return x > 0.0 ? x : std::nextafter(0.0, 1.0);
        }
        case Kind::Point: return a_;
        case Kind::Exponential: return -std::log(s.uniform(0)) / a_;
    }
    return a_;
}

double InitialLaw::density(double x) const {
    if (x < 0.0) return 0.0;
    switch (kind_) {
        case Kind::Gaussian: {
            const double z = (x - a_) / b_;
            return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * b_ * norm_);
        }
        case Kind::Uniform: return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
        case Kind::Exponential: return a_ * std::exp(-a_ * x);
        case Kind::Point: break;
    }
    throw ConfigError("point initial law has no density");
}

double InitialLaw::tail(double lambda) const {
    if (lambda < 0.0) return 1.0;
    switch (kind_) {
        case Kind::Gaussian: return normal_cdf(-(lambda - a_) / b_) / norm_;
        case Kind::Uniform: return std::clamp((b_ - lambda) / (b_ - a_), 0.0, 1.0);
        case Kind::Point: return lambda < a_ ? 1.0 : 0.0;
        case Kind::Exponential: return std::exp(-a_ * lambda);
    }
    return 0.0;
}

double InitialLaw::support_max() const {
    switch (kind_) {
        case Kind::Gaussian: return a_ + 8.0 * b_;
        case Kind::Uniform: return b_;
        case Kind::Point: return a_;
        case Kind::Exponential: return 35.0 / a_;
    }
    return a_;
}

std::pair<double, double> InitialLaw::density_support() const {
    switch (kind_) {
        case Kind::Gaussian: return {std::max(0.0, a_ - 10.0 * b_), a_ + 10.0 * b_};
        case Kind::Uniform: return {a_, b_};
        case Kind::Exponential: return {0.0, 46.0 / a_};
        case Kind::Point: break;
    }
    throw ConfigError("point initial law has no density");
}

std::vector<TailProbe> probe_initial_tail(const InitialLaw& law, const std::vector<double>& alphas) {
    std::vector<TailProbe> out;
    const double end = law.support_max();
    const int points = 200;
    for (double alpha : alphas) {
        std::vector<double> r(points + 1);
        for (int k = 0; k <= points; ++k) {
            const double lam = end * k / points;
            r[k] = law.tail(lam) * std::exp(alpha * lam);
        }
        bool ok = r[points] < r[0];
        for (int k = 3 * points / 4; k < points; ++k)
            if (r[k + 1] > r[k] * (1.0 + 1e-12)) ok = false;
        const double worst = *std::max_element(r.begin(), r.end()) / r[0];
        out.push_back({alpha, worst, ok});
    }
    return out;
}

NonlinearDrift::Shape NonlinearDrift::parse_shape(const std::string& s) {
    if (s == "tanh") return Shape::Tanh;
    if (s == "clipped-linear") return Shape::ClippedLinear;
    throw ConfigError("unknown interaction shape '" + s + "' (tanh, clipped-linear)");
}

std::string NonlinearDrift::to_string(Shape s) { return s == Shape::Tanh ? "tanh" : "clipped-linear"; }

std::size_t grid_index(double t, double dt) {
    const double k = std::round(t / dt);
    if (k < 0.0 || std::abs(t - k * dt) > 1e-9 * std::max(1.0, std::abs(t)))
        throw ConfigError("time " + std::to_string(t) + " is not on the simulation grid");
    return static_cast<std::size_t>(k);
}

ParticleSystemState initial_state(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law,
                                  const NoisePath& noise) {
    if (cfg.N < 1) throw ConfigError("N must be >= 1");
    ParticleSystemState s;
    const std::size_t n = cfg.N;
    s.x.resize(n);
    s.L.assign(n, 0.0);
    s.chi.resize(n);
    s.alive.assign(n, 1);
    s.tau.assign(n, std::numeric_limits<double>::quiet_NaN());
    const std::uint64_t seed = noise.seed();
    const std::uint64_t rep = noise.replica();
    for_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            s.x[i] = law.sample(seed, particle_stream(i, rep));
            switch (cfg.mode) {
                case BoundaryMode::Absorbing: s.chi[i] = 0.0; break;
                case BoundaryMode::Reflecting: s.chi[i] = std::numeric_limits<double>::infinity(); break;
                case BoundaryMode::Elastic:
                    s.chi[i] = c.kappa > 0.0
                                   ? -std::log(Stream(seed, Purpose::Clock, particle_stream(i, rep)).uniform(0)) / c.kappa
                                   : std::numeric_limits<double>::infinity();
                    break;
            }
        }
    });
    return s;
}

void step(ParticleSystemState& s, const CoefficientSet& c, const NoisePath& noise, double extra_drift) {
    const std::size_t k = s.step;
    if (k >= noise.steps()) throw std::out_of_range("step: noise path exhausted");
    const double dt = noise.dt();
    const double t = s.t;
    const double rho = c.rho(t, 0.0);
    const double common = rho * noise.increment(k);
    const double idio_scale = std::sqrt(1.0 - rho * rho) * std::sqrt(dt);
    const double t_next = static_cast<double>(k + 1) * dt;
    const std::size_t n = s.n();
    std::vector<std::size_t> killed(chunk_count(n), 0);
    for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
        std::size_t kc = 0;
        for (std::size_t i = b; i < e; ++i) {
            if (!s.alive[i]) continue;
            const double x = s.x[i];
            double mu = c.mu(t, x);
            if (extra_drift != 0.0) mu += extra_drift;
            const double sg = c.sigma(t, x);
            const double z = noise.idiosyncratic_normal(i, k);
            const double y = x + mu * dt + sg * (common + idio_scale * z);
            if (!std::isfinite(y)) {
                std::ostringstream os;
                os << "particle " << i << " left the finite range at t=" << t_next;
                throw NumericalAbort(os.str());
            }
            if (y >= 0.0) {
                s.x[i] = y;
                continue;
            }
            s.x[i] = 0.0;
            const double L = s.L[i] - y;
            if (L > s.chi[i]) {
                s.alive[i] = 0;
                s.tau[i] = t_next;
                ++kc;
            }
            s.L[i] = L;
        }
        killed[ci] = kc;
    });
    for (std::size_t kc : killed) s.killed += kc;
    s.step = k + 1;
    s.t = t_next;
}

double interaction_mean(const ParticleSystemState& s, const NonlinearDrift& d) {
    const std::size_t n = s.n();
    std::vector<double> part(chunk_count(n), 0.0);
    for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i)
            if (s.alive[i]) acc += d.f(s.x[i]);
        part[ci] = acc;
    });
    double tot = 0.0;
    for (double p : part) tot += p;
    return tot / static_cast<double>(n);
}

double interaction_drift(const ParticleSystemState& s, const NonlinearDrift& d) {
    if (!d.enabled || d.b == 0.0) return 0.0;
    return d.b * interaction_mean(s, d);
}

namespace {

double pair_f(const EmpiricalMeasure& m, const NonlinearDrift& d) {
    double s = 0.0;
    for (double a : m.atoms()) s += d.f(a);
    return s * m.weight();
}

SimResult run(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law, const NoisePath& noise,
              const ParticleObserver& observer, bool nonlinear) {
    c.check_shape();
    if (std::abs(noise.dt() - cfg.dt) > 1e-12 * cfg.dt) throw ConfigError("simulation dt differs from the noise dt");
    const std::size_t K = integral_steps(cfg.T, cfg.dt, "simulation");
    if (K > noise.steps()) throw ConfigError("noise path shorter than the simulation horizon");
    std::vector<std::size_t> snap_k;
    for (double ts : cfg.snapshot_times) {
        const std::size_t k = grid_index(ts, cfg.dt);
        if (k > K) throw ConfigError("snapshot time beyond the horizon");
        snap_k.push_back(k);
    }
    std::sort(snap_k.begin(), snap_k.end());
    snap_k.erase(std::unique(snap_k.begin(), snap_k.end()), snap_k.end());

    SimResult r;
    ParticleSystemState s = initial_state(cfg, c, law, noise);
    r.loss.reserve(K + 1);
    std::size_t next_snap = 0;
    auto record = [&]() {
        r.loss.push_back(s.loss());
        while (next_snap < snap_k.size() && snap_k[next_snap] == s.step) {
            r.snapshot_t.push_back(s.t);
            r.snapshots.push_back(s.measure());
            ++next_snap;
        }
        if (observer) observer(s);
    };
    record();
    const bool interact = nonlinear && cfg.nonlinear.enabled && cfg.nonlinear.b != 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double extra = interact ? interaction_drift(s, cfg.nonlinear) : 0.0;
        step(s, c, noise, extra);
        record();
    }

    if (interact && cfg.nonlinear.lipschitz_constant > 0.0) {
        for (std::size_t q = 1; q < r.snapshots.size(); ++q) {
            const auto& m1 = r.snapshots[q - 1];
            const auto& m2 = r.snapshots[q];
            const double dmu = std::abs(cfg.nonlinear.b * (pair_f(m1, cfg.nonlinear) - pair_f(m2, cfg.nonlinear)));
            const auto d0 = bounded_lipschitz_distance(m1, m2);
            const double bound = cfg.nonlinear.lipschitz_constant * (d0.value + d0.error_bound);
            const double ratio = bound > 0.0 ? dmu / bound : (dmu > 0.0 ? INFINITY : 0.0);
            r.lipschitz_worst_ratio = std::max(r.lipschitz_worst_ratio, ratio);
            if (ratio > 1.0) {
                std::ostringstream os;
                os << "interaction drift violates the declared Lipschitz constant between t=" << r.snapshot_t[q - 1]
                   << " and t=" << r.snapshot_t[q] << " (ratio " << ratio << ")";
                r.warnings.push_back(os.str());
            }
        }
    }
    r.tau = s.tau;
    r.final_state = std::move(s);
    return r;
}

}  // namespace

SimResult simulate(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law, const NoisePath& noise,
                   const ParticleObserver& observer) {
    return run(cfg, c, law, noise, observer, false);
}

SimResult simulate_nonlinear(const SimConfig& cfg, const CoefficientSet& c, const InitialLaw& law,
                             const NoisePath& noise, const ParticleObserver& observer) {
    return run(cfg, c, law, noise, observer, true);
}

LipschitzProbe lipschitz_probe(const NonlinearDrift& drift, std::size_t pairs, std::size_t atoms, std::uint64_t seed) {
    LipschitzProbe p;
    SequenceRng rng(seed, Purpose::Sample, 0);
    for (std::size_t q = 0; q < pairs; ++q) {
        auto draw = [&](double centre, double spread, double keep) {
            std::vector<double> a;
            for (std::size_t i = 0; i < atoms; ++i) {
                const double x = std::abs(centre + spread * rng.normal());
                if (rng.uniform() < keep) a.push_back(x);
            }
            return EmpiricalMeasure(std::move(a), atoms);
        };
        const double c1 = rng.uniform(0.0, 4.0);
        const double c2 = c1 + rng.uniform(-1.0, 1.0);
        const auto m1 = draw(c1, rng.uniform(0.1, 1.5), rng.uniform(0.5, 1.0));
        const auto m2 = draw(c2, rng.uniform(0.1, 1.5), rng.uniform(0.5, 1.0));
        const double dmu = std::abs(drift.b * (pair_f(m1, drift) - pair_f(m2, drift)));
        const auto d0 = bounded_lipschitz_distance(m1, m2);
        const double bound = drift.lipschitz_constant * (d0.value + d0.error_bound);
        const double ratio = bound > 0.0 ? dmu / bound : (dmu > 0.0 ? INFINITY : 0.0);
        p.worst_ratio = std::max(p.worst_ratio, ratio);
        if (ratio > 1.0) ++p.violations;
        ++p.pairs;
    }
    return p;
}

PairEstimate pair_boundary_probability(double rho, double t, double eps, std::size_t M, std::uint64_t seed,
                                       const InitialLaw& law) {
    if (!(std::abs(rho) < 1.0) || !(t > 0.0) || !(eps > 0.0) || M == 0)
        throw std::invalid_argument("pair_boundary_probability: need |rho| < 1, t > 0, eps > 0, M > 0");
    const double sq = std::sqrt(t);
    const double rc = std::sqrt(1.0 - rho * rho);
    std::vector<std::size_t> hits(chunk_count(M), 0);
    for_chunks(M, [&](std::size_t ci, std::size_t b, std::size_t e) {
        const Stream s(seed, Purpose::Pair, 0);
        std::size_t h = 0;
        for (std::size_t i = b; i < e; ++i) {
            const auto [z1, z2] = s.normals(i);
            const double x0 = law.sample(seed, 2 * i);
            const double y0 = law.sample(seed, 2 * i + 1);
            const double a = std::abs(x0 + sq * z1);
            const double c = std::abs(y0 + sq * (rho * z1 + rc * z2));
            if (a > 0.0 && a < eps && c > 0.0 && c < eps) ++h;
        }
        hits[ci] = h;
    });
    std::size_t total = 0;
    for (std::size_t h : hits) total += h;
    const double p = static_cast<double>(total) / static_cast<double>(M);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(M)),
            2.0 * eps * eps / (std::numbers::pi * rc * t)};
}

}  // namespace elastic
