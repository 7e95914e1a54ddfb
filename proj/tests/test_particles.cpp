#include <doctest.h>

#include <cmath>
#include <limits>

#include "elastic/errors.hpp"
#include "elastic/parallel.hpp"
#include "elastic/particles.hpp"

using namespace elastic;

namespace {

SimConfig small_config(std::size_t N, double T, double dt, BoundaryMode mode = BoundaryMode::Elastic) {
    SimConfig cfg;
    cfg.N = N;
    cfg.T = T;
    cfg.dt = dt;
    cfg.mode = mode;
    return cfg;
}

}  // namespace

TEST_CASE("initial laws") {
    for (const char* s : {"gaussian 1 0.1", "uniform 0 2", "point 1", "exponential 3"})
        CHECK(InitialLaw::parse(InitialLaw::parse(s).spec()).spec() == InitialLaw::parse(s).spec());
    CHECK_THROWS_AS(InitialLaw::parse("cauchy 1"), ConfigError);
    CHECK_THROWS_AS(InitialLaw::parse("uniform 1"), ConfigError);
    CHECK_THROWS_AS(InitialLaw::point(1).density(1.0), ConfigError);

    const auto e = InitialLaw::exponential(2.0);
    CHECK(e.tail(1.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(InitialLaw::uniform(0, 2).tail(0.5) == doctest::Approx(0.75));

    // Empirical tails within 5 standard errors of the closed form.
    for (const char* s : {"gaussian 0.2 1", "exponential 1.5", "uniform 0.5 1.5"}) {
        const auto law = InitialLaw::parse(s);
        const int n = 100000;
        for (double lam : {0.3, 1.0}) {
            int c = 0;
            for (int i = 0; i < n; ++i) {
                const double x = law.sample(9, i);
                REQUIRE(x > 0.0);
                c += x > lam;
            }
            const double p = law.tail(lam);
            CHECK(std::abs(c / double(n) - p) < 5 * std::sqrt(p * (1 - p) / n) + 1e-12);
        }
    }
}

TEST_CASE("initial tail probe") {
    const auto probes = probe_initial_tail(InitialLaw::exponential(2.0), {1.0, 3.0});
    CHECK(probes[0].decays);
    CHECK_FALSE(probes[1].decays);
    CHECK(probe_initial_tail(InitialLaw::gaussian(1, 0.1), {1.0, 5.0})[1].decays);
}

TEST_CASE("one step by hand") {
    CoefficientSet c;
    c.mu = ScalarField::constant(0.5);
    c.rho = ScalarField::constant(0.6);
    c.kappa = 1.0;
    const NoisePath noise = NoisePath::from_increments(4, 0.01, {0.05, -0.3});
    const auto cfg = small_config(3, 0.02, 0.01);
    auto s = initial_state(cfg, c, InitialLaw::point(0.2), noise);
    const auto before = s;
    step(s, c, noise);
    for (std::size_t i = 0; i < 3; ++i) {
        const double y = 0.2 + 0.5 * 0.01 + 0.6 * 0.05 + 0.8 * 0.1 * noise.idiosyncratic_normal(i, 0);
        if (y >= 0.0) {
            CHECK(s.x[i] == doctest::Approx(y).epsilon(1e-15));
            CHECK(s.L[i] == 0.0);
        } else {
            CHECK(s.x[i] == 0.0);
            CHECK(s.L[i] == doctest::Approx(-y));
        }
        CHECK(s.chi[i] == before.chi[i]);
    }
    CHECK(s.t == doctest::Approx(0.01));
    CHECK(s.step == 1);
}

TEST_CASE("absorbing particles die on the first crossing") {
    CoefficientSet c;
    c.mu = ScalarField::constant(-100.0);
    const NoisePath noise(5, 0.05, 0.01);
    const auto r = simulate(small_config(200, 0.05, 0.01, BoundaryMode::Absorbing), c, InitialLaw::point(0.01), noise);
    for (double t : r.tau) CHECK(t == doctest::Approx(0.01));
    CHECK(r.loss[1] == 1.0);
    CHECK(r.final_state.measure().size() == 0);
}

TEST_CASE("bookkeeping invariants (random configurations)") {
    SequenceRng rng(6, Purpose::Sample, 0);
    for (int trial = 0; trial < 8; ++trial) {
        CoefficientSet c;
        c.mu = ScalarField::tanh_ramp(-1.0, 0.5, rng.uniform(0, 2), 0.5);
        c.sigma = ScalarField::constant(rng.uniform(0.6, 1.5));
        c.rho = ScalarField::constant(rng.uniform(0, 0.9));
        c.kappa = rng.uniform(0, 4);
        const BoundaryMode mode = trial % 4 == 3 ? BoundaryMode::Reflecting : BoundaryMode::Elastic;
        auto cfg = small_config(500, 0.5, 5e-3, mode);
        cfg.snapshot_times = {0.0, 0.25, 0.5};
        const NoisePath noise(100 + trial, cfg.T, cfg.dt);
        const auto r = simulate(cfg, c, InitialLaw::gaussian(0.5, 0.5), noise);
        const auto& s = r.final_state;
        std::size_t alive = 0, dead = 0;
        for (std::size_t i = 0; i < s.n(); ++i) {
            CHECK(s.x[i] >= 0.0);
            if (s.alive[i]) {
                ++alive;
                CHECK(std::isnan(s.tau[i]));
                CHECK(s.L[i] <= s.chi[i]);
            } else {
                ++dead;
                CHECK(s.x[i] == 0.0);
                CHECK(s.L[i] > s.chi[i]);
                CHECK(s.tau[i] > 0.0);
                CHECK(s.tau[i] <= cfg.T + 1e-12);
            }
        }
        CHECK(alive + dead == cfg.N);
        CHECK(s.killed == dead);
        CHECK(r.loss.size() == 101);
        CHECK(r.loss.back() == doctest::Approx(dead / 500.0));
        for (std::size_t k = 1; k < r.loss.size(); ++k) CHECK(r.loss[k] >= r.loss[k - 1]);
        REQUIRE(r.snapshots.size() == 3);
        CHECK(r.snapshots[2].total_mass() == doctest::Approx(1.0 - r.loss.back()));
        if (mode == BoundaryMode::Reflecting) CHECK(dead == 0);
    }
}

TEST_CASE("kappa zero never kills") {
    CoefficientSet c;
    const NoisePath noise(7, 1.0, 0.01);
    const auto r = simulate(small_config(1000, 1.0, 0.01), c, InitialLaw::point(0.1), noise);
    CHECK(r.loss.back() == 0.0);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
    CoefficientSet c;
    c.rho = ScalarField::constant(0.5);
    c.kappa = 1.0;
    const NoisePath noise(8, 0.5, 0.01);
    const auto cfg = small_config(3000, 0.5, 0.01);
    const auto a = simulate(cfg, c, InitialLaw::gaussian(1, 0.3), noise);
    SimResult b;
    {
        ThreadLimit one(1);
        b = simulate(cfg, c, InitialLaw::gaussian(1, 0.3), noise);
    }
    CHECK(a.final_state.x == b.final_state.x);
    CHECK(a.final_state.L == b.final_state.L);
    CHECK(a.loss == b.loss);
    const auto other = simulate(cfg, c, InitialLaw::gaussian(1, 0.3), noise.with_replica(1));
    CHECK(other.final_state.x != a.final_state.x);
}

TEST_CASE("larger kappa kills earlier under the same noise") {
    const NoisePath noise(9, 1.0, 0.01);
    const auto cfg = small_config(2000, 1.0, 0.01);
    std::vector<SimResult> runs;
    for (double k : {0.5, 1.0, 3.0}) {
        CoefficientSet c;
        c.kappa = k;
        runs.push_back(simulate(cfg, c, InitialLaw::gaussian(0.5, 0.5), noise));
    }
    for (std::size_t q = 1; q < runs.size(); ++q) {
        CHECK(runs[q].loss.back() >= runs[q - 1].loss.back());
        for (std::size_t i = 0; i < cfg.N; ++i) {
            const double t_lo = runs[q - 1].tau[i], t_hi = runs[q].tau[i];
            if (!std::isnan(t_lo)) CHECK(t_hi <= t_lo);
        }
    }
}

TEST_CASE("single particle replay") {
    CoefficientSet c;
    c.mu = ScalarField::constant(-0.5);
    c.rho = ScalarField::constant(0.3);
    c.kappa = 2.0;
    const double dt = 0.01;
    const NoisePath noise(10, 2.0, dt);
    const auto r = simulate(small_config(1, 2.0, dt), c, InitialLaw::point(0.3), noise);

    const double chi = -std::log(Stream(10, Purpose::Clock, 0).uniform(0)) / 2.0;
    double x = 0.3, L = 0.0, tau = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < noise.steps(); ++k) {
        const double y = x + -0.5 * dt + 1.0 * (0.3 * noise.increment(k) + std::sqrt(1 - 0.3 * 0.3) * std::sqrt(dt) * noise.idiosyncratic_normal(0, k));
        if (y >= 0) {
            x = y;
            continue;
        }
        x = 0;
        L -= y;
        if (L > chi) {
            tau = (k + 1) * dt;
            break;
        }
    }
    CHECK(r.final_state.chi[0] == chi);
    if (std::isnan(tau)) {
        CHECK(std::isnan(r.tau[0]));
        CHECK(r.final_state.x[0] == x);
    } else {
        CHECK(r.tau[0] == doctest::Approx(tau));
        CHECK(r.final_state.L[0] == L);
    }
}

TEST_CASE("interaction drift") {
    CoefficientSet c;
    c.kappa = 1.0;
    c.rho = ScalarField::constant(0.4);
    const NoisePath noise(11, 0.5, 0.01);
    auto cfg = small_config(2000, 0.5, 0.01);
    cfg.snapshot_times = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    const auto plain = simulate(cfg, c, InitialLaw::gaussian(1, 0.3), noise);
    cfg.nonlinear.enabled = true;
    cfg.nonlinear.b = 0.0;
    const auto zero = simulate_nonlinear(cfg, c, InitialLaw::gaussian(1, 0.3), noise);
    CHECK(zero.final_state.x == plain.final_state.x);
    CHECK(zero.loss == plain.loss);

    cfg.nonlinear.b = -1.0;
    cfg.nonlinear.lipschitz_constant = 1.0;
    const auto on = simulate_nonlinear(cfg, c, InitialLaw::gaussian(1, 0.3), noise);
    CHECK(on.final_state.x != plain.final_state.x);
    CHECK(on.warnings.empty());
    CHECK(on.lipschitz_worst_ratio <= 1.0);

    const auto s = on.final_state;
    double m = 0;
    for (std::size_t i = 0; i < s.n(); ++i)
        if (s.alive[i]) m += std::tanh(s.x[i]);
    CHECK(interaction_mean(s, cfg.nonlinear) == doctest::Approx(m / 2000.0));
    CHECK(interaction_drift(s, cfg.nonlinear) == doctest::Approx(-m / 2000.0));
}

TEST_CASE("Lipschitz probe") {
    NonlinearDrift tanh_drift{true, -2.0, NonlinearDrift::Shape::Tanh, 5.0, 2.0};
    CHECK(lipschitz_probe(tanh_drift, 50, 400, 1).violations == 0);
    NonlinearDrift clipped{true, -1.0, NonlinearDrift::Shape::ClippedLinear, 5.0, 5.0};
    const auto ok = lipschitz_probe(clipped, 50, 400, 2);
    CHECK(ok.violations == 0);
    CHECK(ok.worst_ratio <= 1.0);
    clipped.lipschitz_constant = 0.2;
    CHECK(lipschitz_probe(clipped, 50, 400, 2).violations > 0);
}

TEST_CASE("pair boundary probability against quadrature") {
    // Independent Brownian motions from 1, eps = 0.1, t = 1.
    const auto p = pair_boundary_probability(0.0, 1.0, 0.1, 2000000, 12, InitialLaw::point(1.0));
    CHECK(std::abs(p.estimate - 0.002341985469187818) < 4 * p.se);
    CHECK(p.ceiling == doctest::Approx(2 * 0.01 / std::numbers::pi));
    const auto q = pair_boundary_probability(0.5, 1.0, 0.05, 1000000, 13, InitialLaw::gaussian(1, 0.1));
    CHECK(q.ceiling == doctest::Approx(0.001837762984739307));
    CHECK(q.estimate <= q.ceiling + 3 * q.se);
    CHECK_THROWS_AS(pair_boundary_probability(1.0, 1.0, 0.1, 10, 1, InitialLaw::point(1)), std::invalid_argument);
}

TEST_CASE("loss of reflected Brownian motion with exponential clock") {
    // E[1 - exp(-L_1)] for reflected BM from 1 with unit rate, computed by quadrature.
    CoefficientSet c;
    c.kappa = 1.0;
    const NoisePath noise(13, 1.0, 1e-4);
    const auto r = simulate(small_config(10000, 1.0, 1e-4), c, InitialLaw::point(1.0), noise);
    const double p = r.loss.back();
    const double se = std::sqrt(p * (1 - p) / 10000);
    CHECK(std::abs(p - 0.11339) < 4 * se);
}

TEST_CASE("grid index") {
    CHECK(grid_index(0.3, 0.1) == 3);
    CHECK_THROWS_AS(grid_index(0.35, 0.1), ConfigError);
}
