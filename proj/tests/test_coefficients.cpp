#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "elastic/coefficients.hpp"
#include "elastic/errors.hpp"
#include "elastic/expr.hpp"
#include "elastic/rng.hpp"

using namespace elastic;

namespace {

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(a + (b - a) * i / (n - 1));
    return g;
}

bool has(const ValidationReport& r, const std::string& id) {
    return std::any_of(r.violations.begin(), r.violations.end(), [&](const Violation& v) { return v.constraint == id; });
}

}  // namespace

TEST_CASE("expression grammar") {
    CHECK(Expression("1 + 2 * 3")(0, 0) == 7.0);
    CHECK(Expression("(1 + 2) * 3")(0, 0) == 9.0);
    CHECK(Expression("2 ^ 3 ^ 2")(0, 0) == 512.0);
    CHECK(Expression("-2 ^ 2")(0, 0) == -4.0);
    CHECK(Expression("x / t")(2.0, 1.0) == 0.5);
    CHECK(Expression("exp(0) + tanh(0)")(0, 0) == 1.0);
    CHECK(Expression("1e-3 * x")(0, 2.0) == doctest::Approx(2e-3));
    CHECK(Expression("1 + 0.1 * t * x").uses_t());
    CHECK_FALSE(Expression("x").uses_t());
    CHECK_THROWS_AS(Expression("1 +"), ConfigError);
    CHECK_THROWS_AS(Expression("sin(x)"), ConfigError);
    CHECK_THROWS_AS(Expression("(1"), ConfigError);
    CHECK_THROWS_AS(Expression("y"), ConfigError);
    CHECK_THROWS_AS(Expression("1 2"), ConfigError);
}

TEST_CASE("coefficient specs round-trip") {
    for (const char* s : {"constant 0", "constant 0.5", "affine 1 0.1 0", "tanh-ramp 0.5 1.5 2 0.25", "expr 1 + 0.1*t*x"}) {
        const ScalarField f = ScalarField::parse(s);
        const ScalarField g = ScalarField::parse(f.spec());
        CHECK(g.spec() == f.spec());
        for (double t : {0.0, 0.3, 1.0})
            for (double x : {0.0, 0.7, 3.0}) CHECK(f(t, x) == g(t, x));
    }
    CHECK(ScalarField::parse("constant 0.1").spec() == "constant 0.1");
    CHECK_THROWS_AS(ScalarField::parse("constant"), ConfigError);
    CHECK_THROWS_AS(ScalarField::parse("wobbly 1"), ConfigError);
    CHECK_THROWS_AS(ScalarField::parse("constant abc"), ConfigError);
    CHECK_THROWS_AS(ScalarField::parse("tanh-ramp 0 1 0 0"), ConfigError);
}

TEST_CASE("analytic derivatives agree with differences") {
    const ScalarField tr = ScalarField::tanh_ramp(0.5, 1.5, 1.0, 0.3);
    const ScalarField ex = ScalarField::expression("0.5 + (1.5 - 0.5) * (1 + tanh((x - 1)/0.3)) / 2");
    for (double x : {0.0, 0.5, 1.0, 1.7}) {
        CHECK(tr.dx(0, x, 1e-5) == doctest::Approx(ex.dx(0, x, 1e-4)).epsilon(1e-7));
        CHECK(tr.dxx(0, x, 1e-5) == doctest::Approx(ex.dxx(0, x, 1e-3)).epsilon(1e-5));
    }
    const ScalarField af = ScalarField::affine(1, 2, 3);
    CHECK(af.dx(0, 1, 1e-5) == 2.0);
    CHECK(af.dt(0, 1, 1e-5) == 3.0);
    CHECK(af.dxx(0, 1, 1e-5) == 0.0);
}

TEST_CASE("validate_assumptions examples") {
    const auto tg = grid(0, 1, 5), xg = grid(0, 5, 21);
    CoefficientSet c;
    c.rho = ScalarField::constant(0.5);
    c.bound_C = 2;
    CHECK(validate_assumptions(c, tg, xg).ok());

    CoefficientSet small = c;
    small.sigma = ScalarField::constant(0.01);
    CHECK(has(validate_assumptions(small, tg, xg), "sigma below 1/bound_C"));

    CoefficientSet steep = c;
    steep.mu = ScalarField::parse("affine 0 3 0");
    CHECK(has(validate_assumptions(steep, tg, xg), "|d_x mu| above bound_C"));

    CoefficientSet rho = c;
    rho.rho = ScalarField::constant(1.0);
    CHECK(has(validate_assumptions(rho, tg, xg), "rho outside [0,1)"));

    CoefficientSet bad = c;
    bad.mu = ScalarField::expression("1 / x");
    CHECK(has(validate_assumptions(bad, tg, xg), "non-finite value"));

    CoefficientSet xr = c;
    xr.rho = ScalarField::expression("x");
    CHECK_THROWS_AS(xr.check_shape(), ConfigError);
}

TEST_CASE("validation does not depend on grid order") {
    CoefficientSet c;
    c.mu = ScalarField::expression("3 * tanh(x - 1)");
    c.sigma = ScalarField::expression("0.3 + 0.1 * x");
    auto tg = grid(0, 1, 4), xg = grid(0, 4, 17);
    const auto a = validate_assumptions(c, tg, xg);
    std::reverse(tg.begin(), tg.end());
    std::reverse(xg.begin(), xg.end());
    const auto b = validate_assumptions(c, tg, xg);
    REQUIRE(a.violations.size() == b.violations.size());
    CHECK(!a.ok());
    for (std::size_t i = 0; i < a.violations.size(); ++i) {
        CHECK(a.violations[i].constraint == b.violations[i].constraint);
        CHECK(a.violations[i].t == b.violations[i].t);
        CHECK(a.violations[i].x == b.violations[i].x);
    }
    CHECK(a.note.find("spot-checked") != std::string::npos);
}

TEST_CASE("scale transform examples") {
    CoefficientSet c;
    CHECK(scale_transform(c, 0, 0.7) == doctest::Approx(0.7).epsilon(1e-14));
    c.sigma = ScalarField::constant(2.0);
    CHECK(scale_transform(c, 0, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    c.sigma = ScalarField::expression("1 + x^2");
    CHECK(std::abs(scale_transform(c, 0, 1.0) - 0.78539816339744831) < 1e-10);
    CHECK(scale_transform(c, 0, 0.0) == 0.0);
}

TEST_CASE("transformed drift examples") {
    CoefficientSet c;
    CHECK(transformed_drift(c, 0.3, 1.2) == 0.0);
    c.mu = ScalarField::constant(1.0);
    c.sigma = ScalarField::constant(2.0);
    CHECK(transformed_drift(c, 0.3, 1.2) == doctest::Approx(0.5));
    CoefficientSet d;
    d.sigma = ScalarField::expression("1 + 0.1 * t * x");
    // mpmath: -0.1 - integral over [0,1] of 0.1 y / (1 + 0.1 y)^2
    CHECK(std::abs(transformed_drift(d, 1.0, 1.0) - (-0.14401088895233951)) < 1e-8);
    CoefficientSet e;
    e.sigma = ScalarField::affine(1, 0, 0.1);  // 1 + 0.1 t, so d_t sigma = 0.1
    // -x * 0.1 / (1 + 0.1 t)^2 at t = 1, x = 2
    CHECK(transformed_drift(e, 1.0, 2.0) == doctest::Approx(-0.2 / 1.21).epsilon(1e-9));
}

TEST_CASE("scale transform is increasing, C-Lipschitz and invertible (random coefficients)") {
    SequenceRng rng(17, Purpose::Sample, 0);
    for (int trial = 0; trial < 20; ++trial) {
        CoefficientSet c;
        c.bound_C = 2.0;
        const double lo = rng.uniform(0.6, 1.0), hi = rng.uniform(1.0, 1.9);
        c.sigma = ScalarField::tanh_ramp(lo, hi, rng.uniform(0, 3), rng.uniform(0.2, 1));
        const double t = rng.uniform(0, 1);
        double prev = -1.0, px = 0.0;
        for (int i = 0; i < 30; ++i) {
            const double x = 0.2 * i;
            const double z = scale_transform(c, t, x);
            CHECK(z > prev);
            if (i > 0) CHECK(std::abs(z - prev) <= c.bound_C * std::abs(x - px) + 1e-12);
            CHECK(std::abs(inverse_scale_transform(c, t, z) - x) < 1e-8);
            prev = z;
            px = x;
        }
    }
}

TEST_CASE("scale transform rejects negative inputs and non-finite integrands") {
    CoefficientSet c;
    CHECK_THROWS_AS(scale_transform(c, 0, -1.0), std::invalid_argument);
    c.sigma = ScalarField::expression("x - 0.5");
    CHECK_THROWS_AS(scale_transform(c, 0, 1.0), NumericalAbort);
}
