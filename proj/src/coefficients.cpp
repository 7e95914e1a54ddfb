#include "elastic/coefficients.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/format.hpp"
#include "elastic/quadrature.hpp"

namespace elastic {

namespace {

double parse_number(const std::string& tok, const std::string& spec) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(v))
        throw ConfigError("coefficient '" + spec + "': bad number '" + tok + "'");
    return v;
}

double central1(const ScalarField& f, double t, double x, double h) {
    return (-f(t, x + 2 * h) + 8 * f(t, x + h) - 8 * f(t, x - h) + f(t, x - 2 * h)) / (12 * h);
}

}  // namespace

ScalarField ScalarField::constant(double c) {
    ScalarField f;
    f.kind_ = Kind::Constant;
    f.p_[0] = c;
    return f;
}

ScalarField ScalarField::affine(double a, double b, double c) {
    ScalarField f;
    f.kind_ = Kind::Affine;
    f.p_[0] = a;
    f.p_[1] = b;
    f.p_[2] = c;
    return f;
}

ScalarField ScalarField::tanh_ramp(double lo, double hi, double center, double width) {
    if (!(width > 0.0)) throw ConfigError("tanh-ramp width must be positive");
    ScalarField f;
    f.kind_ = Kind::TanhRamp;
    f.p_[0] = lo;
    f.p_[1] = hi;
    f.p_[2] = center;
    f.p_[3] = width;
    return f;
}

ScalarField ScalarField::expression(const std::string& source) {
    ScalarField f;
    f.kind_ = Kind::Expr;
    f.expr_ = std::make_shared<const Expression>(source);
    return f;
}

ScalarField ScalarField::parse(const std::string& spec) {
    std::istringstream is(spec);
    std::string kind;
    is >> kind;
    if (kind == "expr") {
        std::string rest;
        std::getline(is, rest);
        const auto b = rest.find_first_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("coefficient '" + spec + "': empty expression");
        return expression(rest.substr(b));
    }
    std::vector<double> args;
    for (std::string tok; is >> tok;) args.push_back(parse_number(tok, spec));
    auto need = [&](std::size_t n) {
        if (args.size() != n)
            throw ConfigError("coefficient '" + spec + "': '" + kind + "' takes " + std::to_string(n) +
                              " parameters");
    };
    if (kind == "constant") {
        need(1);
        return constant(args[0]);
    }
    if (kind == "affine") {
        need(3);
        return affine(args[0], args[1], args[2]);
    }
    if (kind == "tanh-ramp") {
        need(4);
        return tanh_ramp(args[0], args[1], args[2], args[3]);
    }
    throw ConfigError("coefficient '" + spec + "': unknown kind '" + kind + "'");
}

std::string ScalarField::spec() const {
    switch (kind_) {
        case Kind::Constant: return "constant " + format_double(p_[0]);
        case Kind::Affine: return "affine " + format_double(p_[0]) + " " + format_double(p_[1]) + " " + format_double(p_[2]);
        case Kind::TanhRamp:
            return "tanh-ramp " + format_double(p_[0]) + " " + format_double(p_[1]) + " " + format_double(p_[2]) + " " + format_double(p_[3]);
        case Kind::Expr: return "expr " + expr_->source();
    }
    return {};
}

bool ScalarField::depends_on_x() const {
    switch (kind_) {
        case Kind::Constant: return false;
        case Kind::Affine: return p_[1] != 0.0;
        case Kind::TanhRamp: return p_[0] != p_[1];
        case Kind::Expr: return expr_->uses_x();
    }
    return true;
}

bool ScalarField::depends_on_t() const {
    switch (kind_) {
        case Kind::Constant:
        case Kind::TanhRamp: return false;
        case Kind::Affine: return p_[2] != 0.0;
        case Kind::Expr: return expr_->uses_t();
    }
    return true;
}

double ScalarField::dx(double t, double x, double h) const {
    switch (kind_) {
        case Kind::Constant: return 0.0;
        case Kind::Affine: return p_[1];
        case Kind::TanhRamp: {
            const double s = std::tanh((x - p_[2]) / p_[3]);
            return (p_[1] - p_[0]) / (2 * p_[3]) * (1 - s * s);
        }
        case Kind::Expr: return central1(*this, t, x, h);
    }
    return 0.0;
}

double ScalarField::dxx(double t, double x, double h) const {
    switch (kind_) {
        case Kind::Constant:
        case Kind::Affine: return 0.0;
        case Kind::TanhRamp: {
            const double s = std::tanh((x - p_[2]) / p_[3]);
            return -(p_[1] - p_[0]) / (p_[3] * p_[3]) * s * (1 - s * s);
        }
        case Kind::Expr: {
            const auto& f = *this;
            return (-f(t, x + 2 * h) + 16 * f(t, x + h) - 30 * f(t, x) + 16 * f(t, x - h) - f(t, x - 2 * h)) /
                   (12 * h * h);
        }
    }
    return 0.0;
}

double ScalarField::dt(double t, double x, double h) const {
    switch (kind_) {
        case Kind::Constant:
        case Kind::TanhRamp: return 0.0;
        case Kind::Affine: return p_[2];
        case Kind::Expr: {
            const auto& f = *this;
            return (-f(t + 2 * h, x) + 8 * f(t + h, x) - 8 * f(t - h, x) + f(t - 2 * h, x)) / (12 * h);
        }
    }
    return 0.0;
}

void CoefficientSet::check_shape() const {
    if (rho.depends_on_x()) throw ConfigError("rho must depend on t only");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be finite and >= 0");
    if (!(bound_C > 0.0)) throw ConfigError("bound_C must be positive");
    if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
}

ValidationReport validate_assumptions(const CoefficientSet& c, const std::vector<double>& t_grid,
                                      const std::vector<double>& x_grid) {
    if (t_grid.empty() || x_grid.empty()) throw ConfigError("validation grids must be nonempty");
    for (double v : t_grid)
        if (!std::isfinite(v)) throw ConfigError("validation t grid has a non-finite point");
    for (double v : x_grid)
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("validation x grid must be finite and >= 0");

    ValidationReport r;
    r.t_points = t_grid.size();
    r.x_points = x_grid.size();
    const double C = c.bound_C;
    const double h = c.fd_step;
    auto add = [&](const char* id, double t, double x, double v) { r.violations.push_back({id, t, x, v}); };
    auto bounded = [&](const char* id, double t, double x, double v) {
        if (!std::isfinite(v))
            add("non-finite value", t, x, v);
        else if (std::abs(v) > C)
            add(id, t, x, v);
    };

    const double x_max = *std::max_element(x_grid.begin(), x_grid.end());
    for (double t : t_grid) {
        const double rho = c.rho(t, 0.0);
        if (!std::isfinite(rho))
            add("non-finite value", t, 0.0, rho);
        else if (rho < 0.0 || rho >= 1.0)
            add("rho outside [0,1)", t, 0.0, rho);

        bool sigma_positive = true;
        for (double x : x_grid) {
            bounded("|mu| above bound_C", t, x, c.mu(t, x));
            bounded("|d_x mu| above bound_C", t, x, c.mu.dx(t, x, h));
            bounded("|d_xx mu| above bound_C", t, x, c.mu.dxx(t, x, h));
            const double s = c.sigma(t, x);
            bounded("|sigma| above bound_C", t, x, s);
            bounded("|d_x sigma| above bound_C", t, x, c.sigma.dx(t, x, h));
            bounded("|d_xx sigma| above bound_C", t, x, c.sigma.dxx(t, x, h));
            if (std::isfinite(s) && s < 1.0 / C) add("sigma below 1/bound_C", t, x, s);
            if (!(s > 0.0) || !std::isfinite(s)) sigma_positive = false;
        }
        if (!sigma_positive) continue;
        try {
            for (double x : x_grid) r.mu_tilde_bound = std::max(r.mu_tilde_bound, std::abs(transformed_drift(c, t, x)));
            if (c.sigma.depends_on_t() && x_max > 0.0) {
                const double I = integrate([&](double y) { return std::abs(c.sigma.dt(t, y, h)); }, 0.0, x_max, 1e-8,
                                           1e-14, "d_t sigma integral")
                                     .value;
                r.dt_sigma_integral = std::max(r.dt_sigma_integral, I);
            }
        } catch (const NumericalAbort& e) {
            add("non-finite value", t, 0.0, std::numeric_limits<double>::quiet_NaN());
        }
    }
    std::sort(r.violations.begin(), r.violations.end(), [](const Violation& a, const Violation& b) {
        if (a.constraint != b.constraint) return a.constraint < b.constraint;
        if (a.t != b.t) return a.t < b.t;
        return a.x < b.x;
    });
    std::ostringstream note;
    note << "sampled " << r.t_points << " x " << r.x_points
         << " points; integrability of |d_t sigma| spot-checked on [0, " << x_max << "] only";
    r.note = note.str();
    return r;
}

double scale_transform(const CoefficientSet& c, double t, double x) {
    if (x < 0.0) throw std::invalid_argument("scale_transform: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (c.sigma.is_constant()) return x / c.sigma(t, 0.0);
    return integrate([&](double y) { return 1.0 / c.sigma(t, y); }, 0.0, x, 1e-10, 1e-14, "scale transform").value;
}

double inverse_scale_transform(const CoefficientSet& c, double t, double z) {
    if (z < 0.0) throw std::invalid_argument("inverse_scale_transform: z must be >= 0");
    if (z == 0.0) return 0.0;
    // zeta' = 1/sigma lies in [1/C, C], which brackets the root in [z/C, z*C].
    double lo = z / c.bound_C;
    double hi = z * c.bound_C;
    while (scale_transform(c, t, hi) < z) hi *= 2.0;
    while (lo > 0.0 && scale_transform(c, t, lo) > z) lo *= 0.5;
    std::uintmax_t iters = 100;
    auto f = [&](double x) { return std::make_pair(scale_transform(c, t, x) - z, 1.0 / c.sigma(t, x)); };
    return boost::math::tools::newton_raphson_iterate(f, 0.5 * (lo + hi), lo, hi, 50, iters);
}

double transformed_drift(const CoefficientSet& c, double t, double x) {
    if (x < 0.0) throw std::invalid_argument("transformed_drift: x must be >= 0");
    const double h = c.fd_step;
    const double s = c.sigma(t, x);
    double v = c.mu(t, x) / s - c.sigma.dx(t, x, h);
    if (c.sigma.depends_on_t() && x > 0.0) {
        v -= integrate(
                 [&](double y) {
                     const double sy = c.sigma(t, y);
                     return c.sigma.dt(t, y, h) / (sy * sy);
                 },
                 0.0, x, 1e-10, 1e-14, "transformed drift")
                 .value;
    }
    if (!std::isfinite(v)) throw NumericalAbort("transformed drift is not finite");
    return v;
}

}  // namespace elastic
