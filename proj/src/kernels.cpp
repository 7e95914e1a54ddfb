#include "elastic/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "elastic/errors.hpp"
#include "elastic/quadrature.hpp"

namespace elastic {

namespace {

// Beyond this many standard deviations every kernel term is below 1e-36
// of its peak and is skipped.
constexpr double kPruneSd = 13.0;

void check_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("kernel bandwidth must be positive");
}

}  // namespace

void KernelParams::check() const {
    check_eps(epsilon);
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kernel kappa must be >= 0");
}

GridFunction GridFunction::on_interval(double x_max, double dx_target) {
    if (!(x_max > 0.0) || !(dx_target > 0.0)) throw ConfigError("grid needs x_max > 0 and dx > 0");
    const auto cells = static_cast<std::size_t>(std::max(2.0, std::round(x_max / dx_target)));
    return zeros(x_max / static_cast<double>(cells), cells + 1);
}

void GridFunction::check() const {
    if (!(dx > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    if (values.size() < 3) throw std::invalid_argument("grid needs at least 3 points");
    for (double v : values)
        if (!std::isfinite(v)) throw NumericalAbort("grid function has a non-finite value");
}

double GridFunction::integral() const {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t j = 1; j + 1 < values.size(); ++j) s += values[j];
    return s * dx;
}

double GridFunction::l2_norm() const {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() * values.front() + values.back() * values.back());
    for (std::size_t j = 1; j + 1 < values.size(); ++j) s += values[j] * values[j];
    return std::sqrt(s * dx);
}

double erfcx(double z) {
    if (z < 12.0) {
        // exp(z^2) split into exp(s) * exp(z^2 - s) with the rounding error of s = z*z recovered by fma.
        const double s = z * z;
        return std::exp(s) * std::exp(std::fma(z, z, -s)) * std::erfc(z);
    }
    // Continued fraction erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))).
    double f = z;
    for (int n = 100; n >= 1; --n) f = z + (0.5 * n) / f;
    return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

double gaussian_kernel(double eps, double x) {
    check_eps(eps);
    return std::exp(-x * x / (2.0 * eps)) / std::sqrt(2.0 * std::numbers::pi * eps);
}

double reflecting_kernel(double eps, double x, double y) {
    return gaussian_kernel(eps, x - y) + gaussian_kernel(eps, x + y);
}

namespace {
std::atomic<double> g_fault_scale{1.0};
}

void set_kernel_fault_scale(double scale) { g_fault_scale.store(scale); }
double kernel_fault_scale() { return g_fault_scale.load(std::memory_order_relaxed); }

double elastic_correction(double eps, double kappa, double x, double y) {
    check_eps(eps);
    if (kappa == 0.0) return 0.0;
    const double s = x + y;
    const double z = (s + kappa * eps) / std::sqrt(2.0 * eps);
    // kappa * exp(kappa s + kappa^2 eps/2) * erfc(z) with exp(z^2) folded into erfcx.
    return kappa * kernel_fault_scale() * std::exp(-s * s / (2.0 * eps)) * erfcx(z);
}

double elastic_kernel(double eps, double kappa, double x, double y) {
    return reflecting_kernel(eps, x, y) - elastic_correction(eps, kappa, x, y);
}

double boundary_test_function(double eps, double kappa, double x) {
    check_eps(eps);
    if (x < 0.0) throw std::invalid_argument("boundary_test_function: x must be >= 0");
    if (kappa == 0.0) return 1.0;
    const double y_max = x + kappa * eps + 12.0 * std::sqrt(eps);
    const auto q = integrate([&](double y) { return elastic_correction(eps, kappa, x, y); }, 0.0, y_max, 1e-11,
                             1e-15, "boundary test function");
    return 1.0 - q.value;
}

GridFunction tabulate_boundary_test_function(double eps, double kappa, double dx, std::size_t points) {
    GridFunction out = GridFunction::zeros(dx, points);
    for (std::size_t j = 0; j < points; ++j) {
        const double x = out.x(j);
        // Past 40 sd the correction integral is below 1e-300.
        out.values[j] = (x > 40.0 * std::sqrt(eps)) ? 1.0 : boundary_test_function(eps, kappa, x);
    }
    return out;
}

GridFunction mollify_atoms(std::span<const double> atoms, double weight, const KernelParams& p, double dx,
                           std::size_t points, MollifyDiagnostics* diag) {
    p.check();
    GridFunction out = GridFunction::zeros(dx, points);
    const double reach = kPruneSd * std::sqrt(p.epsilon);
    const double x_end = out.x(points - 1);
    for (double y : atoms) {
        if (y < 0.0) throw std::invalid_argument("mollify: atom below 0");
        if (diag) {
            if (y == 0.0) ++diag->atoms_at_zero;
            if (y > x_end) ++diag->atoms_beyond_grid;
        }
        const double lo = std::max(0.0, std::ceil((y - reach) / dx));
        const double hi = std::min(static_cast<double>(points - 1), std::floor((y + reach) / dx));
        for (auto j = static_cast<std::size_t>(lo); static_cast<double>(j) <= hi; ++j)
            out.values[j] += weight * elastic_kernel(p.epsilon, p.kappa, out.x(j), y);
    }
    return out;
}

GridFunction mollify(const GridFunction& f, const KernelParams& p, double dx, std::size_t points) {
    p.check();
    GridFunction out = GridFunction::zeros(dx, points);
    const double reach = kPruneSd * std::sqrt(p.epsilon);
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < points; ++i) {
        const double x = out.x(i);
        const double lo = std::max(0.0, std::ceil((x - reach) / f.dx));
        const double hi = std::min(static_cast<double>(n - 1), std::floor((x + reach) / f.dx));
        double s = 0.0;
        for (auto j = static_cast<std::size_t>(lo); static_cast<double>(j) <= hi; ++j) {
            const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            s += w * f.values[j] * elastic_kernel(p.epsilon, p.kappa, x, f.x(j));
        }
        out.values[i] = s * f.dx;
    }
    return out;
}

GridFunction antiderivative(const GridFunction& f, double tail_tol, std::vector<std::string>* warnings) {
    GridFunction F = GridFunction::zeros(f.dx, f.size());
    if (f.size() == 0) return F;
    if (warnings && std::abs(f.values.back()) > tail_tol)
        warnings->push_back("antiderivative: |f(x_max)| = " + std::to_string(std::abs(f.values.back())) +
                            " exceeds tail tolerance");
    for (std::size_t j = f.size() - 1; j-- > 0;)
        F.values[j] = F.values[j + 1] - 0.5 * f.dx * (f.values[j] + f.values[j + 1]);
    return F;
}

double derivative_switch_residual(double eps, double kappa, std::span<const std::pair<double, double>> points) {
    check_eps(eps);
    const double h1 = 1e-5 * std::sqrt(eps);
    const double h2 = 1e-4 * std::sqrt(eps);
    auto G = [&](double x, double y) { return elastic_kernel(eps, kappa, x, y); };
    auto g = [&](double x, double y) { return elastic_correction(eps, kappa, x, y); };
    double worst = 0.0;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("derivative_switch_residual: points must lie in (0,inf)^2");
        const double Gx = (G(x + h1, y) - G(x - h1, y)) / (2 * h1);
        const double Gy = (G(x, y + h1) - G(x, y - h1)) / (2 * h1);
        const double px = (gaussian_kernel(eps, x + y + h1) - gaussian_kernel(eps, x + y - h1)) / (2 * h1);
        const double gx = (g(x + h1, y) - g(x - h1, y)) / (2 * h1);
        const double first = std::abs(Gy + Gx - 2 * px + 2 * gx) /
                             (1.0 + std::max({std::abs(Gx), std::abs(Gy), 2 * std::abs(px), 2 * std::abs(gx)}));
        const double G0 = G(x, y);
        const double Gxx = (G(x + h2, y) - 2 * G0 + G(x - h2, y)) / (h2 * h2);
        const double Gyy = (G(x, y + h2) - 2 * G0 + G(x, y - h2)) / (h2 * h2);
        const double second = std::abs(Gyy - Gxx) / (1.0 + std::max(std::abs(Gxx), std::abs(Gyy)));
        worst = std::max({worst, first, second});
    }
    return worst;
}

double robin_identity_residual(double eps, double kappa, std::span<const double> points) {
    check_eps(eps);
    const double h = 1e-5 * std::sqrt(eps);
    auto G = [&](double x, double y) { return elastic_kernel(eps, kappa, x, y); };
    double worst = 0.0;
    for (double y : points) {
        const double dx0 = (G(h, y) - G(-h, y)) / (2 * h);
        const double dy0 = (G(y, h) - G(y, -h)) / (2 * h);
        const double k0 = kappa * G(0.0, y);
        const double k1 = kappa * G(y, 0.0);
        worst = std::max(worst, std::abs(dx0 - k0) / (1.0 + std::max(std::abs(dx0), std::abs(k0))));
        worst = std::max(worst, std::abs(dy0 - k1) / (1.0 + std::max(std::abs(dy0), std::abs(k1))));
    }
    return worst;
}

double chapman_kolmogorov_residual(double s, double t, double kappa, double x, double y) {
    check_eps(s);
    check_eps(t);
    const double upper = x + y + 10.0 * std::sqrt(s + t);
    const auto q = integrate([&](double z) { return elastic_kernel(s, kappa, x, z) * elastic_kernel(t, kappa, z, y); },
                             0.0, upper, 1e-9, 1e-10, "Chapman-Kolmogorov");
    const double direct = elastic_kernel(s + t, kappa, x, y);
    return std::abs(q.value - direct) / (1.0 + std::max(std::abs(q.value), std::abs(direct)));
}

}  // namespace elastic
