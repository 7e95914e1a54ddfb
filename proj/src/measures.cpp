#include "elastic/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "elastic/errors.hpp"
#include "elastic/parallel.hpp"

namespace elastic {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> atoms, std::size_t n_original)
    : atoms_(std::move(atoms)), n_(n_original) {
    if (atoms_.size() > n_) throw std::invalid_argument("empirical measure has more atoms than particles");
    for (double a : atoms_)
        if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("empirical measure atom must be finite and >= 0");
    std::sort(atoms_.begin(), atoms_.end());
}

EmpiricalMeasure EmpiricalMeasure::from_alive(std::span<const double> x, std::span<const std::uint8_t> alive) {
    std::vector<double> a;
    a.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (alive[i]) a.push_back(x[i]);
    return EmpiricalMeasure(std::move(a), x.size());
}

double EmpiricalMeasure::interval_mass(double a, double b) const {
    if (!(a < b)) throw std::invalid_argument("interval_mass: need a < b");
    const auto lo = std::upper_bound(atoms_.begin(), atoms_.end(), a);
    const auto hi = std::lower_bound(lo, atoms_.end(), b);
    return weight() * static_cast<double>(hi - lo);
}

double EmpiricalMeasure::pair(const std::function<double(double)>& phi) const {
    double s = 0.0;
    for (double a : atoms_) {
        const double v = phi(a);
        if (!std::isfinite(v)) throw NumericalAbort("pair: test function is not finite at atom " + std::to_string(a));
        s += v;
    }
    return weight() * s;
}

double total_variation(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2) {
    const auto& a = m1.atoms();
    const auto& b = m2.atoms();
    double tv = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        const double x = std::min(i < a.size() ? a[i] : INFINITY, j < b.size() ? b[j] : INFINITY);
        std::size_t ca = 0, cb = 0;
        while (i < a.size() && a[i] == x) ++i, ++ca;
        while (j < b.size() && b[j] == x) ++j, ++cb;
        tv += std::abs(m1.weight() * static_cast<double>(ca) - m2.weight() * static_cast<double>(cb));
    }
    return tv;
}

D0Result bounded_lipschitz_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, double h) {
    const double x_max = std::max({m1.max_atom(), m2.max_atom(), 1e-12});
    if (h <= 0.0) h = std::max(1e-3 * x_max, 1e-4);
    // 1/h integral makes +-1 reachable lattice levels, so the LP optimum is attained on the lattice.
    const double inv = std::ceil(1.0 / h - 1e-9);
    h = 1.0 / inv;
    const auto levels = static_cast<long>(inv);
    const std::size_t nodes = static_cast<std::size_t>(std::ceil(x_max / h)) + 2;

    // Signed masses projected onto nodes with linear-interpolation weights, which
    // is exact for test functions that are linear between nodes.
    std::vector<double> c(nodes, 0.0);
    auto project = [&](const EmpiricalMeasure& m, double sign) {
        const double w = sign * m.weight();
        for (double a : m.atoms()) {
            const double u = a / h;
            const auto j = static_cast<std::size_t>(u);
            const double frac = u - static_cast<double>(j);
            c[j] += w * (1.0 - frac);
            c[j + 1] += w * frac;
        }
    };
    project(m1, 1.0);
    project(m2, -1.0);

    // Dynamic program over psi_j = k h with |k| <= levels and |k_{j+1} - k_j| <= 1.
    const std::size_t width = static_cast<std::size_t>(2 * levels + 1);
    std::vector<double> best(width), next(width);
    for (std::size_t s = 0; s < width; ++s) best[s] = c[0] * static_cast<double>(static_cast<long>(s) - levels) * h;
    for (std::size_t j = 1; j < nodes; ++j) {
        const double cj = c[j];
        for (std::size_t s = 0; s < width; ++s) {
            double m = best[s];
            if (s > 0) m = std::max(m, best[s - 1]);
            if (s + 1 < width) m = std::max(m, best[s + 1]);
            next[s] = m + cj * static_cast<double>(static_cast<long>(s) - levels) * h;
        }
        best.swap(next);
    }
    const double v = std::max(0.0, *std::max_element(best.begin(), best.end()));
    return {v, 0.5 * h * total_variation(m1, m2), h};
}

GridFunction mollify(const EmpiricalMeasure& m, const KernelParams& p, double dx, std::size_t points,
                     MollifyDiagnostics* diag) {
    return mollify_atoms(m.atoms(), m.weight(), p, dx, points, diag);
}

double h_minus1_proxy(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, const KernelParams& p, double dx,
                      std::size_t points) {
    GridFunction a = mollify(m1, p, dx, points);
    const GridFunction b = mollify(m2, p, dx, points);
    for (std::size_t j = 0; j < a.size(); ++j) a.values[j] -= b.values[j];
    const GridFunction F = antiderivative(a);
    return F.l2_norm() + std::abs(a.integral());
}

double Histogram::integral() const {
    double s = 0.0;
    for (double d : density) s += d;
    return s * bin;
}

Histogram density_histogram(const EmpiricalMeasure& m, double bin, std::size_t bins) {
    if (!(bin > 0.0) || bins == 0) throw std::invalid_argument("histogram needs bin > 0 and bins > 0");
    Histogram h;
    h.bin = bin;
    std::vector<std::size_t> counts(bins, 0);
    std::size_t over = 0;
    for (double a : m.atoms()) {
        const auto j = static_cast<std::size_t>(a / bin);
        if (j < bins)
            ++counts[j];
        else
            ++over;
    }
    h.density.resize(bins);
    for (std::size_t j = 0; j < bins; ++j) h.density[j] = m.weight() * static_cast<double>(counts[j]) / bin;
    h.overflow_mass = m.weight() * static_cast<double>(over);
    return h;
}

GridFunction density_mollified(const EmpiricalMeasure& m, const KernelParams& p, double dx, std::size_t points) {
    return mollify(m, p, dx, points);
}

double TestFunction::value(double x) const { return (1.0 + kappa * x) * std::exp(-lambda * x * x); }

double TestFunction::d1(double x) const {
    const double e = std::exp(-lambda * x * x);
    return e * (kappa - 2.0 * lambda * x * (1.0 + kappa * x));
}

double TestFunction::d2(double x) const {
    const double e = std::exp(-lambda * x * x);
    return e * (-4.0 * lambda * kappa * x + (1.0 + kappa * x) * (4.0 * lambda * lambda * x * x - 2.0 * lambda));
}

void TestFunction::check_boundary(double k) const {
    const double h = 1e-5;
    // One-sided 3-point difference at 0 so the check does not rely on d1().
    const double fd = (-3.0 * value(0.0) + 4.0 * value(h) - value(2.0 * h)) / (2.0 * h);
    if (std::abs(fd - k * value(0.0)) > 1e-8 * (1.0 + std::abs(k)) + 2e-10 / h)
        throw std::invalid_argument("test function (kappa=" + std::to_string(kappa) + ", lambda=" +
                                    std::to_string(lambda) + ") violates phi'(0) = kappa phi(0)");
}

MartingaleAccumulator::MartingaleAccumulator(const CoefficientSet& c, std::vector<TestFunction> phis, double dt)
    : c_(c), phis_(std::move(phis)), dt_(dt), run_(phis_.size()), out_(phis_.size()) {
    for (const auto& f : phis_) f.check_boundary(c.kappa);
}

void MartingaleAccumulator::observe(double t, std::span<const double> x, std::span<const std::uint8_t> alive,
                                    std::size_t n_original, double dW_next, double extra_drift) {
    const std::size_t nf = phis_.size();
    const std::size_t stride = 3 * nf;
    const std::size_t n = x.size();
    std::vector<double> partial(chunk_count(n) * stride, 0.0);
    const double rho = c_.rho(t, 0.0);
    for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
        double* acc = &partial[ci * stride];
        for (std::size_t i = b; i < e; ++i) {
            if (!alive[i]) continue;
            const double xi = x[i];
            const double mu = c_.mu(t, xi) + extra_drift;
            const double s = c_.sigma(t, xi);
            for (std::size_t f = 0; f < nf; ++f) {
                const auto& phi = phis_[f];
                const double ex = std::exp(-phi.lambda * xi * xi);
                const double lin = 1.0 + phi.kappa * xi;
                const double v = lin * ex;
                const double d1 = ex * (phi.kappa - 2.0 * phi.lambda * xi * lin);
                const double d2 = ex * (-4.0 * phi.lambda * phi.kappa * xi +
                                        lin * (4.0 * phi.lambda * phi.lambda * xi * xi - 2.0 * phi.lambda));
                acc[3 * f] += v;
                acc[3 * f + 1] += mu * d1 + 0.5 * s * s * d2;
                acc[3 * f + 2] += s * rho * d1;
            }
        }
    });
    std::vector<double> tot(stride, 0.0);
    for (std::size_t ci = 0; ci < chunk_count(n); ++ci)
        for (std::size_t q = 0; q < stride; ++q) tot[q] += partial[ci * stride + q];
    const double w = 1.0 / static_cast<double>(n_original);

    if (started_) w_ += pending_dw_;
    for (std::size_t f = 0; f < nf; ++f) {
        auto& r = run_[f];
        const double P = w * tot[3 * f];
        if (!started_) {
            r.p0 = P;
        } else {
            r.drift += r.pending_A * dt_;
            r.qv += r.pending_B * r.pending_B * dt_;
            r.cross += r.pending_B * dt_;
            r.ito += r.pending_B * pending_dw_;
        }
        const double M = P - r.p0 - r.drift;
        auto& o = out_[f];
        o.t.push_back(t);
        o.M.push_back(M);
        o.S.push_back(M * M - r.qv);
        o.C.push_back(M * w_ - r.cross);
        o.evolution.push_back(M - r.ito);
        r.pending_A = w * tot[3 * f + 1];
        r.pending_B = w * tot[3 * f + 2];
    }
    pending_dw_ = dW_next;
    started_ = true;
}

std::vector<MartingaleSeries> martingale_components(const std::vector<EmpiricalMeasure>& trajectory,
                                                    const std::vector<double>& dW, const CoefficientSet& c,
                                                    const std::vector<TestFunction>& phis, double dt) {
    if (trajectory.size() != dW.size() + 1)
        throw std::invalid_argument("martingale_components: need one snapshot per grid time");
    MartingaleAccumulator acc(c, phis, dt);
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const auto& m = trajectory[k];
        const std::vector<std::uint8_t> alive(m.size(), 1);
        acc.observe(static_cast<double>(k) * dt, m.atoms(), alive, m.n_original(), k < dW.size() ? dW[k] : 0.0);
    }
    return acc.series();
}

}  // namespace elastic
