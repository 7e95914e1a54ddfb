#include "elastic/fdsolver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/quadrature.hpp"

namespace elastic {

namespace {

// Thomas algorithm for lower/diag/upper; overwrites rhs with the solution.
void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up,
                       std::vector<double>& rhs, std::vector<double>& scratch, double t) {
    const std::size_t n = di.size();
    scratch.resize(n);
    double beta = di[0];
    if (!(std::abs(beta) > 0.0) || !std::isfinite(beta)) throw NumericalAbort("tridiagonal solve failed at t=" + std::to_string(t));
    rhs[0] /= beta;
    for (std::size_t j = 1; j < n; ++j) {
        scratch[j] = up[j - 1] / beta;
        beta = di[j] - lo[j] * scratch[j];
        if (!(std::abs(beta) > 0.0) || !std::isfinite(beta))
            throw NumericalAbort("tridiagonal solve failed at t=" + std::to_string(t) + ", row " + std::to_string(j));
        rhs[j] = (rhs[j] - lo[j] * rhs[j - 1]) / beta;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j + 1] * rhs[j + 1];
}

double cv_sum(const std::vector<double>& V, double dx) {
    // Node M is the Dirichlet edge and carries no volume.
    double s = 0.5 * V[0];
    for (std::size_t j = 1; j + 1 < V.size(); ++j) s += V[j];
    return s * dx;
}

}  // namespace

double default_x_max(const InitialLaw& law, double sigma_max, double T) {
    return law.support_max() + 6.0 * sigma_max * std::sqrt(T);
}

GridFunction discretize_initial(const InitialLaw& law, double x_max, double dx) {
    if (!law.has_density()) throw ConfigError("the solver needs an initial law with a density");
    const std::size_t M = integral_steps(x_max, dx, "solver grid");
    GridFunction V = GridFunction::zeros(dx, M + 1);
    // Control-volume averages from the closed-form tail, exact in mass even across jumps.
    for (std::size_t j = 0; j < M; ++j) {
        const double lo = j == 0 ? 0.0 : V.x(j) - 0.5 * dx;
        const double hi = V.x(j) + 0.5 * dx;
        V.values[j] = std::max(0.0, law.tail(lo) - law.tail(hi)) / (hi - lo);
    }
    if (control_volume_mass(V) > 1.0 + 1e-9) throw ConfigError("discretized initial density integrates above 1");
    return V;
}

double control_volume_mass(const GridFunction& V) { return cv_sum(V.values, V.dx); }

double l1_distance(const GridFunction& V1, const GridFunction& V2) {
    if (V1.size() != V2.size() || V1.dx != V2.dx) throw std::invalid_argument("l1_distance: grids differ");
    std::vector<double> d(V1.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::abs(V1.values[j] - V2.values[j]);
    return cv_sum(d, V1.dx);
}

SolveResult solve_spde_path(const CoefficientSet& c, const NoisePath& noise, const SolverConfig& cfg,
                            const GridFunction& V0, const SolverObserver& observer) {
    c.check_shape();
    const std::size_t M = integral_steps(cfg.x_max, cfg.dx, "solver grid");
    const double dx = cfg.x_max / static_cast<double>(M);
    if (V0.size() != M + 1 || std::abs(V0.dx - dx) > 1e-12 * dx)
        throw ConfigError("initial density does not live on the solver grid");
    for (double v : V0.values)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("initial density must be finite and >= 0");
    const double mass0 = control_volume_mass(V0);
    if (mass0 > 1.0 + 1e-9) throw ConfigError("initial density integrates above 1");

    const NoisePath fine = noise.refined_to(cfg.dt);
    const double dt = fine.dt();
    const std::size_t K = integral_steps(cfg.T, dt, "solver");
    if (K > fine.steps()) throw ConfigError("noise path shorter than the solver horizon");

    SolveResult r;
    r.dt = dt;
    r.dx = dx;
    r.refine_levels = fine.level() - noise.level();
    r.guard = cfg.stability_guard;

    std::vector<double> rho(K);
    bool any_rho = false;
    for (std::size_t n = 0; n < K; ++n) {
        rho[n] = c.rho(static_cast<double>(n) * dt, 0.0);
        any_rho = any_rho || rho[n] != 0.0;
    }
    if (any_rho) {
        r.guard_enforced = true;
        if (dt > cfg.stability_guard * dx * dx * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "solver dt " << dt << " exceeds stability guard " << cfg.stability_guard << " * dx^2 = "
               << cfg.stability_guard * dx * dx;
            throw ConfigError(os.str());
        }
    }

    std::vector<std::size_t> snap_n;
    for (double ts : cfg.snapshot_times) {
        const std::size_t n = grid_index(ts, dt);
        if (n > K) throw ConfigError("solver snapshot beyond the horizon");
        snap_n.push_back(n);
    }
    std::sort(snap_n.begin(), snap_n.end());
    snap_n.erase(std::unique(snap_n.begin(), snap_n.end()), snap_n.end());

    const bool absorbing = cfg.mode == BoundaryMode::Absorbing;
    const double kappa = cfg.mode == BoundaryMode::Elastic ? c.kappa : 0.0;
    const bool frozen = !c.mu.depends_on_t() && !c.sigma.depends_on_t();

    std::vector<double> V = V0.values;
    V[M] = 0.0;
    if (absorbing) V[0] = 0.0;
    double vmax0 = 0.0;
    for (double v : V) vmax0 = std::max(vmax0, v);

    std::vector<double> a(M + 1), mu(M + 1), sg(M + 1), flux(M), limit(M, 1.0), lo(M), di(M), up(M), rhs(M), scratch;
    auto load_coefficients = [&](double t) {
        for (std::size_t j = 0; j <= M; ++j) {
            const double x = static_cast<double>(j) * dx;
            sg[j] = c.sigma(t, x);
            mu[j] = c.mu(t, x);
            a[j] = 0.5 * sg[j] * sg[j];
        }
    };
    load_coefficients(0.0);

    const double ratio = dt / (dx * dx);
    std::size_t next_snap = 0;
    auto record = [&](std::size_t n, double t) {
        const double mass = cv_sum(V, dx);
        r.t.push_back(t);
        r.mass.push_back(mass);
        r.boundary.push_back(V[0]);
        double tail = 0.0;
        for (std::size_t j = (M > 10 ? M - 10 : 0); j < M; ++j) tail += V[j] * dx;
        r.tail_mass_max = std::max(r.tail_mass_max, tail);
        const double vmin = *std::min_element(V.begin(), V.end());
        r.min_value = std::min(r.min_value, vmin);
        if (vmin < -1e-8 * vmax0) {
            std::ostringstream os;
            os << "solver positivity lost at t=" << t << ": min V = " << vmin << " (max V0 = " << vmax0 << ")";
            throw NumericalAbort(os.str());
        }
        if (mass > std::max(1.0, mass0) + 1e-6) {
            std::ostringstream os;
            os << "solver mass " << mass << " exceeds 1 at t=" << t;
            throw NumericalAbort(os.str());
        }
        while (next_snap < snap_n.size() && snap_n[next_snap] == n) {
            r.snapshot_t.push_back(t);
            r.snapshots.push_back(GridFunction{dx, V});
            ++next_snap;
        }
        if (observer) observer(n, t, V);
    };
    record(0, 0.0);

    for (std::size_t n = 0; n < K; ++n) {
        const double t = static_cast<double>(n) * dt;
        if (!frozen && n > 0) load_coefficients(t);
        const double noise_coef = rho[n] * fine.increment(n);

        // Explicit drift and transport-noise fluxes through the cell faces j+1/2.
        for (std::size_t j = 0; j < M; ++j) {
            double f = dt * 0.5 * (mu[j] * V[j] + mu[j + 1] * V[j + 1]);
            if (rho[n] != 0.0) f += noise_coef * 0.5 * (sg[j] * V[j] + sg[j + 1] * V[j + 1]);
            flux[j] = f;
        }

        // Positivity limiter: scale the outgoing fluxes of any cell that would give away more
        // mass than it holds. Dirichlet nodes are not donors.
        for (std::size_t j = absorbing ? 1 : 0; j < M; ++j) {
            const double out = std::max(flux[j], 0.0) + (j > 0 ? std::max(-flux[j - 1], 0.0) : 0.0);
            const double held = V[j] * (j == 0 ? 0.5 * dx : dx);
            limit[j] = out > held ? held / out : 1.0;
            if (out > held) ++r.limiter_activations;
        }
        for (std::size_t j = 0; j < M; ++j) {
            const std::size_t donor = flux[j] > 0.0 ? j : j + 1;
            if (donor < M && !(absorbing && donor == 0)) flux[j] *= limit[donor];
        }

        // Implicit diffusion; rows are divided by the control-volume width.
        for (std::size_t j = 1; j < M; ++j) {
            lo[j] = -ratio * a[j - 1];
            di[j] = 1.0 + 2.0 * ratio * a[j];
            up[j] = j + 1 < M ? -ratio * a[j + 1] : 0.0;
            rhs[j] = V[j] - (flux[j] - flux[j - 1]) / dx;
        }
        if (absorbing) {
            di[0] = 1.0;
            up[0] = 0.0;
            rhs[0] = 0.0;
        } else {
            // Half cell [0, dx/2]: the only flux through x = 0 is the elastic loss kappa a(0) V(0).
            di[0] = 1.0 + 2.0 * ratio * a[0] + 2.0 * dt * kappa * a[0] / dx;
            up[0] = -2.0 * ratio * a[1];
            rhs[0] = V[0] - 2.0 * flux[0] / dx;
        }
        lo[0] = 0.0;
        solve_tridiagonal(lo, di, up, rhs, scratch, t);
        std::copy(rhs.begin(), rhs.end(), V.begin());
        V[M] = 0.0;
        for (std::size_t j = 0; j < M; ++j)
            if (!std::isfinite(V[j])) throw NumericalAbort("solver produced a non-finite value at t=" + std::to_string(t));
        record(n + 1, static_cast<double>(n + 1) * dt);
    }
    if (r.tail_mass_max > cfg.tail_threshold) {
        std::ostringstream os;
        os << "mass near x_max reached " << r.tail_mass_max << " (threshold " << cfg.tail_threshold << ")";
        r.warnings.push_back(os.str());
    }
    return r;
}

double MassLossSeries::relative_gap() const {
    if (actual.empty() || actual.back() == 0.0) return predicted.empty() || predicted.back() == 0.0 ? 0.0 : INFINITY;
    return std::abs(predicted.back() - actual.back()) / actual.back();
}

MassLossSeries mass_loss_series(const SolveResult& r, const CoefficientSet& c, double kappa) {
    MassLossSeries s;
    s.t = r.t;
    const std::size_t n = r.t.size();
    s.rate.resize(n);
    s.predicted.assign(n, 0.0);
    s.actual.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double sg = c.sigma(r.t[k], 0.0);
        s.rate[k] = -kappa * 0.5 * sg * sg * r.boundary[k];
        s.actual[k] = r.mass[0] - r.mass[k];
        if (k > 0) s.predicted[k] = s.predicted[k - 1] - 0.5 * (s.rate[k] + s.rate[k - 1]) * (r.t[k] - r.t[k - 1]);
    }
    return s;
}

WeakBoundaryMonitor::WeakBoundaryMonitor(const CoefficientSet& c, double eps, double dx, std::size_t points,
                                         const NoisePath& fine_noise)
    : c_(c), dx_(dx), phi_(tabulate_boundary_test_function(eps, c.kappa, dx, points)),
      g0_(GridFunction::zeros(dx, points)), gbar_(GridFunction::zeros(dx, points)), noise_(fine_noise) {
    for (std::size_t j = 0; j < points; ++j) {
        const double x = g0_.x(j);
        g0_.values[j] = elastic_kernel(eps, c.kappa, 0.0, x);
        gbar_.values[j] = elastic_correction(eps, c.kappa, x, 0.0);
    }
}

void WeakBoundaryMonitor::operator()(std::size_t n, double t, const std::vector<double>& V) {
    double P = 0.0, Kt = 0.0, Gm = 0.0, Gn = 0.0;
    const double rho = c_.rho(t, 0.0);
    const std::size_t M = V.size() - 1;
    for (std::size_t j = 0; j < M; ++j) {
        const double w = (j == 0 ? 0.5 : 1.0) * dx_ * V[j];
        if (w == 0.0) continue;
        const double x = static_cast<double>(j) * dx_;
        const double sg = c_.sigma(t, x);
        P += w * phi_.values[j];
        Kt += w * 0.5 * sg * sg * g0_.values[j];
        Gm += w * c_.mu(t, x) * gbar_.values[j];
        Gn += w * rho * sg * gbar_.values[j];
    }
    Kt *= c_.kappa;
    if (n == 0) {
        p0_ = P;
    } else {
        acc_ += pend_dt_ * noise_.dt() - pend_dw_ * noise_.increment(n - 1);
    }
    residual_.push_back(P - p0_ + acc_);
    pend_dt_ = Kt - Gm;
    pend_dw_ = Gn;
}

double WeakBoundaryMonitor::sup() const {
    double s = 0.0;
    for (double r : residual_) s = std::max(s, std::abs(r));
    return s;
}

GridFunction analytic_elastic_solution(const InitialLaw& law, double kappa, double T, double dx, std::size_t points) {
    GridFunction out = GridFunction::zeros(dx, points);
    const auto [lo, hi] = law.density_support();
    const double reach = 14.0 * std::sqrt(T);
    for (std::size_t j = 0; j < points; ++j) {
        const double x = out.x(j);
        const double a = std::max(lo, x - reach);
        const double b = std::min(hi, x + reach);
        if (a >= b) continue;
        out.values[j] = integrate([&](double y) { return elastic_kernel(T, kappa, x, y) * law.density(y); }, a, b,
                                  1e-11, 1e-16, "analytic elastic solution")
                            .value;
    }
    return out;
}

std::vector<double> bin_masses(const GridFunction& V, double bin, std::size_t bins) {
    const double per = bin / V.dx;
    const double rp = std::round(per);
    if (rp < 1.0 || std::abs(per - rp) > 1e-9 * per) throw ConfigError("bin width is not a multiple of the solver dx");
    const auto step = static_cast<std::size_t>(rp);
    std::vector<double> out(bins, 0.0);
    const std::size_t last = V.size() - 1;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t j0 = b * step;
        const std::size_t j1 = std::min(last, j0 + step);
        if (j0 >= last) break;
        double s = 0.5 * (V.values[j0] + V.values[j1]);
        for (std::size_t j = j0 + 1; j < j1; ++j) s += V.values[j];
        out[b] = s * V.dx;
    }
    return out;
}

std::vector<double> bin_masses(const EmpiricalMeasure& m, double bin, std::size_t bins) {
    const Histogram h = density_histogram(m, bin, bins);
    std::vector<double> out(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b] = h.density[b] * bin;
    return out;
}

std::vector<ComparisonRow> compare_particle_vs_solver(const std::vector<double>& particle_t,
                                                      const std::vector<EmpiricalMeasure>& particles,
                                                      const SolveResult& solver, double bin) {
    if (particle_t.size() != particles.size()) throw std::invalid_argument("compare: times and snapshots differ in length");
    std::vector<ComparisonRow> rows;
    for (std::size_t q = 0; q < particles.size(); ++q) {
        const double t = particle_t[q];
        std::size_t s = solver.snapshot_t.size();
        for (std::size_t k = 0; k < solver.snapshot_t.size(); ++k)
            if (std::abs(solver.snapshot_t[k] - t) <= 1e-9 * std::max(1.0, t)) s = k;
        if (s == solver.snapshot_t.size())
            throw ConfigError("compare: no solver snapshot at particle time " + std::to_string(t));
        const GridFunction& V = solver.snapshots[s];
        const auto bins = static_cast<std::size_t>(std::floor(V.x_max() / bin + 1e-9));
        const auto pv = bin_masses(V, bin, bins);
        const auto pp = bin_masses(particles[q], bin, bins);
        double l1 = 0.0, inside = 0.0;
        for (std::size_t b = 0; b < bins; ++b) {
            l1 += std::abs(pp[b] - pv[b]);
            inside += pp[b];
        }
        l1 += particles[q].total_mass() - inside;
        rows.push_back({t, l1, std::abs(particles[q].total_mass() - control_volume_mass(V))});
    }
    return rows;
}

std::vector<KappaRow> kappa_limit_study(const std::vector<double>& kappas, const NoisePath& noise,
                                        const CoefficientSet& c, const SolverConfig& cfg, const GridFunction& V0) {
    SolverConfig base = cfg;
    base.snapshot_times = {cfg.T};
    auto final_density = [&](BoundaryMode mode, double kappa) {
        CoefficientSet ck = c;
        ck.kappa = kappa;
        SolverConfig sc = base;
        sc.mode = mode;
        return solve_spde_path(ck, noise, sc, V0).snapshots.back();
    };
    const GridFunction abs_T = final_density(BoundaryMode::Absorbing, 0.0);
    const GridFunction ref_T = final_density(BoundaryMode::Reflecting, 0.0);
    std::vector<KappaRow> rows;
    for (double k : kappas) {
        const GridFunction v = final_density(BoundaryMode::Elastic, k);
        rows.push_back({k, l1_distance(v, abs_T), l1_distance(v, ref_T)});
    }
    return rows;
}

}  // namespace elastic
