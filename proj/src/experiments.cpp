#include "elastic/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/format.hpp"
#include "elastic/kernels.hpp"
#include "elastic/parallel.hpp"
#include "elastic/quadrature.hpp"

namespace elastic {

bool Report::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* Report::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

Check& Report::add(std::string name, bool pass, double value, double threshold, std::string detail) {
    checks.push_back({std::move(name), pass, value, threshold, std::move(detail)});
    return checks.back();
}

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {NAN, NAN};
    for (double x : xs) r.mean += x;
    r.mean /= n;
    if (xs.size() < 2) {
        r.se = NAN;
        return r;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
    return r;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

SlopeFit jackknife_log_slope(const std::vector<double>& x, const std::vector<std::vector<double>>& samples) {
    const std::size_t R = samples.size();
    const std::size_t P = x.size();
    std::vector<double> lx(P);
    for (std::size_t i = 0; i < P; ++i) lx[i] = std::log(x[i]);
    auto slope_without = [&](std::size_t skip) {
        std::vector<double> ly(P, 0.0);
        double cnt = 0;
        for (std::size_t r = 0; r < R; ++r) {
            if (r == skip) continue;
            for (std::size_t i = 0; i < P; ++i) ly[i] += samples[r][i];
            cnt += 1;
        }
        for (auto& v : ly) v = std::log(v / cnt);
        return ls_slope(lx, ly);
    };
    SlopeFit f;
    f.slope = slope_without(R);
    if (R < 2) {
        f.se = NAN;
        return f;
    }
    std::vector<double> loo(R);
    double mean = 0;
    for (std::size_t r = 0; r < R; ++r) mean += (loo[r] = slope_without(r));
    mean /= static_cast<double>(R);
    double ss = 0;
    for (double s : loo) ss += (s - mean) * (s - mean);
    f.se = std::sqrt(ss * static_cast<double>(R - 1) / static_cast<double>(R));
    return f;
}

namespace {

std::string fmt(double v) { return format_double(v); }

bool rho_is_zero(const CoefficientSet& c) { return c.rho.is_constant() && c.rho(0.0, 0.0) == 0.0; }

NoisePath run_noise(const ExperimentConfig& c, std::uint64_t salt, std::uint64_t run) {
    return NoisePath(mix_seed(mix_seed(c.seed, salt), run), c.T, c.dt);
}

// Salts separating the noise of the different suites.
enum Salt : std::uint64_t {
    kSimulate = 1,
    kClass = 2,
    kConvergence = 3,
    kLadder = 4,
    kCompare = 5,
    kKappa = 6,
    kLoss = 7,
    kPair = 8,
    kProbe = 9,
    kContraction = 10,
    kHalf = 11,
};

SimResult run_particles(const SimConfig& sc, const CoefficientSet& cs,
                        const InitialLaw& law, const NoisePath& noise, const ParticleObserver& obs = {}) {
    return sc.nonlinear.enabled ? simulate_nonlinear(sc, cs, law, noise, obs) : simulate(sc, cs, law, noise, obs);
}

// Adds counts of alive particles falling in the open intervals (lo[q], hi[q]).
void count_intervals(const ParticleSystemState& s, const std::vector<double>& lo, const std::vector<double>& hi,
                     std::vector<double>& out) {
    const std::size_t Q = lo.size();
    const std::size_t n = s.n();
    std::vector<std::uint64_t> part(chunk_count(n) * Q, 0);
    for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
        std::uint64_t* acc = &part[ci * Q];
        for (std::size_t i = b; i < e; ++i) {
            if (!s.alive[i]) continue;
            const double x = s.x[i];
            for (std::size_t q = 0; q < Q; ++q)
                if (x > lo[q] && x < hi[q]) ++acc[q];
        }
    });
    out.assign(Q, 0.0);
    for (std::size_t ci = 0; ci < chunk_count(n); ++ci)
        for (std::size_t q = 0; q < Q; ++q) out[q] += static_cast<double>(part[ci * Q + q]);
}

// Halton sequence in bases 2 and 3, scaled to (0, scale)^2.
std::vector<std::pair<double, double>> halton_points(std::size_t n, double scale) {
    auto radical = [](std::size_t i, std::size_t base) {
        double f = 1.0, r = 0.0;
        while (i > 0) {
            f /= static_cast<double>(base);
            r += f * static_cast<double>(i % base);
            i /= base;
        }
        return r;
    };
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 1; i <= n; ++i) pts.emplace_back(scale * radical(i, 2), scale * radical(i, 3));
    return pts;
}

// Integral of G_eps(x, y) over y in [a, b], in closed form.
double kernel_cell_integral(double eps, double kappa, double x, double a, double b) {
    const double r = std::sqrt(2.0 * eps);
    auto gauss = [&](double lo, double hi) { return 0.5 * (std::erf(hi / r) - std::erf(lo / r)); };
    double v = gauss(a - x, b - x) + gauss(x + a, x + b);
    if (kappa > 0.0) {
        // d/ds [exp(-s^2/2eps) erfcx((s + kappa eps)/sqrt(2 eps)) + erf(s/sqrt(2 eps))] = g(s).
        auto H = [&](double s) { return std::exp(-s * s / (2.0 * eps)) * erfcx((s + kappa * eps) / r) + std::erf(s / r); };
        v -= H(x + b) - H(x + a);
    }
    return v;
}

}  // namespace

SolverConfig solver_config(const ExperimentConfig& c, const InitialLaw& law) {
    const CoefficientSet cs = c.coefficients();
    SolverConfig s;
    s.T = c.T;
    s.dx = c.dx;
    const double sigma_max = cs.sigma.is_constant() ? std::abs(cs.sigma(0.0, 0.0)) : c.bound_C;
    const double xm = c.x_max > 0.0 ? c.x_max : default_x_max(law, sigma_max, c.T);
    const double cells = std::ceil(xm / c.dx - 1e-9);
    s.x_max = cells * c.dx;
    s.mode = parse_boundary_mode(c.mode);
    s.stability_guard = c.guard;
    s.tail_threshold = c.tail_threshold;
    if (c.solver_dt > 0.0) {
        s.dt = c.solver_dt;
    } else {
        s.dt = c.dt;
        if (!rho_is_zero(cs)) {
            int levels = 0;
            while (s.dt > c.guard * c.dx * c.dx * (1.0 + 1e-12)) {
                s.dt *= 0.5;
                if (++levels > 30) throw ConfigError("solver dt refinement exceeds 30 levels");
            }
        }
    }
    s.snapshot_times = c.snapshot_times;
    return s;
}

// ---------------------------------------------------------------------------

Report cmd_verify_kernels(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "verify-kernels";
    struct FaultScope {
        explicit FaultScope(double s) { set_kernel_fault_scale(s); }
        ~FaultScope() { set_kernel_fault_scale(1.0); }
    } fault(c.fault_kappa_scale);

    const auto n_pts = static_cast<std::size_t>(c.kernel_points);
    const auto pts = halton_points(n_pts, 3.0);
    std::vector<double> ys(n_pts);
    for (std::size_t i = 0; i < n_pts; ++i) ys[i] = 3.0 * static_cast<double>(i) / static_cast<double>(n_pts);

    Table t{"kernel_identities", {"eps", "kappa", "derivative_switch", "robin", "bound_excess", "chapman_kolmogorov"}, {}};
    double worst_switch = 0, worst_robin = 0, worst_bound = 0, worst_ck = 0;
    for (double eps : c.kernel_eps) {
        for (double kappa : c.kernel_kappa) {
            const double sw = derivative_switch_residual(eps, kappa, pts);
            const double rb = robin_identity_residual(eps, kappa, ys);
            double bound = 0.0;
            for (const auto& [x, y] : pts) {
                const double g = elastic_correction(eps, kappa, x, y);
                const double cap = kappa * std::exp(-(x + y) * (x + y) / (2.0 * eps));
                bound = std::max(bound, std::max(-g, g - cap) / std::max(cap, 1e-300));
            }
            for (double y : ys) {
                const double g = elastic_correction(eps, kappa, 0.0, y);
                const double cap = kappa * std::exp(-y * y / (2.0 * eps));
                bound = std::max(bound, std::max(-g, g - cap) / std::max(cap, 1e-300));
            }
            double ck = 0.0;
            const double sq = std::sqrt(eps);
            for (const auto& [s, u] : {std::pair{eps / 2, eps / 2}, std::pair{eps / 3, 2 * eps / 3}})
                for (double x : {0.0, 0.5 * sq, 2.0 * sq})
                    for (double y : {0.0, 1.0 * sq, 1.5})
                        ck = std::max(ck, chapman_kolmogorov_residual(s, u, kappa, x, y));
            t.rows.push_back({eps, kappa, sw, rb, bound, ck});
            worst_switch = std::max(worst_switch, sw);
            worst_robin = std::max(worst_robin, rb);
            worst_bound = std::max(worst_bound, bound);
            worst_ck = std::max(worst_ck, ck);
        }
    }

    // Contraction on random piecewise-constant f, exact cell integrals, quadrature norms.
    Table ct{"contraction", {"trial", "eps", "kappa", "norm_f", "norm_Tf", "ratio"}, {}};
    double worst_ratio = 0.0;
    SequenceRng rng(c.seed, Purpose::Sample, kContraction);
    const std::size_t combos = c.kernel_eps.size() * c.kernel_kappa.size();
    for (int trial = 0; trial < c.contraction_trials && combos > 0; ++trial) {
        const std::size_t combo = static_cast<std::size_t>(trial) % combos;
        const double eps = c.kernel_eps[combo / c.kernel_kappa.size()];
        const double kappa = c.kernel_kappa[combo % c.kernel_kappa.size()];
        const std::size_t cells = 1 + rng.below(12);
        std::vector<double> edge{0.0}, h;
        for (std::size_t q = 0; q < cells; ++q) {
            edge.push_back(edge.back() + rng.uniform(0.05, 1.0));
            h.push_back(rng.uniform(-2.0, 2.0));
        }
        double nf2 = 0.0;
        for (std::size_t q = 0; q < cells; ++q) nf2 += h[q] * h[q] * (edge[q + 1] - edge[q]);
        auto Tf = [&](double x) {
            double v = 0.0;
            for (std::size_t q = 0; q < cells; ++q) v += h[q] * kernel_cell_integral(eps, kappa, x, edge[q], edge[q + 1]);
            return v;
        };
        const double reach = edge.back() + 14.0 * std::sqrt(eps);
        double nT2 = 0.0;
        std::vector<double> breaks = edge;
        breaks.back() = reach;
        for (std::size_t q = 0; q + 1 < breaks.size(); ++q)
            nT2 += integrate([&](double x) { const double v = Tf(x); return v * v; }, breaks[q], breaks[q + 1], 1e-10,
                             1e-18, "contraction norm")
                       .value;
        const double ratio = std::sqrt(nT2 / nf2);
        worst_ratio = std::max(worst_ratio, ratio);
        ct.rows.push_back({static_cast<double>(trial), eps, kappa, std::sqrt(nf2), std::sqrt(nT2), ratio});
    }

    rep.add("derivative switch", worst_switch < 1e-6, worst_switch, 1e-6);
    rep.add("elastic boundary identity", worst_robin < 1e-6, worst_robin, 1e-6);
    rep.add("correction term bound", worst_bound <= 1e-12, worst_bound, 1e-12, "relative excess over kappa exp(-(x+y)^2/2eps)");
    rep.add("L2 contraction", worst_ratio <= 1.0 + 1e-9, worst_ratio, 1.0);
    rep.add("Chapman-Kolmogorov", worst_ck < 1e-6, worst_ck, 1e-6);
    rep.tables.push_back(std::move(t));
    rep.tables.push_back(std::move(ct));
    rep.facts.emplace_back("fault_kappa_scale", fmt(c.fault_kappa_scale));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_class_lambda(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "class-lambda";
    if (c.replications < 2) throw ConfigError("class-lambda needs at least 2 replications");
    if (c.eps_ladder.size() < 2 || c.spatial_widths.size() < 2)
        throw ConfigError("class-lambda needs at least two eps and two spatial widths");
    const CoefficientSet cs = c.coefficients();
    const InitialLaw law = c.initial_law();
    SimConfig sc = c.sim_config();
    sc.snapshot_times.clear();
    const std::size_t K = integral_steps(c.T, c.dt, "particles");

    std::vector<double> lo, hi;
    const std::size_t ne = c.eps_ladder.size(), nl = c.tail_lambdas.size(), nw = c.spatial_widths.size();
    for (double e : c.eps_ladder) lo.push_back(0.0), hi.push_back(e);
    for (double l : c.tail_lambdas) lo.push_back(l), hi.push_back(INFINITY);
    for (double w : c.spatial_widths) lo.push_back(c.spatial_a), hi.push_back(c.spatial_a + w);

    const auto R = static_cast<std::size_t>(c.replications);
    std::vector<std::vector<double>> boundary(R, std::vector<double>(ne)), tail(R, std::vector<double>(nl)),
        spatial(R, std::vector<double>(nw));
    Table per_run{"class_lambda_runs", {"run", "kind", "level", "value"}, {}};
    for (std::size_t r = 0; r < R; ++r) {
        const NoisePath noise = run_noise(c, kClass, r);
        const double N = static_cast<double>(sc.N);
        std::vector<double> counts;
        auto obs = [&](const ParticleSystemState& s) {
            if (s.step >= K) return;  // left Riemann sums over t_0..t_{K-1}
            count_intervals(s, lo, hi, counts);
            for (std::size_t j = 0; j < ne; ++j) boundary[r][j] += (counts[j] / N) * (counts[j] / N) * c.dt;
            for (std::size_t j = 0; j < nl; ++j) tail[r][j] += counts[ne + j] / N * c.dt;
            for (std::size_t j = 0; j < nw; ++j) spatial[r][j] += counts[ne + nl + j] / N * c.dt;
        };
        const SimResult res = run_particles(sc, cs, law, noise, obs);
        for (const auto& w : res.warnings) rep.warnings.push_back(w);
        for (std::size_t j = 0; j < ne; ++j) per_run.rows.push_back({double(r), 0.0, c.eps_ladder[j], boundary[r][j]});
        for (std::size_t j = 0; j < nl; ++j) per_run.rows.push_back({double(r), 1.0, c.tail_lambdas[j], tail[r][j]});
        for (std::size_t j = 0; j < nw; ++j) per_run.rows.push_back({double(r), 2.0, c.spatial_widths[j], spatial[r][j]});
    }

    Table summary{"class_lambda", {"kind", "level", "mean", "se"}, {}};
    auto column = [&](const std::vector<std::vector<double>>& m, std::size_t j) {
        std::vector<double> v;
        for (const auto& row : m) v.push_back(row[j]);
        return mean_se(v);
    };
    for (std::size_t j = 0; j < ne; ++j) {
        const auto ms = column(boundary, j);
        summary.rows.push_back({0.0, c.eps_ladder[j], ms.mean, ms.se});
    }
    for (std::size_t j = 0; j < nw; ++j) {
        const auto ms = column(spatial, j);
        summary.rows.push_back({2.0, c.spatial_widths[j], ms.mean, ms.se});
    }

    const SlopeFit bs = jackknife_log_slope(c.eps_ladder, boundary);
    rep.add("boundary decay slope", bs.slope - 3.0 * bs.se > 1.0, bs.slope - 3.0 * bs.se, 1.0,
            "slope " + fmt(bs.slope) + " se " + fmt(bs.se));
    const SlopeFit ss = jackknife_log_slope(c.spatial_widths, spatial);
    rep.add("spatial concentration slope", ss.slope - 3.0 * ss.se >= c.spatial_delta, ss.slope - 3.0 * ss.se,
            c.spatial_delta, "slope " + fmt(ss.slope) + " se " + fmt(ss.se));

    std::vector<double> tail_mean(nl);
    for (std::size_t j = 0; j < nl; ++j) {
        const auto ms = column(tail, j);
        tail_mean[j] = ms.mean;
        summary.rows.push_back({1.0, c.tail_lambdas[j], ms.mean, ms.se});
        const double env = std::exp(-2.0 * c.tail_lambdas[j]);
        rep.add("tail mass lambda=" + fmt(c.tail_lambdas[j]), ms.mean <= env + 3.0 * ms.se, ms.mean, env,
                "se " + fmt(ms.se));
    }
    for (double a : c.tail_alpha) {
        double worst = 0.0;
        bool mono = true;
        for (std::size_t j = 1; j < nl; ++j) {
            const double prev = tail_mean[j - 1] * std::exp(a * c.tail_lambdas[j - 1]);
            const double cur = tail_mean[j] * std::exp(a * c.tail_lambdas[j]);
            if (cur > prev) mono = false;
            if (prev > 0.0) worst = std::max(worst, cur / prev);
        }
        rep.add("tail decay alpha=" + fmt(a), mono, worst, 1.0, "max ratio of consecutive e^{alpha lambda} tails");
    }
    for (const auto& p : probe_initial_tail(law, c.tail_alpha))
        rep.add("initial tail alpha=" + fmt(p.alpha), p.decays, p.worst_ratio, 1.0);

    Table pairs{"pair_probability", {"eps", "estimate", "se", "ceiling"}, {}};
    for (std::size_t q = 0; q < c.pair_eps.size(); ++q) {
        const double eps = c.pair_eps[q];
        const auto pe = pair_boundary_probability(c.pair_rho, c.pair_t, eps, static_cast<std::size_t>(c.pair_M),
                                                  mix_seed(mix_seed(c.seed, kPair), q), law);
        pairs.rows.push_back({eps, pe.estimate, pe.se, pe.ceiling});
        rep.add("pair probability eps=" + fmt(eps), pe.estimate <= pe.ceiling + 3.0 * pe.se, pe.estimate, pe.ceiling,
                "se " + fmt(pe.se));
    }
    rep.tables.push_back(std::move(summary));
    rep.tables.push_back(std::move(per_run));
    rep.tables.push_back(std::move(pairs));
    rep.facts.emplace_back("boundary_slope", fmt(bs.slope));
    rep.facts.emplace_back("boundary_slope_se", fmt(bs.se));
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct EnsembleOut {
    // [run][phi][check time] of M, S, C, evolution residual
    std::vector<std::vector<std::vector<double>>> M, S, C, E;
    std::vector<double> jsup;
    std::vector<double> final_loss;
};

EnsembleOut run_ensemble(const ExperimentConfig& c, std::size_t N, std::size_t R, std::uint64_t salt,
                         bool martingales, Report& rep) {
    const CoefficientSet cs = c.coefficients();
    const InitialLaw law = c.initial_law();
    SimConfig sc = c.sim_config();
    sc.N = N;
    sc.snapshot_times.clear();
    const NonlinearDrift drift = c.nonlinear();
    const bool interact = sc.nonlinear.enabled && drift.b != 0.0;
    const std::size_t K = integral_steps(c.T, c.dt, "particles");
    std::vector<TestFunction> phis;
    for (double l : c.test_lambdas) phis.push_back({cs.kappa, l});
    std::vector<std::size_t> ck;
    for (double t : c.check_times) ck.push_back(grid_index(t, c.dt));

    EnsembleOut out;
    const std::size_t P = phis.size(), Q = ck.size();
    auto shape = [&] { return std::vector<std::vector<double>>(P, std::vector<double>(Q)); };
    for (std::size_t r = 0; r < R; ++r) {
        const NoisePath noise = run_noise(c, salt, r);
        MartingaleAccumulator acc(cs, phis, c.dt);
        double jsup = 0.0;
        auto obs = [&](const ParticleSystemState& s) {
            if (martingales) {
                const double extra = interact ? interaction_drift(s, drift) : 0.0;
                acc.observe(s.t, s.x, s.alive, s.n(), s.step < K ? noise.increment(s.step) : 0.0, extra);
            }
            const std::size_t n = s.n();
            std::vector<double> part(chunk_count(n), 0.0);
            for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
                double a = 0.0;
                for (std::size_t i = b; i < e; ++i) a += std::min(s.L[i], s.chi[i]);
                part[ci] = a;
            });
            double lsum = 0.0;
            for (double p : part) lsum += p;
            const double J = cs.kappa * lsum / static_cast<double>(n) - s.loss();
            jsup = std::max(jsup, std::abs(J));
        };
        const SimResult res = run_particles(sc, cs, law, noise, obs);
        for (const auto& w : res.warnings) rep.warnings.push_back(w);
        out.jsup.push_back(jsup);
        out.final_loss.push_back(res.loss.back());
        if (martingales) {
            auto M = shape(), S = shape(), C = shape(), E = shape();
            for (std::size_t f = 0; f < P; ++f) {
                const auto& ser = acc.series()[f];
                for (std::size_t q = 0; q < Q; ++q) {
                    M[f][q] = ser.M[ck[q]];
                    S[f][q] = ser.S[ck[q]];
                    C[f][q] = ser.C[ck[q]];
                    E[f][q] = ser.evolution[ck[q]];
                }
            }
            out.M.push_back(std::move(M));
            out.S.push_back(std::move(S));
            out.C.push_back(std::move(C));
            out.E.push_back(std::move(E));
        }
    }
    return out;
}

}  // namespace

Report cmd_convergence(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "convergence";
    if (c.replications < 2) throw ConfigError("convergence needs at least 2 replications");
    if (c.check_times.empty() || c.test_lambdas.empty()) throw ConfigError("convergence needs check times and test functions");
    const auto R = static_cast<std::size_t>(c.replications);
    const auto N = static_cast<std::size_t>(c.N);
    const double kappa = c.coefficients().kappa;
    const bool elastic = parse_boundary_mode(c.mode) == BoundaryMode::Elastic;
    if (!elastic) throw ConfigError("convergence: the martingale test functions need the elastic mode");

    const EnsembleOut full = run_ensemble(c, N, R, kConvergence, true, rep);
    const EnsembleOut half = run_ensemble(c, std::max<std::size_t>(1, N / 2), R, kHalf, true, rep);

    Table mt{"martingales",
             {"N", "lambda", "t", "M_mean", "M_se", "M_z", "S_mean", "S_se", "S_z", "C_mean", "C_se", "C_z",
              "evolution_var", "evolution_var_half_N"},
             {}};
    const std::size_t P = c.test_lambdas.size(), Q = c.check_times.size();
    auto pick = [&](const std::vector<std::vector<std::vector<double>>>& v, std::size_t f, std::size_t q) {
        std::vector<double> out;
        for (const auto& run : v) out.push_back(run[f][q]);
        return out;
    };
    auto var = [](const std::vector<double>& xs) {
        const auto ms = mean_se(xs);
        return ms.se * ms.se * static_cast<double>(xs.size());
    };
    double worst_z = 0.0;
    double min_vr = INFINITY, max_vr = 0.0;
    for (std::size_t f = 0; f < P; ++f) {
        for (std::size_t q = 0; q < Q; ++q) {
            const auto m = mean_se(pick(full.M, f, q));
            const auto s = mean_se(pick(full.S, f, q));
            const auto cc = mean_se(pick(full.C, f, q));
            const double vf = var(pick(full.E, f, q));
            const double vh = var(pick(half.E, f, q));
            const double zm = m.mean / m.se, zs = s.mean / s.se, zc = cc.mean / cc.se;
            mt.rows.push_back({double(N), c.test_lambdas[f], c.check_times[q], m.mean, m.se, zm, s.mean, s.se, zs,
                               cc.mean, cc.se, zc, vf, vh});
            const std::string tag = "lambda=" + fmt(c.test_lambdas[f]) + " t=" + fmt(c.check_times[q]);
            rep.add("M z-score " + tag, std::abs(zm) <= 3.0, zm, 3.0);
            worst_z = std::max(worst_z, std::abs(zm));
            if (q + 1 == Q) {
                rep.add("S z-score " + tag, std::abs(zs) <= 3.0, zs, 3.0);
                rep.add("C z-score " + tag, std::abs(zc) <= 3.0, zc, 3.0);
                worst_z = std::max({worst_z, std::abs(zs), std::abs(zc)});
            }
            if (c.check_times[q] > 0.0 && vf > 0.0) {
                min_vr = std::min(min_vr, vh / vf);
                max_vr = std::max(max_vr, vh / vf);
            }
        }
    }
    // Reported only: the Euler step leaves an N-independent O(dt) term in the residual.
    if (min_vr <= max_vr) {
        rep.facts.emplace_back("evolution_var_ratio_min", fmt(min_vr));
        rep.facts.emplace_back("evolution_var_ratio_max", fmt(max_vr));
    }

    Table jt{"jn_ladder", {"N", "runs", "sup_mean", "sup_se", "ratio_to_previous"}, {}};
    const auto RL = static_cast<std::size_t>(c.ladder_replications);
    double prev = NAN;
    for (std::size_t q = 0; q < c.N_ladder.size(); ++q) {
        const auto n = static_cast<std::size_t>(c.N_ladder[q]);
        const EnsembleOut lad = run_ensemble(c, n, RL, kLadder * 1000 + q, false, rep);
        const auto js = mean_se(lad.jsup);
        const double ratio = prev / js.mean;
        jt.rows.push_back({double(n), double(RL), js.mean, js.se, ratio});
        if (q > 0) {
            if (kappa > 0.0) {
                rep.add("J sup ratio N=" + std::to_string(c.N_ladder[q - 1]) + "->" + std::to_string(c.N_ladder[q]),
                        ratio >= 1.5 && ratio <= 3.0, ratio, 2.0, "band [1.5, 3]");
            }
        }
        prev = js.mean;
        if (kappa == 0.0) {
            const double mx = *std::max_element(lad.final_loss.begin(), lad.final_loss.end());
            rep.add("loss identically zero N=" + std::to_string(n), mx == 0.0, mx, 0.0);
        }
    }
    rep.tables.push_back(std::move(mt));
    rep.tables.push_back(std::move(jt));
    rep.facts.emplace_back("worst_abs_z", fmt(worst_z));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_compare(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "compare";
    const InitialLaw law = c.initial_law();
    const NoisePath noise = run_noise(c, kCompare, 0);
    SimConfig sc = c.sim_config();
    if (std::find(sc.snapshot_times.begin(), sc.snapshot_times.end(), c.T) == sc.snapshot_times.end())
        sc.snapshot_times.push_back(c.T);
    std::sort(sc.snapshot_times.begin(), sc.snapshot_times.end());
    Table t{"compare", {"kappa", "N", "t", "l1", "mass_diff"}, {}};
    Table st{"compare_statistical", {"kappa", "N", "statistical_l1"}, {}};
    for (double kappa : c.compare_kappas) {
        ExperimentConfig ck = c;
        ck.kappa = kappa;
        ck.mode = "elastic";
        const CoefficientSet cs = ck.coefficients();
        SolverConfig so = solver_config(ck, law);
        so.snapshot_times = sc.snapshot_times;
        const GridFunction V0 = discretize_initial(law, so.x_max, so.dx);
        const SolveResult sol = solve_spde_path(cs, noise, so, V0);
        for (const auto& w : sol.warnings) rep.warnings.push_back(w);
        const GridFunction& VT = sol.snapshots.back();
        const auto bins = static_cast<std::size_t>(std::floor(VT.x_max() / c.bin + 1e-9));

        double stat[2] = {0, 0};
        for (int level = 0; level < 2; ++level) {
            SimConfig sl = sc;
            sl.N = sc.N * (level == 0 ? 1 : 4);
            std::vector<double> hist[2];
            double mass[2] = {0, 0};
            for (int rr = 0; rr < 2; ++rr) {
                const SimResult res = run_particles(sl, cs, law, noise.with_replica(2 * level + rr));
                for (const auto& w : res.warnings) rep.warnings.push_back(w);
                hist[rr] = bin_masses(res.snapshots.back(), c.bin, bins);
                mass[rr] = res.snapshots.back().total_mass();
                if (rr == 0) {
                    const auto rows = compare_particle_vs_solver(res.snapshot_t, res.snapshots, sol, c.bin);
                    double l1 = 0, md = 0;
                    for (const auto& row : rows) {
                        t.rows.push_back({kappa, double(sl.N), row.t, row.l1, row.mass_diff});
                        l1 = std::max(l1, row.l1);
                        md = std::max(md, row.mass_diff);
                    }
                    if (level == 0) {
                        rep.add("L1 distance kappa=" + fmt(kappa), l1 <= 0.05, l1, 0.05, "max over snapshot times");
                        rep.add("mass difference kappa=" + fmt(kappa), md <= 0.01, md, 0.01, "max over snapshot times");
                    }
                }
            }
            // Beyond-grid mass enters the distance as one extra bin.
            double d = 0.0, in0 = 0.0, in1 = 0.0;
            for (std::size_t b = 0; b < bins; ++b) {
                d += std::abs(hist[0][b] - hist[1][b]);
                in0 += hist[0][b];
                in1 += hist[1][b];
            }
            d += std::abs((mass[0] - in0) - (mass[1] - in1));
            stat[level] = d / std::sqrt(2.0);
            st.rows.push_back({kappa, double(sl.N), stat[level]});
        }
        const double ratio = stat[0] / stat[1];
        rep.add("statistical component ratio kappa=" + fmt(kappa), ratio >= 1.4 && ratio <= 3.0, ratio, 2.0,
                "N -> 4N, band [1.4, 3]");
        rep.facts.emplace_back("solver_dt_kappa=" + fmt(kappa), fmt(sol.dt));
        rep.facts.emplace_back("solver_refine_levels", std::to_string(sol.refine_levels));
        rep.facts.emplace_back("limiter_activations_kappa=" + fmt(kappa), std::to_string(sol.limiter_activations));
    }
    rep.tables.push_back(std::move(t));
    rep.tables.push_back(std::move(st));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_kappa_limits(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "kappa-limits";
    if (c.kappa_ladder.size() < 2) throw ConfigError("kappa-limits needs at least two ladder points");
    std::vector<double> ladder = c.kappa_ladder;
    if (!std::is_sorted(ladder.begin(), ladder.end())) throw ConfigError("kappa-limits: ladder must be increasing");
    const InitialLaw law = c.initial_law();
    const CoefficientSet cs = c.coefficients();
    const NoisePath noise = run_noise(c, kKappa, 0);
    SolverConfig so = solver_config(c, law);
    const GridFunction V0 = discretize_initial(law, so.x_max, so.dx);
    const auto rows = kappa_limit_study(ladder, noise, cs, so, V0);
    Table t{"kappa_limits", {"kappa", "d_absorbing", "d_reflecting"}, {}};
    bool dec = true, inc = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.rows.push_back({rows[i].kappa, rows[i].d_absorbing, rows[i].d_reflecting});
        if (i > 0) {
            dec = dec && rows[i].d_absorbing < rows[i - 1].d_absorbing;
            inc = inc && rows[i].d_reflecting > rows[i - 1].d_reflecting;
        }
    }
    rep.add("distance to absorbing strictly decreasing", dec, rows.back().d_absorbing, rows.front().d_absorbing);
    rep.add("distance to reflecting strictly increasing", inc, rows.front().d_reflecting, rows.back().d_reflecting);
    rep.add("reflecting endpoint kappa=" + fmt(rows.front().kappa), rows.front().d_reflecting <= 0.02,
            rows.front().d_reflecting, 0.02);
    rep.add("absorbing endpoint kappa=" + fmt(rows.back().kappa), rows.back().d_absorbing <= 0.05,
            rows.back().d_absorbing, 0.05);
    rep.tables.push_back(std::move(t));
    rep.facts.emplace_back("solver_dt", fmt(so.dt));
    rep.facts.emplace_back("x_max", fmt(so.x_max));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_mass_loss(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "mass-loss";
    const BoundaryMode mode = parse_boundary_mode(c.mode);
    if (mode == BoundaryMode::Absorbing)
        throw ConfigError("mass-loss: the kernel-side loss identity has a finite rate kappa and does not apply in "
                          "absorbing mode");
    if (c.replications < 2) throw ConfigError("mass-loss needs at least 2 replications");
    if (c.loss_eps.empty()) throw ConfigError("mass-loss needs study.loss_eps");
    ExperimentConfig ce = c;
    if (mode == BoundaryMode::Reflecting) ce.kappa = 0.0;
    const CoefficientSet cs = ce.coefficients();
    const InitialLaw law = c.initial_law();
    SimConfig sc = ce.sim_config();
    sc.snapshot_times.clear();
    const std::size_t K = integral_steps(c.T, c.dt, "particles");
    const auto every = static_cast<std::size_t>(c.kernel_every);
    if (K % every != 0) throw ConfigError("mass-loss: kernel_every must divide the number of steps");

    std::vector<double> eps = c.loss_eps;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const std::size_t E = eps.size();
    const auto R = static_cast<std::size_t>(c.replications);
    std::vector<std::vector<double>> kside(E), lside(E), diff(E);
    const double kappa = cs.kappa;
    for (std::size_t r = 0; r < R; ++r) {
        const NoisePath noise = run_noise(ce, kLoss, r);
        std::vector<double> acc(E, 0.0);
        auto obs = [&](const ParticleSystemState& s) {
            if (s.step >= K || s.step % every != 0 || kappa == 0.0) return;
            const std::size_t n = s.n();
            std::vector<double> part(chunk_count(n) * E, 0.0);
            for_chunks(n, [&](std::size_t ci, std::size_t b, std::size_t e) {
                double* a = &part[ci * E];
                for (std::size_t i = b; i < e; ++i) {
                    if (!s.alive[i]) continue;
                    const double x = s.x[i];
                    const double sg = cs.sigma(s.t, x);
                    for (std::size_t q = 0; q < E; ++q) {
                        if (x > 14.0 * std::sqrt(eps[q])) continue;
                        a[q] += 0.5 * sg * sg * elastic_kernel(eps[q], kappa, 0.0, x);
                    }
                }
            });
            for (std::size_t q = 0; q < E; ++q) {
                double tot = 0.0;
                for (std::size_t ci = 0; ci < chunk_count(n); ++ci) tot += part[ci * E + q];
                acc[q] += kappa * tot / static_cast<double>(n) * c.dt * static_cast<double>(every);
            }
        };
        const SimResult res = run_particles(sc, cs, law, noise, obs);
        for (const auto& w : res.warnings) rep.warnings.push_back(w);
        for (std::size_t q = 0; q < E; ++q) {
            kside[q].push_back(acc[q]);
            lside[q].push_back(res.loss.back());
            diff[q].push_back(acc[q] - res.loss.back());
        }
    }
    Table t{"mass_loss", {"eps", "kernel_mean", "kernel_se", "loss_mean", "loss_se", "diff_mean", "diff_se", "z"}, {}};
    std::vector<double> gap(E);
    for (std::size_t q = 0; q < E; ++q) {
        const auto k = mean_se(kside[q]), l = mean_se(lside[q]), d = mean_se(diff[q]);
        t.rows.push_back({eps[q], k.mean, k.se, l.mean, l.se, d.mean, d.se, d.se > 0 ? d.mean / d.se : 0.0});
        gap[q] = std::abs(d.mean);
    }
    const auto dlast = mean_se(diff[E - 1]);
    if (kappa == 0.0) {
        const double mk = *std::max_element(kside[E - 1].begin(), kside[E - 1].end());
        const double ml = *std::max_element(lside[E - 1].begin(), lside[E - 1].end());
        rep.add("both sides zero", mk == 0.0 && ml == 0.0, std::max(mk, ml), 0.0);
    } else {
        rep.add("agreement at eps=" + fmt(eps[E - 1]), std::abs(dlast.mean) <= 3.0 * dlast.se, dlast.mean,
                3.0 * dlast.se, "paired difference kernel - loss");
        bool mono = true;
        for (std::size_t q = 1; q < E; ++q) mono = mono && gap[q] < gap[q - 1];
        rep.add("monotone improvement along eps", mono, gap[E - 1], gap[0], "|kernel - loss| strictly decreasing as eps decreases");
    }

    // Solver side on the first noise path.
    if (law.has_density()) {
        const NoisePath noise = run_noise(ce, kLoss, 0);
        SolverConfig so = solver_config(ce, law);
        so.mode = mode;
        so.snapshot_times = {c.T};
        const GridFunction V0 = discretize_initial(law, so.x_max, so.dx);
        const NoisePath fine = noise.refined_to(so.dt);
        WeakBoundaryMonitor mon(cs, c.weak_eps, so.dx, V0.size(), fine);
        const SolveResult sol = solve_spde_path(cs, noise, so, V0, std::ref(mon));
        for (const auto& w : sol.warnings) rep.warnings.push_back(w);
        const MassLossSeries mls = mass_loss_series(sol, cs, kappa);
        const double rg = mls.relative_gap();
        if (kappa > 0.0)
            rep.add("solver mass-loss consistency", rg <= 0.05, rg, 0.05);
        else
            rep.add("solver mass conserved", mls.actual.back() <= 1e-6, mls.actual.back(), 1e-6);
        Table ft{"solver_mass_loss", {"t", "rate", "predicted", "actual", "weak_bc_residual"}, {}};
        const std::size_t stride = std::max<std::size_t>(1, mls.t.size() / 1000);
        for (std::size_t k = 0; k < mls.t.size(); k += stride)
            ft.rows.push_back({mls.t[k], mls.rate[k], mls.predicted[k], mls.actual[k], mon.residual()[k]});
        rep.tables.push_back(std::move(ft));
        rep.facts.emplace_back("weak_bc_residual_sup", fmt(mon.sup()));
        rep.facts.emplace_back("solver_dt", fmt(sol.dt));
    }
    rep.tables.insert(rep.tables.begin(), std::move(t));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_simulate(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "simulate";
    const CoefficientSet cs = c.coefficients();
    const InitialLaw law = c.initial_law();
    const SimConfig sc = c.sim_config();
    const NoisePath noise = run_noise(c, kSimulate, 0);
    const SimResult res = run_particles(sc, cs, law, noise);
    rep.warnings = res.warnings;
    Table loss{"loss", {"t", "loss"}, {}};
    for (std::size_t k = 0; k < res.loss.size(); ++k) loss.rows.push_back({noise.time(k), res.loss[k]});
    Table hist{"histogram", {"t", "bin_left", "mass"}, {}};
    bool book = true;
    for (std::size_t q = 0; q < res.snapshots.size(); ++q) {
        const auto& m = res.snapshots[q];
        const auto bins = static_cast<std::size_t>(std::ceil((m.max_atom() + c.bin) / c.bin));
        const auto bm = bin_masses(m, c.bin, bins);
        for (std::size_t b = 0; b < bins; ++b) hist.rows.push_back({res.snapshot_t[q], c.bin * double(b), bm[b]});
        const std::size_t k = grid_index(res.snapshot_t[q], c.dt);
        const double killed = std::round(res.loss[k] * double(sc.N));
        book = book && (m.size() + static_cast<std::size_t>(killed) == sc.N);
    }
    rep.add("mass bookkeeping", book, book ? 0.0 : 1.0, 0.0, "alive + killed = N at every snapshot");
    std::size_t killed = 0;
    for (double t : res.tau) killed += std::isnan(t) ? 0 : 1;
    rep.add("loss matches kill times", killed == res.final_state.killed, double(killed), double(res.final_state.killed));
    if (sc.nonlinear.enabled && sc.nonlinear.b != 0.0) {
        rep.add("interaction Lipschitz monitor", res.lipschitz_worst_ratio <= 1.0, res.lipschitz_worst_ratio, 1.0);
        const auto p = lipschitz_probe(sc.nonlinear, static_cast<std::size_t>(c.probe_pairs), 2000,
                                       mix_seed(c.seed, kProbe));
        rep.add("interaction Lipschitz probe", p.violations == 0, p.worst_ratio, 1.0,
                std::to_string(p.violations) + " of " + std::to_string(p.pairs) + " pairs violate");
    }
    rep.tables.push_back(std::move(loss));
    rep.tables.push_back(std::move(hist));
    rep.facts.emplace_back("final_loss", fmt(res.loss.back()));
    return rep;
}

// ---------------------------------------------------------------------------

Report cmd_solve(const ExperimentConfig& c) {
    Report rep;
    rep.kind = "solve";
    const CoefficientSet cs = c.coefficients();
    const InitialLaw law = c.initial_law();
    SolverConfig so = solver_config(c, law);
    if (so.snapshot_times.empty() || so.snapshot_times.back() != c.T) so.snapshot_times.push_back(c.T);
    const GridFunction V0 = discretize_initial(law, so.x_max, so.dx);
    const NoisePath noise = run_noise(c, kSimulate, 0);
    const SolveResult sol = solve_spde_path(cs, noise, so, V0);
    rep.warnings = sol.warnings;
    Table st{"solution", {"t", "x", "V"}, {}};
    for (std::size_t q = 0; q < sol.snapshots.size(); ++q)
        for (std::size_t j = 0; j < sol.snapshots[q].size(); ++j)
            st.rows.push_back({sol.snapshot_t[q], sol.snapshots[q].x(j), sol.snapshots[q].values[j]});
    Table mt{"mass", {"t", "mass", "boundary"}, {}};
    const std::size_t stride = std::max<std::size_t>(1, sol.t.size() / 2000);
    for (std::size_t k = 0; k < sol.t.size(); k += stride) mt.rows.push_back({sol.t[k], sol.mass[k], sol.boundary[k]});
    if (so.mode == BoundaryMode::Elastic && cs.kappa > 0.0) {
        const double rg = mass_loss_series(sol, cs, cs.kappa).relative_gap();
        rep.add("mass-loss consistency", rg <= 0.05, rg, 0.05);
    }
    const bool analytic = rho_is_zero(cs) && cs.mu.is_constant() && cs.mu(0, 0) == 0.0 && cs.sigma.is_constant() &&
                          cs.sigma(0, 0) == 1.0 && so.mode == BoundaryMode::Elastic;
    if (analytic) {
        const GridFunction& VT = sol.snapshots.back();
        const GridFunction A = analytic_elastic_solution(law, cs.kappa, c.T, VT.dx, VT.size());
        const double err = l1_distance(VT, A);
        rep.add("analytic L1 error", err <= 0.01, err, 0.01);
        rep.facts.emplace_back("analytic_l1", fmt(err));
    }
    rep.tables.push_back(std::move(st));
    rep.tables.push_back(std::move(mt));
    rep.facts.emplace_back("dx", fmt(sol.dx));
    rep.facts.emplace_back("dt", fmt(sol.dt));
    rep.facts.emplace_back("x_max", fmt(so.x_max));
    rep.facts.emplace_back("stability_guard", fmt(sol.guard));
    rep.facts.emplace_back("guard_enforced", sol.guard_enforced ? "true" : "false");
    rep.facts.emplace_back("refine_levels", std::to_string(sol.refine_levels));
    rep.facts.emplace_back("tail_mass_max", fmt(sol.tail_mass_max));
    rep.facts.emplace_back("min_value", fmt(sol.min_value));
    rep.facts.emplace_back("limiter_activations", std::to_string(sol.limiter_activations));
    return rep;
}

namespace {

ValidationReport check_assumptions(const ExperimentConfig& c) {
    const CoefficientSet cs = c.coefficients();
    const double x_max = solver_config(c, c.initial_law()).x_max;
    std::vector<double> tg, xg;
    for (int i = 0; i < c.validate_t_points; ++i)
        tg.push_back(c.validate_t_points == 1 ? 0.0 : c.T * i / (c.validate_t_points - 1));
    for (int i = 0; i < c.validate_x_points; ++i)
        xg.push_back(c.validate_x_points == 1 ? 0.0 : x_max * i / (c.validate_x_points - 1));
    ValidationReport v = validate_assumptions(cs, tg, xg);
    if (!v.ok()) {
        std::ostringstream os;
        os << v.violations.size() << " coefficient assumption violation(s); first: " << v.violations[0].constraint
           << " at t=" << v.violations[0].t << ", x=" << v.violations[0].x << " (value " << v.violations[0].value << ")";
        throw ConfigError(os.str());
    }
    return v;
}

Report dispatch(const ExperimentConfig& c) {
    if (c.kind == "verify-kernels") return cmd_verify_kernels(c);
    if (c.kind == "convergence") return cmd_convergence(c);
    if (c.kind == "class-lambda") return cmd_class_lambda(c);
    if (c.kind == "compare") return cmd_compare(c);
    if (c.kind == "kappa-limits") return cmd_kappa_limits(c);
    if (c.kind == "mass-loss") return cmd_mass_loss(c);
    if (c.kind == "simulate") return cmd_simulate(c);
    if (c.kind == "solve") return cmd_solve(c);
    throw ConfigError("unknown experiment kind '" + c.kind + "'");
}

}  // namespace

Report run_experiment(const ExperimentConfig& c) {
    if (c.kind == "verify-kernels") return dispatch(c);
    const ValidationReport v = check_assumptions(c);
    Report r = dispatch(c);
    r.facts.emplace_back("assumption_check", v.note);
    r.facts.emplace_back("mu_tilde_bound", fmt(v.mu_tilde_bound));
    return r;
}

}  // namespace elastic
