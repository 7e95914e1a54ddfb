// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <tbb/task_arena.h>

#include "elastic/artifacts.hpp"
#include "elastic/config.hpp"
#include "elastic/experiments.hpp"
#include "elastic/parallel.hpp"
#include "elastic/particles.hpp"

using namespace elastic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;  // sub-check lines, printed indented
    std::string summary;

    void take(const Report& r, const std::string& prefix) {
        for (const auto& ch : r.checks) {
            pass = pass && ch.pass;
            std::ostringstream os;
            os << (ch.pass ? "ok   " : "FAIL ") << prefix << ": " << ch.name << " = " << ch.value << " (threshold "
               << ch.threshold << (ch.detail.empty() ? "" : "; " + ch.detail) << ")";
            lines.push_back(os.str());
        }
        if (r.checks.empty()) {
            pass = false;
            lines.push_back("FAIL " + prefix + ": no checks reported");
        }
    }
    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

fs::path out_root() {
    const fs::path p = fs::current_path() / "acceptance_out";
    fs::create_directories(p);
    return p;
}

Report run_and_store(const ExperimentConfig& c, const std::string& tag) {
    Report r = run_experiment(c);
    write_artifacts(r, c, (out_root() / tag).string());
    return r;
}

int failures = 0;
std::set<int> selected;  // empty: all
std::ofstream summary_file;

void emit(const std::string& line) {
    std::cout << line << std::endl;
    summary_file << line << "\n" << std::flush;
}

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body) {
    if (!selected.empty() && !selected.contains(id)) return;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.lines.push_back(std::string("FAIL exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= budget_s;
    o.pass = o.pass && in_budget;
    for (const auto& l : o.lines) emit("    " + l);
    std::ostringstream os;
    os << (o.pass ? "PASS" : "FAIL") << " C" << id << " " << title << " | runtime " << std::fixed
       << std::setprecision(1) << secs << " s (budget " << budget_s << " s" << (in_budget ? "" : ", exceeded") << ")";
    if (!o.summary.empty()) os << " | " << o.summary;
    emit(os.str());
    failures += o.pass ? 0 : 1;
}

ExperimentConfig base(const std::string& kind) {
    ExperimentConfig c;
    c.kind = kind;
    return c;
}

void nonlinear_on(ExperimentConfig& c) {
    c.interaction = true;
    c.b = -1.0;
    c.shape = "tanh";
    c.lipschitz = 1.0;
}

ExperimentConfig convergence_config() {
    ExperimentConfig c = base("convergence");
    c.replications = 200;
    c.N = 10000;
    c.T = 1.0;
    c.dt = 2e-3;
    c.snapshot_times = {0.0};
    c.N_ladder = {2500, 10000, 40000};
    c.check_times = {0.25, 0.5, 1.0};
    c.ladder_replications = 80;
    return c;
}

bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

// Reduced configurations of every subcommand for the determinism sweep.
std::vector<ExperimentConfig> reduced_suites() {
    std::vector<ExperimentConfig> v;
    {
        auto c = base("verify-kernels");
        c.contraction_trials = 10;
        v.push_back(c);
    }
    {
        auto c = base("convergence");
        c.replications = 6;
        c.N = 2000;
        c.T = 0.2;
        c.dt = 4e-3;
        c.snapshot_times = {0.0};
        c.check_times = {0.1, 0.2};
        c.N_ladder = {500, 2000};
        c.ladder_replications = 4;
        v.push_back(c);
    }
    {
        auto c = base("class-lambda");
        c.replications = 3;
        c.N = 20000;
        c.T = 0.5;
        c.snapshot_times = {0.0, 0.5};
        c.pair_M = 100000;
        v.push_back(c);
    }
    {
        auto c = base("compare");
        c.N = 5000;
        c.T = 0.3;
        c.snapshot_times = {0.0, 0.3};
        v.push_back(c);
    }
    {
        auto c = base("kappa-limits");
        c.T = 0.3;
        c.snapshot_times = {0.0, 0.3};
        v.push_back(c);
    }
    {
        auto c = base("mass-loss");
        c.replications = 3;
        c.N = 2000;
        c.T = 0.2;
        c.dt = 1e-3;
        c.snapshot_times = {0.0};
        v.push_back(c);
    }
    {
        auto c = base("simulate");
        c.N = 5000;
        c.T = 0.3;
        c.snapshot_times = {0.0, 0.3};
        v.push_back(c);
        nonlinear_on(c);
        v.push_back(c);
    }
    {
        auto c = base("solve");
        c.T = 0.3;
        c.snapshot_times = {0.0, 0.3};
        v.push_back(c);
    }
    return v;
}

std::vector<OutputFile> run_with_threads(const ExperimentConfig& c, int threads, const fs::path& dir) {
    ThreadLimit limit(threads);
    tbb::task_arena arena(threads);
    std::vector<OutputFile> files;
    arena.execute([&] { files = write_artifacts(run_experiment(c), c, dir.string()); });
    return files;
}

std::size_t distinct_threads(int threads) {
    ThreadLimit limit(threads);
    tbb::task_arena arena(threads);
    std::set<std::thread::id> ids;
    std::mutex m;
    arena.execute([&] {
        for_each_index(256, [&](std::size_t) {
            const auto until = std::chrono::steady_clock::now() + std::chrono::microseconds(500);
            while (std::chrono::steady_clock::now() < until) {
            }
            std::lock_guard<std::mutex> lock(m);
            ids.insert(std::this_thread::get_id());
        });
    });
    return ids.size();
}

}  // namespace

// Optional arguments select criteria by number, e.g. "acceptance 2 9".
int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
    summary_file.open(out_root() / "summary.txt");

    criterion(1, "kernel identity suite (residuals < 1e-6)", 10.0, [](Outcome& o) {
        o.take(run_and_store(base("verify-kernels"), "c1"), "verify-kernels");
    });

    criterion(2, "analytic baseline (L1 <= 0.01, halving ratio in [1.4, 4])", 120.0, [](Outcome& o) {
        double err[2];
        for (int level = 0; level < 2; ++level) {
            ExperimentConfig c = base("solve");
            c.rho = "constant 0";
            c.mu = "constant 0";
            c.sigma = "constant 1";
            c.kappa = 1.0;
            c.law = "gaussian 1 0.1";
            c.T = 0.5;
            c.dt = level == 0 ? 1e-4 : 5e-5;
            c.snapshot_times = {0.5};
            c.dx = level == 0 ? 1e-3 : 5e-4;
            c.solver_dt = c.dt;
            const Report r = run_and_store(c, level == 0 ? "c2_dx1e-3" : "c2_dx5e-4");
            o.take(r, "solve dx=" + std::to_string(c.dx));
            const Check* a = r.find("analytic L1 error");
            if (!a) throw std::runtime_error("solve did not report the analytic error");
            err[level] = a->value;
        }
        const double ratio = err[0] / err[1];
        o.require(ratio >= 1.4 && ratio <= 4.0, "error ratio under (dx, dt) halving = " + std::to_string(ratio) +
                                                   " (band [1.4, 4])");
        o.summary = "L1 " + std::to_string(err[0]) + ", ratio " + std::to_string(ratio);
    });

    criterion(3, "conditional-law representation (L1 <= 0.05, mass <= 0.01, stat ratio in [1.4, 3])", 600.0,
              [](Outcome& o) {
                  ExperimentConfig c = base("compare");
                  c.N = 100000;
                  c.T = 1.0;
                  c.dt = 2.5e-4;
                  c.rho = "constant 0.5";
                  c.compare_kappas = {0.0, 1.0};
                  c.bin = 0.05;
                  o.take(run_and_store(c, "c3"), "compare");
              });

    criterion(4, "kappa limits (monotone; endpoints <= 0.02 and <= 0.05)", 600.0, [](Outcome& o) {
        ExperimentConfig c = base("kappa-limits");
        c.kappa_ladder = {0.01, 0.1, 1.0, 10.0, 100.0};
        o.take(run_and_store(c, "c4"), "kappa-limits");
    });

    criterion(5, "class-Lambda statistics (slope lower bound > 1, tails, pair ceiling)", 600.0, [](Outcome& o) {
        o.take(run_and_store(base("class-lambda"), "c5"), "class-lambda");
    });

    criterion(6, "martingale characterization (|z| <= 3, J^N ratios in [1.5, 3])", 600.0, [](Outcome& o) {
        o.take(run_and_store(convergence_config(), "c6"), "convergence");
    });

    criterion(7, "weak boundary and mass-loss identity (3 SE at eps=0.01, monotone, FD <= 5%)", 300.0,
              [](Outcome& o) {
                  ExperimentConfig c = base("mass-loss");
                  c.replications = 40;
                  c.N = 10000;
                  c.T = 0.5;
                  c.dt = 1e-4;
                  c.snapshot_times = {0.0};
                  c.kernel_every = 10;
                  o.take(run_and_store(c, "c7"), "mass-loss");
              });

    criterion(8, "nonlinear extension (b=0 bit-identical, Lipschitz probe, criteria 5-6 with interaction)", 600.0,
              [](Outcome& o) {
                  ExperimentConfig c = base("simulate");
                  c.N = 20000;
                  c.T = 0.5;
                  c.snapshot_times = {0.0, 0.25, 0.5};
                  const CoefficientSet cs = c.coefficients();
                  const InitialLaw law = c.initial_law();
                  const NoisePath noise(c.seed, c.T, c.dt);
                  SimConfig off = c.sim_config();
                  SimConfig zero = off;
                  zero.nonlinear.enabled = true;
                  zero.nonlinear.b = 0.0;
                  const SimResult a = simulate(off, cs, law, noise);
                  const SimResult b = simulate_nonlinear(zero, cs, law, noise);
                  bool same = same_bytes(a.final_state.x, b.final_state.x) && same_bytes(a.tau, b.tau) &&
                              same_bytes(a.loss, b.loss) && same_bytes(a.final_state.L, b.final_state.L);
                  for (std::size_t q = 0; same && q < a.snapshots.size(); ++q)
                      same = same_bytes(a.snapshots[q].atoms(), b.snapshots[q].atoms());
                  o.require(same, "b = 0 nonlinear simulator bit-identical to the linear one");

                  ExperimentConfig lin = c, nl0 = c;
                  nl0.interaction = true;
                  nl0.b = 0.0;
                  const auto fa = write_artifacts(run_experiment(lin), lin, (out_root() / "c8_linear").string());
                  const auto fb = write_artifacts(run_experiment(nl0), nl0, (out_root() / "c8_b0").string());
                  bool csv_same = fa.size() == fb.size();
                  for (std::size_t i = 0; csv_same && i < fa.size(); ++i)
                      if (fa[i].name.ends_with(".csv")) csv_same = fa[i].sha1 == fb[i].sha1;
                  o.require(csv_same, "b = 0 simulate CSV outputs hash-identical to the linear run");

                  ExperimentConfig nl = c;
                  nonlinear_on(nl);
                  o.take(run_and_store(nl, "c8_simulate"), "nonlinear simulate");
                  ExperimentConfig cl = base("class-lambda");
                  nonlinear_on(cl);
                  o.take(run_and_store(cl, "c8_class_lambda"), "nonlinear class-lambda");
                  ExperimentConfig cv = convergence_config();
                  nonlinear_on(cv);
                  o.take(run_and_store(cv, "c8_convergence"), "nonlinear convergence");
              });

    criterion(9, "determinism (byte-identical outputs across reruns and thread counts)", 900.0, [](Outcome& o) {
        const std::size_t used = distinct_threads(4);
        o.require(used >= 2, "4-slot arena ran on " + std::to_string(used) + " distinct threads");
        const fs::path root = out_root() / "c9";
        std::size_t files = 0;
        int idx = 0;
        for (const auto& c : reduced_suites()) {
            const std::string tag = std::to_string(idx++) + "_" + c.kind;
            const auto one = run_with_threads(c, 1, root / (tag + "_t1"));
            const auto four = run_with_threads(c, 4, root / (tag + "_t4"));
            const auto again = run_with_threads(c, 4, root / (tag + "_t4b"));
            bool same = one.size() == four.size() && one.size() == again.size() && !one.empty();
            for (std::size_t i = 0; same && i < one.size(); ++i)
                same = one[i].name == four[i].name && one[i].sha1 == four[i].sha1 && one[i].sha1 == again[i].sha1;
            files += one.size();
            o.require(same, c.kind + (c.interaction ? " (interaction)" : "") + ": " + std::to_string(one.size()) +
                                " outputs identical for 1, 4, 4 threads");
        }
        o.summary = std::to_string(files) + " files compared";
    });

    emit(failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL");
    return failures == 0 ? 0 : 1;
}
