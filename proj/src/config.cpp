#include "elastic/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "elastic/errors.hpp"
#include "elastic/format.hpp"

namespace elastic {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* type) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a valid " + type);
}

double to_double(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    double d = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(d)) bad(key, v, "number");
    return d;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    std::int64_t i = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size()) bad(key, v, "integer");
    return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    std::uint64_t i = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size()) bad(key, v, "unsigned integer");
    return i;
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    if (s == "true") return true;
    if (s == "false") return false;
    bad(key, v, "boolean (true/false)");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
    std::vector<T> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(conv(key, item));
    return out;
}

template <class T, class F>
std::string from_list(const std::vector<T>& xs, F fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
    return s;
}

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define F_DOUBLE(sec, name, member)                                                                   \
    Field{sec, name, [](const ExperimentConfig& c) { return format_double(c.member); },              \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }}
#define F_INT(sec, name, member)                                                                      \
    Field{sec, name, [](const ExperimentConfig& c) { return std::to_string(c.member); },             \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {                      \
              const auto i = to_int(k, v);                                                            \
              if (i < std::numeric_limits<decltype(c.member)>::min() ||                               \
                  i > std::numeric_limits<decltype(c.member)>::max())                                 \
                  bad(k, v, "integer in range");                                                      \
              c.member = static_cast<decltype(c.member)>(i);                                          \
          }}
#define F_STRING(sec, name, member)                                                                   \
    Field{sec, name, [](const ExperimentConfig& c) { return c.member; },                             \
          [](ExperimentConfig& c, const std::string&, const std::string& v) { c.member = trim(v); }}
#define F_DLIST(sec, name, member)                                                                    \
    Field{sec, name, [](const ExperimentConfig& c) { return from_list(c.member, format_double); },   \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {                      \
              c.member = to_list<double>(k, v, to_double);                                            \
          }}
#define F_ILIST(sec, name, member)                                                                    \
    Field{sec, name,                                                                                  \
          [](const ExperimentConfig& c) {                                                             \
              return from_list(c.member, [](std::int64_t i) { return std::to_string(i); });           \
          },                                                                                          \
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {                      \
              c.member = to_list<std::int64_t>(k, v, to_int);                                         \
          }}

const std::vector<Field>& schema() {
    static const std::vector<Field> fields = {
        F_STRING("experiment", "kind", kind),
        Field{"experiment", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
        F_INT("experiment", "replications", replications),
        F_STRING("experiment", "output", output),

        F_STRING("coefficients", "mu", mu),
        F_STRING("coefficients", "sigma", sigma),
        F_STRING("coefficients", "rho", rho),
        F_DOUBLE("coefficients", "kappa", kappa),
        F_DOUBLE("coefficients", "bound_C", bound_C),
        F_DOUBLE("coefficients", "fd_step", fd_step),
        F_INT("coefficients", "validate_t_points", validate_t_points),
        F_INT("coefficients", "validate_x_points", validate_x_points),

        F_STRING("initial", "law", law),
        F_DLIST("initial", "tail_alpha", tail_alpha),

        F_INT("particles", "N", N),
        F_DOUBLE("particles", "T", T),
        F_DOUBLE("particles", "dt", dt),
        F_STRING("particles", "mode", mode),
        F_DLIST("particles", "snapshot_times", snapshot_times),
        F_ILIST("particles", "N_ladder", N_ladder),

        Field{"nonlinear", "interaction", [](const ExperimentConfig& c) { return std::string(c.interaction ? "true" : "false"); },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.interaction = to_bool(k, v); }},
        F_DOUBLE("nonlinear", "b", b),
        F_STRING("nonlinear", "shape", shape),
        F_DOUBLE("nonlinear", "clip", clip),
        F_DOUBLE("nonlinear", "lipschitz", lipschitz),
        F_INT("nonlinear", "probe_pairs", probe_pairs),

        F_DOUBLE("solver", "dx", dx),
        F_DOUBLE("solver", "dt", solver_dt),
        F_DOUBLE("solver", "x_max", x_max),
        F_DOUBLE("solver", "guard", guard),
        F_DOUBLE("solver", "tail_threshold", tail_threshold),

        F_DLIST("kernels", "eps", kernel_eps),
        F_DLIST("kernels", "kappa", kernel_kappa),
        F_INT("kernels", "points", kernel_points),
        F_INT("kernels", "contraction_trials", contraction_trials),
        F_DOUBLE("kernels", "fault_kappa_scale", fault_kappa_scale),

        F_DOUBLE("study", "bin", bin),
        F_DLIST("study", "eps_ladder", eps_ladder),
        F_DLIST("study", "kappa_ladder", kappa_ladder),
        F_DLIST("study", "compare_kappas", compare_kappas),
        F_DLIST("study", "tail_lambdas", tail_lambdas),
        F_DOUBLE("study", "spatial_a", spatial_a),
        F_DOUBLE("study", "spatial_delta", spatial_delta),
        F_DLIST("study", "pair_eps", pair_eps),
        F_DOUBLE("study", "pair_rho", pair_rho),
        F_DOUBLE("study", "pair_t", pair_t),
        F_INT("study", "pair_M", pair_M),
        F_DLIST("study", "test_lambdas", test_lambdas),
        F_DLIST("study", "check_times", check_times),
        F_INT("study", "kernel_every", kernel_every),
        F_DOUBLE("study", "weak_eps", weak_eps),
        F_DLIST("study", "loss_eps", loss_eps),
        F_DLIST("study", "spatial_widths", spatial_widths),
        F_INT("study", "ladder_replications", ladder_replications),
    };
    return fields;
}

void validate(const ExperimentConfig& c) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
        throw ConfigError("experiment.kind '" + c.kind + "' is not a known experiment");
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0)) throw ConfigError(std::string(name) + " must be >= 0");
    };
    if (c.replications < 1) throw ConfigError("experiment.replications must be >= 1");
    if (c.N < 1) throw ConfigError("particles.N must be >= 1");
    for (auto n : c.N_ladder)
        if (n < 1) throw ConfigError("particles.N_ladder entries must be >= 1");
    positive(c.T, "particles.T");
    positive(c.dt, "particles.dt");
    positive(c.dx, "solver.dx");
    nonneg(c.solver_dt, "solver.dt");
    nonneg(c.x_max, "solver.x_max");
    positive(c.guard, "solver.guard");
    positive(c.tail_threshold, "solver.tail_threshold");
    positive(c.bin, "study.bin");
    positive(c.pair_t, "study.pair_t");
    positive(c.weak_eps, "study.weak_eps");
    positive(c.clip, "nonlinear.clip");
    nonneg(c.lipschitz, "nonlinear.lipschitz");
    if (c.validate_t_points < 1 || c.validate_x_points < 1)
        throw ConfigError("coefficients.validate_t_points and validate_x_points must be >= 1");
    if (c.pair_M < 1) throw ConfigError("study.pair_M must be >= 1");
    if (c.kernel_points < 1 || c.contraction_trials < 0 || c.probe_pairs < 0 || c.kernel_every < 1)
        throw ConfigError("kernels.points, study.kernel_every must be >= 1 and trial counts >= 0");
    for (double e : c.kernel_eps) positive(e, "kernels.eps");
    for (double k : c.kernel_kappa) nonneg(k, "kernels.kappa");
    for (double e : c.eps_ladder) positive(e, "study.eps_ladder");
    for (double k : c.kappa_ladder) nonneg(k, "study.kappa_ladder");
    for (double k : c.compare_kappas) nonneg(k, "study.compare_kappas");
    for (double e : c.pair_eps) positive(e, "study.pair_eps");
    for (double l : c.test_lambdas) positive(l, "study.test_lambdas");
    for (double e : c.loss_eps) positive(e, "study.loss_eps");
    for (double w : c.spatial_widths) positive(w, "study.spatial_widths");
    if (c.ladder_replications < 2) throw ConfigError("study.ladder_replications must be >= 2");
    if (c.output.empty()) throw ConfigError("experiment.output must not be empty");
    if (!(std::abs(c.pair_rho) < 1.0)) throw ConfigError("study.pair_rho must lie in (-1, 1)");
    integral_steps(c.T, c.dt, "particles");
    for (double t : c.snapshot_times) {
        if (t < 0.0 || t > c.T * (1 + 1e-12)) throw ConfigError("particles.snapshot_times must lie in [0, T]");
        grid_index(t, c.dt);
    }
    if (c.kind == "convergence") {
        for (double t : c.check_times) {
            if (t < 0.0 || t > c.T * (1 + 1e-12)) throw ConfigError("study.check_times must lie in [0, T]");
            grid_index(t, c.dt);
        }
    }
    (void)c.coefficients();
    (void)c.initial_law();
    (void)c.nonlinear();
    parse_boundary_mode(c.mode);
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k = {"verify-kernels", "convergence", "class-lambda", "compare",
                                               "kappa-limits",   "mass-loss",   "simulate",     "solve"};
    return k;
}

CoefficientSet ExperimentConfig::coefficients() const {
    CoefficientSet c;
    c.mu = ScalarField::parse(mu);
    c.sigma = ScalarField::parse(sigma);
    c.rho = ScalarField::parse(rho);
    c.kappa = kappa;
    c.bound_C = bound_C;
    c.fd_step = fd_step;
    c.check_shape();
    return c;
}

InitialLaw ExperimentConfig::initial_law() const { return InitialLaw::parse(law); }

NonlinearDrift ExperimentConfig::nonlinear() const {
    NonlinearDrift d;
    d.enabled = interaction;
    d.b = b;
    d.shape = NonlinearDrift::parse_shape(shape);
    d.clip = clip;
    d.lipschitz_constant = lipschitz;
    return d;
}

SimConfig ExperimentConfig::sim_config() const {
    SimConfig s;
    s.N = static_cast<std::size_t>(N);
    s.T = T;
    s.dt = dt;
    s.mode = parse_boundary_mode(mode);
    s.snapshot_times = snapshot_times;
    s.nonlinear = nonlinear();
    return s;
}

ExperimentConfig parse_config(const std::string& text) {
    boost::property_tree::ptree pt;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    ExperimentConfig c;
    std::set<std::string> seen;
    for (const auto& [section, body] : pt) {
        if (body.empty())
            throw ConfigError("config key '" + section + "' must live inside a [section]");
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            const auto& fields = schema();
            const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) {
                return section == f.section && key == f.key;
            });
            if (it == fields.end()) throw ConfigError("unknown config key '" + full + "'");
            it->set(c, full, node.get_value<std::string>());
            seen.insert(full);
        }
    }
    // Canonical coefficient and law specs make serialization a fixed point.
    c.mu = ScalarField::parse(c.mu).spec();
    c.sigma = ScalarField::parse(c.sigma).spec();
    c.rho = ScalarField::parse(c.rho).spec();
    c.law = InitialLaw::parse(c.law).spec();
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    std::string current;
    for (const auto& f : schema()) {
        if (current != f.section) {
            if (!current.empty()) out += "\n";
            current = f.section;
            out += "[" + current + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(c) + "\n";
    }
    return out;
}

}  // namespace elastic
