#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "elastic/artifacts.hpp"
#include "elastic/config.hpp"
#include "elastic/errors.hpp"
#include "elastic/experiments.hpp"
#include "elastic/parallel.hpp"

using namespace elastic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("elastic_harness_" + std::to_string(::getpid())) / name;
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ELASTIC_SIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig tiny_simulate() {
    ExperimentConfig c;
    c.kind = "simulate";
    c.N = 2000;
    c.T = 0.2;
    c.dt = 0.01;
    c.snapshot_times = {0.0, 0.1, 0.2};
    return c;
}

}  // namespace

TEST_CASE("config round-trips through serialization") {
    ExperimentConfig c;
    CHECK(parse_config(serialize_config(c)) == c);
    c.kind = "compare";
    c.seed = 18446744073709551615ull;
    c.mu = "tanh-ramp -1 0.5 1 0.25";
    c.sigma = "expr 1 + 0.1*t*x";
    c.kernel_eps = {0.125, 1e-7};
    c.interaction = true;
    c.b = -0.3;
    c.output = "some dir";
    const auto back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("[particles]\nNN = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("N = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[particles]\nN = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[particles]\nN = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[particles]\ndt = 0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[particles]\nsnapshot_times = 0, 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nkind = party\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[coefficients]\nrho = expr x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[coefficients]\nmu = wobbly\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nonlinear]\ninteraction = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[particles\nN = 3\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/elastic.ini"), ConfigError);
    try {
        parse_config("[solver]\nwidth = 2\n");
        FAIL("no error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("solver.width") != std::string::npos);
    }
}

TEST_CASE("statistics helpers") {
    const auto m = mean_se({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(std::isnan(mean_se({1.0}).se));
    CHECK(ls_slope({1, 2, 3}, {2, 4, 6}) == doctest::Approx(2.0));
    // Exact power law y = 3 x^1.5 in every replication: slope exact, zero spread.
    std::vector<double> x{0.01, 0.02, 0.05, 0.1};
    std::vector<std::vector<double>> samples(10);
    for (auto& s : samples)
        for (double xi : x) s.push_back(3.0 * std::pow(xi, 1.5));
    const auto fit = jackknife_log_slope(x, samples);
    CHECK(fit.slope == doctest::Approx(1.5));
    CHECK(fit.se < 1e-12);
}

TEST_CASE("git blob hashes") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("verify-kernels passes, and names the corrupted identity") {
    ExperimentConfig c;
    c.kind = "verify-kernels";
    c.contraction_trials = 25;
    const Report ok = run_experiment(c);
    CHECK(ok.pass());
    c.fault_kappa_scale = 1.3;
    const Report bad = run_experiment(c);
    CHECK_FALSE(bad.pass());
    REQUIRE(bad.find("elastic boundary identity") != nullptr);
    CHECK_FALSE(bad.find("elastic boundary identity")->pass);
    CHECK(kernel_fault_scale() == 1.0);
    c.kernel_kappa = {0.0};
    CHECK(run_experiment(c).pass());
}

TEST_CASE("mass-loss refuses absorbing mode") {
    ExperimentConfig c = tiny_simulate();
    c.kind = "mass-loss";
    c.mode = "absorbing";
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("assumption violations are configuration errors") {
    ExperimentConfig c = tiny_simulate();
    c.mu = "affine 0 3 0";
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("artifacts are byte-identical across reruns and thread counts") {
    const ExperimentConfig c = tiny_simulate();
    const auto a = write_artifacts(run_experiment(c), c, scratch("a").string());
    std::vector<OutputFile> b;
    {
        ThreadLimit one(1);
        b = write_artifacts(run_experiment(c), c, scratch("b").string());
    }
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].sha1 == b[i].sha1);
    }
    CHECK(slurp(scratch("a") / "manifest.json") == slurp(scratch("b") / "manifest.json"));

    ExperimentConfig other = c;
    other.seed = 2;
    const auto d = write_artifacts(run_experiment(other), other, scratch("d").string());
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs = differs || (a[i].name == "loss.csv" && a[i].sha1 != d[i].sha1);
    CHECK(differs);
}

TEST_CASE("manifest lists every output with its hash") {
    const ExperimentConfig c = tiny_simulate();
    const fs::path dir = scratch("m");
    write_artifacts(run_experiment(c), c, dir.string());
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(j["kind"] == "simulate");
    CHECK(j["pass"] == true);
    CHECK(parse_config(j["config"].get<std::string>()) == c);
    CHECK(j["outputs"].size() >= 4);
    for (const auto& f : j["outputs"]) {
        const std::string name = f["file"];
        CHECK(fs::exists(dir / name));
        CHECK(f["git_blob_sha1"] == git_blob_sha1(slurp(dir / name)));
    }
}

TEST_CASE("CLI exit codes") {
    const fs::path dir = scratch("cli");
    const std::string out = " --out " + (dir / "o").string();
    {
        std::ofstream f(dir / "ok.ini");
        f << "[particles]\nN = 500\nT = 0.1\ndt = 0.01\nsnapshot_times = 0, 0.1\n";
    }
    CHECK(run_cli("simulate --config " + (dir / "ok.ini").string() + out) == 0);
    CHECK(run_cli("simulate --config " + (dir / "ok.ini").string() + " --threads 1 --seed 7" + out) == 0);
    {
        std::ofstream f(dir / "fault.ini");
        f << "[kernels]\ncontraction_trials = 5\nfault_kappa_scale = 1.5\n";
    }
    CHECK(run_cli("verify-kernels --config " + (dir / "fault.ini").string() + out) == 1);
    {
        std::ofstream f(dir / "typo.ini");
        f << "[particles]\nNx = 500\n";
    }
    CHECK(run_cli("simulate --config " + (dir / "typo.ini").string() + out) == 2);
    CHECK(run_cli("explode" + out) == 2);
    CHECK(run_cli("simulate --config " + (dir / "missing.ini").string() + out) == 2);
    {
        std::ofstream f(dir / "abort.ini");
        f << "[particles]\nN = 50\nT = 0.1\ndt = 0.01\nsnapshot_times = 0\n[coefficients]\nmu = expr 1e300 * x\n"
             "bound_C = 1e308\n";
    }
    CHECK(run_cli("simulate --config " + (dir / "abort.ini").string() + out) == 3);
}
