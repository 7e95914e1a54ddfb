#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "elastic/artifacts.hpp"
#include "elastic/config.hpp"
#include "elastic/errors.hpp"
#include "elastic/experiments.hpp"
#include "elastic/parallel.hpp"

namespace {

constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Elastic-boundary particle system, SPDE solver and verification suites"};
    app.require_subcommand(1);
    Options opt;
    for (const auto& kind : elastic::experiment_kinds()) {
        auto* sub = app.add_subcommand(kind, "run the " + kind + " suite");
        sub->add_option("--config", opt.config, "INI config file (defaults apply when omitted)");
        sub->add_option("--seed", opt.seed, "master seed, overrides experiment.seed");
        sub->add_option("--out", opt.out, "output directory, overrides experiment.output");
        sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    const std::string kind = app.get_subcommands().front()->get_name();

    try {
        elastic::ExperimentConfig cfg = opt.config.empty() ? elastic::ExperimentConfig{} : elastic::load_config(opt.config);
        cfg.kind = kind;
        if (opt.seed) cfg.seed = *opt.seed;
        if (!opt.out.empty()) cfg.output = opt.out;
        cfg = elastic::parse_config(elastic::serialize_config(cfg));

        std::optional<elastic::ThreadLimit> limit;
        if (opt.threads > 0) limit.emplace(opt.threads);
        const elastic::Report report = elastic::run_experiment(cfg);
        elastic::write_artifacts(report, cfg, cfg.output);
        std::cout << elastic::summary_text(report);
        return report.pass() ? 0 : kExitFail;
    } catch (const elastic::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const elastic::NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
}
