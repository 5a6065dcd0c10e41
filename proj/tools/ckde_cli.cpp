// ckde: run experiments from a config file.
//
//   ckde rates --config configs/rates.cfg --threads 4
//   ckde band  --config configs/band.cfg --out results/band --seed 7
//
// Exit codes: 0 success, 1 config error, 2 runtime failure.

#include "ckde/harness/runner.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

using namespace ckde::harness;

int main(int argc, char** argv) {
    CLI::App app{"Kernel density experiments for cyclic long-memory processes"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;

    const std::vector<std::pair<std::string, ExperimentKind>> commands{
        {"simulate", ExperimentKind::simulate}, {"kde", ExperimentKind::kde_sup},
        {"band", ExperimentKind::band_coverage}, {"quantiles", ExperimentKind::quantiles},
        {"rates", ExperimentKind::rates},       {"mise", ExperimentKind::mise},
    };
    std::map<CLI::App*, ExperimentKind> kinds;
    for (const auto& [name, kind] : commands) {
        auto* sub = app.add_subcommand(name, "run a " + to_string(kind) + " experiment");
        sub->add_option("--config", config_path, "config file (section.key = value)")->required();
        sub->add_option("--seed", seed, "master seed, overrides experiment.seed");
        sub->add_option("--out", out_dir, "output directory, overrides experiment.output");
        sub->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
        kinds[sub] = kind;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    ExperimentKind kind{};
    for (const auto& [sub, k] : kinds)
        if (sub->parsed()) kind = k;

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path, kind);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.output = out_dir;
        if (threads) cfg.threads = *threads;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }

    try {
        const auto man = run(cfg);
        std::cout << to_string(cfg.kind) << " config " << man.config_hash.substr(0, 16) << " seed " << man.seed << " ("
                  << man.wall_clock_seconds << " s)\n";
        for (const auto& o : man.outputs)
            std::cout << "  " << o.role << (o.role == "quantile-table" ? (o.cached ? " [cached]" : " [fresh]") : "")
                      << "  " << o.path << "  " << o.sha256.substr(0, 16) << '\n';
        std::cout << "  manifest  " << (std::filesystem::path(cfg.output) / "manifest.json").string() << '\n';
    } catch (const RunFailure& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
