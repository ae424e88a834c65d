#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rtn/commands.hpp"
#include "rtn/toml_lite.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out;
    std::string in;
    std::optional<double> sample_period;
    std::optional<double> p_threshold;
    std::optional<int> continuity;
    std::optional<int> sigma_grid;
    std::optional<double> violation_tolerance;
    std::optional<double> mismatch_tolerance;
    std::optional<std::int64_t> candidate_cap;
};

int dispatch(const std::string& mode, const Flags& flags) {
    rtn::cli::RunConfig config;
    try {
        if (!flags.config_path.empty()) {
            rtn::cli::apply_config(config, rtn::io::read_config_file(flags.config_path));
        }
        if (flags.seed) config.base_seed = *flags.seed;
        if (flags.workers) config.workers = *flags.workers;
        if (!flags.out.empty()) config.out_dir = flags.out;
        if (!flags.in.empty()) config.input = flags.in;
        if (flags.sample_period) config.sample_period = *flags.sample_period;
        if (flags.p_threshold) config.extractor.p_threshold = *flags.p_threshold;
        if (flags.continuity) config.extractor.continuity = *flags.continuity;
        if (flags.sigma_grid) config.extractor.sigma_grid_size = *flags.sigma_grid;
        if (flags.violation_tolerance) {
            config.mapper.tolerances.violation_tolerance = *flags.violation_tolerance;
        }
        if (flags.mismatch_tolerance) {
            config.mapper.tolerances.mismatch_tolerance = *flags.mismatch_tolerance;
        }
        if (flags.candidate_cap) config.mapper.candidate_cap = *flags.candidate_cap;
        rtn::cli::validate_config(config, mode);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        if (mode == "simulate") return rtn::cli::run_simulate(config);
        if (mode == "analyze") return rtn::cli::run_analyze(config);
        if (mode == "evaluate") return rtn::cli::run_evaluate(config);
        return rtn::cli::run_bench(config);
    } catch (const std::exception& e) {
        std::cerr << mode << ": error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RTN toolkit: simulate, deconvolve, and score random telegraph signals"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rtn 0.1.0");

    Flags flags;
    auto add_common = [&](CLI::App* cmd, bool analysis, bool seeded) {
        cmd->add_option("--config", flags.config_path,
                        "TOML or JSON config file (sections simulate/extractor/ap/mapper/run)");
        cmd->add_option("--workers", flags.workers, "worker threads (default 1)");
        cmd->add_option("--out", flags.out, "output directory");
        if (seeded) cmd->add_option("--seed", flags.seed, "base RNG seed");
        if (analysis) {
            cmd->add_option("--p-threshold", flags.p_threshold,
                            "level-detection posterior threshold");
            cmd->add_option("--continuity", flags.continuity,
                            "samples required to confirm a level change");
            cmd->add_option("--sigma-grid", flags.sigma_grid, "noise-scale grid size");
            cmd->add_option("--violation-tolerance", flags.violation_tolerance,
                            "multi-source-flip fraction where the violation metric saturates");
            cmd->add_option("--mismatch-tolerance", flags.mismatch_tolerance,
                            "mean sigma-distance where the mismatch metric saturates");
            cmd->add_option("--candidate-cap", flags.candidate_cap,
                            "max amplitude combinations per hypothesis");
        }
    };

    auto* simulate = app.add_subcommand("simulate", "generate labeled RTN datasets");
    add_common(simulate, false, true);

    auto* analyze = app.add_subcommand("analyze", "deconvolve RTN signal CSVs into sources");
    add_common(analyze, true, false);
    analyze->add_option("--in", flags.in, "signal CSV file or directory of them");
    analyze->add_option("--sample-period", flags.sample_period,
                        "sample period for value-only CSVs");

    auto* evaluate = app.add_subcommand("evaluate", "score results against ground truth");
    add_common(evaluate, false, false);
    evaluate->add_option("--in", flags.in, "directory with manifest.json, truth and results");

    auto* bench = app.add_subcommand("bench", "simulate + analyze + evaluate in one run");
    add_common(bench, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage problems are config errors
    }

    if (app.got_subcommand(simulate)) return dispatch("simulate", flags);
    if (app.got_subcommand(analyze)) return dispatch("analyze", flags);
    if (app.got_subcommand(evaluate)) return dispatch("evaluate", flags);
    return dispatch("bench", flags);
}
