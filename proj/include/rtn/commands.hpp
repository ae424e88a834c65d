#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "rtn/levels_extractor.hpp"
#include "rtn/simulator.hpp"
#include "rtn/sources_mapper.hpp"

namespace rtn::cli {

/// Everything a run needs, assembled from defaults, an optional config file,
/// and command-line overrides (in that order).
struct RunConfig {
    std::string sim_mode = "benchmark";  ///< "benchmark" or "physical"
    sim::BenchmarkSimConfig benchmark;
    sim::PhysicalSimConfig physical;

    levels::ExtractorParams extractor;
    mapper::MapperParams mapper;

    std::uint64_t base_seed = 1;
    int workers = 1;
    std::filesystem::path out_dir;
    std::filesystem::path input;             ///< analyze: CSV file or directory;
                                             ///< evaluate: directory with manifest
    std::optional<double> sample_period;     ///< for value-only CSVs
};

/// Merges a parsed config document into `config`. Unknown sections or keys
/// are errors. Sections: [simulate], [extractor], [ap], [mapper], [run].
void apply_config(RunConfig& config, const nlohmann::json& document);

/// Range-checks every field a mode uses; throws std::runtime_error on the
/// first violation (the CLI maps that to exit code 2).
void validate_config(const RunConfig& config, const std::string& mode);

/// Hash over the parameters that determine analysis output content.
std::string analysis_config_hash(const RunConfig& config);
/// Hash that additionally pins the simulation settings and seed.
std::string bench_config_hash(const RunConfig& config);

int run_simulate(const RunConfig& config);
int run_analyze(const RunConfig& config);
int run_evaluate(const RunConfig& config);
int run_bench(const RunConfig& config);

}  // namespace rtn::cli
