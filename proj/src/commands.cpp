#include "rtn/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rtn/evaluation.hpp"
#include "rtn/parallel.hpp"
#include "rtn/serialize.hpp"

namespace rtn::cli {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& what) {
    throw std::runtime_error(what);
}

double get_double(const nlohmann::json& value, const std::string& key) {
    if (!value.is_number()) config_error("config key '" + key + "' must be a number");
    return value.get<double>();
}

std::int64_t get_int(const nlohmann::json& value, const std::string& key) {
    if (!value.is_number_integer()) {
        config_error("config key '" + key + "' must be an integer");
    }
    return value.get<std::int64_t>();
}

std::uint64_t get_uint(const nlohmann::json& value, const std::string& key) {
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(value.get<std::int64_t>());
    }
    config_error("config key '" + key + "' must be a non-negative integer");
}

std::string get_string(const nlohmann::json& value, const std::string& key) {
    if (!value.is_string()) config_error("config key '" + key + "' must be a string");
    return value.get<std::string>();
}

std::vector<double> get_double_array(const nlohmann::json& value, const std::string& key) {
    if (!value.is_array()) config_error("config key '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& item : value) out.push_back(get_double(item, key));
    return out;
}

std::vector<int> get_int_array(const nlohmann::json& value, const std::string& key) {
    if (!value.is_array()) config_error("config key '" + key + "' must be an array");
    std::vector<int> out;
    for (const auto& item : value) out.push_back(static_cast<int>(get_int(item, key)));
    return out;
}

void apply_simulate(RunConfig& config, const nlohmann::json& section) {
    for (const auto& [key, value] : section.items()) {
        const std::string context = "simulate." + key;
        if (key == "mode") {
            config.sim_mode = get_string(value, context);
        } else if (key == "source_counts") {
            config.benchmark.source_counts = get_int_array(value, context);
        } else if (key == "datasets_per_count") {
            config.benchmark.datasets_per_count = static_cast<int>(get_int(value, context));
        } else if (key == "noise_levels") {
            config.benchmark.noise_levels = get_double_array(value, context);
        } else if (key == "duration") {
            config.benchmark.duration = config.physical.duration = get_double(value, context);
        } else if (key == "sample_rate") {
            config.benchmark.sample_rate = config.physical.sample_rate =
                get_double(value, context);
        } else if (key == "baseline") {
            config.benchmark.baseline = config.physical.baseline = get_double(value, context);
        } else if (key == "poisson_mean_sources") {
            config.physical.poisson_mean_sources = get_double(value, context);
        } else if (key == "amplitude_min") {
            config.physical.amplitude_min = get_double(value, context);
        } else if (key == "amplitude_max") {
            config.physical.amplitude_max = get_double(value, context);
        } else if (key == "dwell_log_mean") {
            config.physical.dwell_log_mean = get_double(value, context);
        } else if (key == "dwell_log_sd") {
            config.physical.dwell_log_sd = get_double(value, context);
        } else if (key == "noise_fraction") {
            config.physical.noise_fraction = get_double(value, context);
        } else if (key == "n_datasets") {
            config.physical.n_datasets = get_int(value, context);
        } else {
            config_error("unknown config key '" + context + "'");
        }
    }
}

void apply_extractor(RunConfig& config, const nlohmann::json& section) {
    for (const auto& [key, value] : section.items()) {
        const std::string context = "extractor." + key;
        if (key == "p_threshold") {
            config.extractor.p_threshold = get_double(value, context);
        } else if (key == "continuity") {
            config.extractor.continuity = static_cast<int>(get_int(value, context));
        } else if (key == "sigma_grid_size") {
            config.extractor.sigma_grid_size = static_cast<int>(get_int(value, context));
        } else if (key == "sigma_upper_percentile") {
            config.extractor.sigma_upper_percentile = get_double(value, context);
        } else if (key == "new_level_likelihood") {
            config.extractor.new_level_likelihood = get_double(value, context);
        } else {
            config_error("unknown config key '" + context + "'");
        }
    }
}

void apply_ap(RunConfig& config, const nlohmann::json& section) {
    for (const auto& [key, value] : section.items()) {
        const std::string context = "ap." + key;
        if (key == "damping") {
            config.mapper.ap.damping = get_double(value, context);
        } else if (key == "max_iterations") {
            config.mapper.ap.max_iterations = static_cast<int>(get_int(value, context));
        } else if (key == "convergence_window") {
            config.mapper.ap.convergence_window = static_cast<int>(get_int(value, context));
        } else if (key == "preference_quantiles") {
            config.mapper.ap.preference_quantiles = get_double_array(value, context);
        } else {
            config_error("unknown config key '" + context + "'");
        }
    }
}

void apply_mapper(RunConfig& config, const nlohmann::json& section) {
    for (const auto& [key, value] : section.items()) {
        const std::string context = "mapper." + key;
        if (key == "violation_tolerance") {
            config.mapper.tolerances.violation_tolerance = get_double(value, context);
        } else if (key == "mismatch_tolerance") {
            config.mapper.tolerances.mismatch_tolerance = get_double(value, context);
        } else if (key == "candidate_cap") {
            config.mapper.candidate_cap = get_int(value, context);
        } else if (key == "max_extra_sources") {
            config.mapper.max_extra_sources = static_cast<int>(get_int(value, context));
        } else {
            config_error("unknown config key '" + context + "'");
        }
    }
}

void apply_run(RunConfig& config, const nlohmann::json& section) {
    for (const auto& [key, value] : section.items()) {
        const std::string context = "run." + key;
        if (key == "seed") {
            config.base_seed = get_uint(value, context);
        } else if (key == "workers") {
            config.workers = static_cast<int>(get_int(value, context));
        } else if (key == "out") {
            config.out_dir = get_string(value, context);
        } else if (key == "input") {
            config.input = get_string(value, context);
        } else if (key == "sample_period") {
            config.sample_period = get_double(value, context);
        } else {
            config_error("unknown config key '" + context + "'");
        }
    }
}

nlohmann::json analysis_json(const RunConfig& config) {
    return nlohmann::json{
        {"extractor",
         {{"p_threshold", config.extractor.p_threshold},
          {"continuity", config.extractor.continuity},
          {"sigma_grid_size", config.extractor.sigma_grid_size},
          {"sigma_upper_percentile", config.extractor.sigma_upper_percentile},
          {"new_level_likelihood", config.extractor.new_level_likelihood}}},
        {"ap",
         {{"damping", config.mapper.ap.damping},
          {"max_iterations", config.mapper.ap.max_iterations},
          {"convergence_window", config.mapper.ap.convergence_window},
          {"preference_quantiles", config.mapper.ap.preference_quantiles}}},
        {"mapper",
         {{"violation_tolerance", config.mapper.tolerances.violation_tolerance},
          {"mismatch_tolerance", config.mapper.tolerances.mismatch_tolerance},
          {"candidate_cap", config.mapper.candidate_cap},
          {"max_extra_sources", config.mapper.max_extra_sources}}}};
}

nlohmann::json simulate_json(const RunConfig& config) {
    if (config.sim_mode == "physical") {
        return nlohmann::json{{"mode", "physical"},
                              {"poisson_mean_sources", config.physical.poisson_mean_sources},
                              {"amplitude_min", config.physical.amplitude_min},
                              {"amplitude_max", config.physical.amplitude_max},
                              {"dwell_log_mean", config.physical.dwell_log_mean},
                              {"dwell_log_sd", config.physical.dwell_log_sd},
                              {"duration", config.physical.duration},
                              {"sample_rate", config.physical.sample_rate},
                              {"noise_fraction", config.physical.noise_fraction},
                              {"baseline", config.physical.baseline},
                              {"n_datasets", config.physical.n_datasets}};
    }
    return nlohmann::json{{"mode", "benchmark"},
                          {"source_counts", config.benchmark.source_counts},
                          {"datasets_per_count", config.benchmark.datasets_per_count},
                          {"noise_levels", config.benchmark.noise_levels},
                          {"duration", config.benchmark.duration},
                          {"sample_rate", config.benchmark.sample_rate},
                          {"baseline", config.benchmark.baseline}};
}

std::string describe_error(const std::exception& e) {
    if (dynamic_cast<const DegenerateSignal*>(&e)) {
        return std::string("DegenerateSignal: ") + e.what();
    }
    if (dynamic_cast<const EmptyInput*>(&e)) {
        return std::string("EmptyInput: ") + e.what();
    }
    return e.what();
}

std::int64_t parse_dataset_id(const std::string& filename) {
    const std::string prefix = "signal_";
    const std::string suffix = ".csv";
    if (filename.size() <= prefix.size() + suffix.size()) return -1;
    if (filename.compare(0, prefix.size(), prefix) != 0) return -1;
    if (filename.compare(filename.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return -1;
    }
    const auto digits =
        filename.substr(prefix.size(), filename.size() - prefix.size() - suffix.size());
    if (digits.empty()) return -1;
    std::int64_t id = 0;
    for (char c : digits) {
        if (c < '0' || c > '9') return -1;
        id = id * 10 + (c - '0');
    }
    return id;
}

io::ResultDocument analyze_signal(const Signal& signal, std::string input,
                                  std::int64_t dataset_id, const RunConfig& config,
                                  int workers) {
    const auto model = levels::extract(signal, config.extractor, workers);
    const auto outcome = mapper::map_sources(model, config.mapper, workers);
    return io::make_result(std::move(input), dataset_id, model, outcome);
}

std::string result_file_for(const io::ResultDocument& result) {
    if (result.dataset_id >= 0) return io::dataset_result_name(result.dataset_id);
    return "result_" + fs::path(result.input).stem().string() + ".json";
}

std::string percent(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.1f%%", value);
    return buffer;
}

void print_yield_table(const eval::EvaluationReport& report) {
    std::cout << "noise_level  datasets             sources\n";
    for (const auto& yield : report.yields) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %lld/%lld (%s)  %lld/%lld (%s)",
                      io::format_double(yield.noise_level).c_str(),
                      static_cast<long long>(yield.datasets_converged),
                      static_cast<long long>(yield.datasets_total),
                      percent(yield.dataset_yield_pct).c_str(),
                      static_cast<long long>(yield.sources_detected),
                      static_cast<long long>(yield.sources_true_total),
                      percent(yield.source_yield_pct).c_str());
        std::cout << line << "\n";
    }
}

/// Writes signals and per-base truth documents; returns the manifest.
/// With `resume`, existing files are kept (they were produced by the same
/// config hash, and generation is pure).
io::Manifest simulate_outputs(const RunConfig& config, const fs::path& out_dir,
                              const std::string& hash, bool resume) {
    io::Manifest manifest;
    manifest.config_hash = hash;
    manifest.base_seed = config.base_seed;

    if (config.sim_mode == "physical") {
        manifest.sample_period = 1.0 / config.physical.sample_rate;
        const auto n = config.physical.n_datasets;
        manifest.entries.resize(static_cast<std::size_t>(n));
        parallel_for(n, config.workers, [&](std::int64_t i) {
            const auto dataset = sim::generate_physical(config.physical, config.base_seed, i);
            const auto signal_file = io::dataset_signal_name(i);
            const auto truth_file = io::truth_file_name(i);
            if (!resume || !fs::exists(out_dir / signal_file)) {
                io::write_signal_csv(out_dir / signal_file, dataset.signal);
            }
            if (!resume || !fs::exists(out_dir / truth_file)) {
                io::TruthDocument truth;
                truth.base_id = i;
                truth.baseline = dataset.baseline;
                truth.sample_period = dataset.signal.sample_period;
                truth.n_samples = static_cast<std::int64_t>(dataset.signal.values.size());
                truth.sources = dataset.sources;
                truth.activities = dataset.activities;
                truth.renditions = {{i, dataset.noise_level, dataset.noise_sigma, signal_file}};
                io::write_json_file(out_dir / truth_file, io::truth_to_json(truth));
            }
            manifest.entries[static_cast<std::size_t>(i)] = {i, i, dataset.noise_level,
                                                             signal_file, truth_file};
        });
        return manifest;
    }

    const sim::BenchmarkSuite suite(config.benchmark, config.base_seed);
    manifest.sample_period = 1.0 / config.benchmark.sample_rate;
    const auto n = suite.size();
    const auto n_levels = suite.noise_level_count();
    manifest.entries.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto base = i / n_levels;
        manifest.entries[static_cast<std::size_t>(i)] = {
            i, base, config.benchmark.noise_levels[static_cast<std::size_t>(i % n_levels)],
            io::dataset_signal_name(i), io::truth_file_name(base)};
    }
    parallel_for(n, config.workers, [&](std::int64_t i) {
        const auto path = out_dir / manifest.entries[static_cast<std::size_t>(i)].signal_file;
        if (resume && fs::exists(path)) return;
        io::write_signal_csv(path, suite.generate(i).signal);
    });
    parallel_for(suite.base_count(), config.workers, [&](std::int64_t base) {
        const auto path = out_dir / io::truth_file_name(base);
        if (resume && fs::exists(path)) return;
        // One rendition carries the shared sources, activities, and baseline;
        // the benchmark noise sigma equals the configured level.
        const auto dataset = suite.generate(base * n_levels);
        io::TruthDocument truth;
        truth.base_id = base;
        truth.baseline = dataset.baseline;
        truth.sample_period = dataset.signal.sample_period;
        truth.n_samples = static_cast<std::int64_t>(dataset.signal.values.size());
        truth.sources = dataset.sources;
        truth.activities = dataset.activities;
        for (std::int64_t j = 0; j < n_levels; ++j) {
            const double level = config.benchmark.noise_levels[static_cast<std::size_t>(j)];
            truth.renditions.push_back(
                {base * n_levels + j, level, level, io::dataset_signal_name(base * n_levels + j)});
        }
        io::write_json_file(path, io::truth_to_json(truth));
    });
    return manifest;
}

/// Joins manifest entries with result files in `dir`, scores them, and writes
/// report.json plus the plot CSVs into `out_dir`. Unmatched or unreadable
/// datasets are reported on stderr and skipped.
int evaluate_outputs(const RunConfig& config, const fs::path& dir, const io::Manifest& manifest,
                     const fs::path& out_dir) {
    std::map<std::int64_t, io::TruthDocument> truths;
    std::map<std::int64_t, std::string> bad_bases;
    for (const auto& entry : manifest.entries) {
        if (truths.count(entry.base_id) || bad_bases.count(entry.base_id)) continue;
        try {
            truths[entry.base_id] =
                io::truth_from_json(io::read_json_file(dir / entry.truth_file));
        } catch (const std::exception& e) {
            bad_bases[entry.base_id] = e.what();
        }
    }

    const auto n = static_cast<std::int64_t>(manifest.entries.size());
    std::vector<eval::DatasetScore> slots(static_cast<std::size_t>(n));
    std::vector<std::string> skipped(static_cast<std::size_t>(n));
    parallel_for(n, config.workers, [&](std::int64_t i) {
        const auto& entry = manifest.entries[static_cast<std::size_t>(i)];
        auto& skip_reason = skipped[static_cast<std::size_t>(i)];
        if (auto it = bad_bases.find(entry.base_id); it != bad_bases.end()) {
            skip_reason = "truth unreadable: " + it->second;
            return;
        }
        const auto result_path = dir / io::dataset_result_name(entry.dataset_id);
        if (!fs::exists(result_path)) {
            skip_reason = "no result file";
            return;
        }
        try {
            const auto result = io::result_from_json(io::read_json_file(result_path));
            const auto& truth_doc = truths.at(entry.base_id);
            eval::TruthRecord truth;
            truth.dataset_id = entry.dataset_id;
            truth.noise_level = entry.noise_level;
            truth.sample_period = truth_doc.sample_period;
            truth.sources = truth_doc.sources;
            truth.activities = truth_doc.activities;
            eval::EstimateRecord estimate;
            estimate.converged = result.status == "ok";
            if (result.solution) {
                estimate.amplitudes = result.solution->amplitudes;
                estimate.traces = result.solution->traces;
            }
            slots[static_cast<std::size_t>(i)] = eval::score_dataset(truth, estimate);
        } catch (const std::exception& e) {
            skip_reason = e.what();
        }
    });

    std::vector<eval::DatasetScore> scores;
    std::int64_t n_skipped = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (skipped[static_cast<std::size_t>(i)].empty()) {
            scores.push_back(std::move(slots[static_cast<std::size_t>(i)]));
        } else {
            ++n_skipped;
            std::cerr << "evaluate: skipping dataset "
                      << manifest.entries[static_cast<std::size_t>(i)].dataset_id << " ("
                      << skipped[static_cast<std::size_t>(i)] << ")\n";
        }
    }
    if (scores.empty()) {
        std::cerr << "evaluate: warning: no datasets could be joined with results\n";
    }

    const auto report = eval::aggregate(scores);
    io::write_json_file(out_dir / "report.json", io::report_to_json(report));
    io::write_report_csvs(out_dir, report);
    std::cout << "evaluate: " << scores.size() << " datasets scored";
    if (n_skipped > 0) std::cout << ", " << n_skipped << " skipped";
    std::cout << "\n";
    print_yield_table(report);
    std::cout << "report: " << (out_dir / "report.json").string() << "\n";
    return 0;
}

}  // namespace

void apply_config(RunConfig& config, const nlohmann::json& document) {
    if (!document.is_object()) config_error("config root must be a table/object");
    for (const auto& [key, value] : document.items()) {
        if (!value.is_object()) {
            config_error("config section '" + key + "' must be a table/object");
        }
        if (key == "simulate") {
            apply_simulate(config, value);
        } else if (key == "extractor") {
            apply_extractor(config, value);
        } else if (key == "ap") {
            apply_ap(config, value);
        } else if (key == "mapper") {
            apply_mapper(config, value);
        } else if (key == "run") {
            apply_run(config, value);
        } else {
            config_error("unknown config section '" + key + "'");
        }
    }
}

void validate_config(const RunConfig& config, const std::string& mode) {
    if (config.workers < 1) config_error("workers must be >= 1");

    const bool needs_analysis = mode == "analyze" || mode == "bench";
    const bool needs_sim = mode == "simulate" || mode == "bench";

    if (needs_analysis) {
        const auto& e = config.extractor;
        if (!(e.p_threshold > 0.0) || !(e.p_threshold < 1.0)) {
            config_error("extractor.p_threshold must be in (0, 1)");
        }
        if (e.continuity < 1) config_error("extractor.continuity must be >= 1");
        if (e.sigma_grid_size < 1) config_error("extractor.sigma_grid_size must be >= 1");
        if (!(e.sigma_upper_percentile > 50.0) || e.sigma_upper_percentile > 100.0) {
            config_error("extractor.sigma_upper_percentile must be in (50, 100]");
        }
        if (!(e.new_level_likelihood > 0.0) || !(e.new_level_likelihood < 1.0)) {
            config_error("extractor.new_level_likelihood must be in (0, 1)");
        }
        const auto& a = config.mapper.ap;
        if (!(a.damping >= 0.5) || !(a.damping < 1.0)) {
            config_error("ap.damping must be in [0.5, 1)");
        }
        if (a.max_iterations < 1) config_error("ap.max_iterations must be >= 1");
        if (a.convergence_window < 1) config_error("ap.convergence_window must be >= 1");
        if (a.preference_quantiles.empty()) {
            config_error("ap.preference_quantiles must not be empty");
        }
        for (double q : a.preference_quantiles) {
            if (!(q >= 0.0) || !(q <= 1.0)) {
                config_error("ap.preference_quantiles entries must be in [0, 1]");
            }
        }
        const auto& m = config.mapper;
        if (!(m.tolerances.violation_tolerance > 0.0)) {
            config_error("mapper.violation_tolerance must be > 0");
        }
        if (!(m.tolerances.mismatch_tolerance > 0.0)) {
            config_error("mapper.mismatch_tolerance must be > 0");
        }
        if (m.candidate_cap < 1) config_error("mapper.candidate_cap must be >= 1");
        if (m.max_extra_sources < 0) config_error("mapper.max_extra_sources must be >= 0");
    }

    if (needs_sim) {
        if (config.sim_mode != "benchmark" && config.sim_mode != "physical") {
            config_error("simulate.mode must be 'benchmark' or 'physical'");
        }
        if (config.sim_mode == "benchmark") {
            const auto& b = config.benchmark;
            if (b.source_counts.empty()) config_error("simulate.source_counts is empty");
            for (int count : b.source_counts) {
                if (count < 1 || count > 20) {
                    config_error("simulate.source_counts entries must be in [1, 20]");
                }
            }
            if (b.datasets_per_count < 1) {
                config_error("simulate.datasets_per_count must be >= 1");
            }
            if (b.noise_levels.empty()) config_error("simulate.noise_levels is empty");
            for (double level : b.noise_levels) {
                if (!(level > 0.0)) config_error("simulate.noise_levels entries must be > 0");
            }
            if (!(b.duration > 0.0)) config_error("simulate.duration must be > 0");
            if (!(b.sample_rate > 0.0)) config_error("simulate.sample_rate must be > 0");
        } else {
            const auto& p = config.physical;
            if (!(p.poisson_mean_sources > 0.0)) {
                config_error("simulate.poisson_mean_sources must be > 0");
            }
            if (!(p.amplitude_min > 0.0) || !(p.amplitude_max > p.amplitude_min)) {
                config_error("simulate amplitude range must satisfy 0 < min < max");
            }
            if (!(p.dwell_log_sd >= 0.0)) config_error("simulate.dwell_log_sd must be >= 0");
            if (!(p.noise_fraction > 0.0)) config_error("simulate.noise_fraction must be > 0");
            if (p.n_datasets < 1) config_error("simulate.n_datasets must be >= 1");
            if (!(p.duration > 0.0)) config_error("simulate.duration must be > 0");
            if (!(p.sample_rate > 0.0)) config_error("simulate.sample_rate must be > 0");
        }
    }

    if (mode == "simulate" || mode == "bench") {
        if (config.out_dir.empty()) config_error("output directory required (--out)");
    }
    if (mode == "analyze") {
        if (config.input.empty()) config_error("input path required (--in)");
        if (!fs::exists(config.input)) {
            config_error("input path does not exist: " + config.input.string());
        }
        if (config.out_dir.empty()) config_error("output directory required (--out)");
        if (config.sample_period && !(*config.sample_period > 0.0)) {
            config_error("sample period must be > 0");
        }
    }
    if (mode == "evaluate") {
        if (config.input.empty()) config_error("input directory required (--in)");
        if (!fs::is_directory(config.input)) {
            config_error("input must be a directory with manifest.json: " +
                         config.input.string());
        }
    }
}

std::string analysis_config_hash(const RunConfig& config) {
    return io::fnv1a_hex(analysis_json(config).dump());
}

std::string bench_config_hash(const RunConfig& config) {
    auto document = analysis_json(config);
    document["simulate"] = simulate_json(config);
    document["seed"] = config.base_seed;
    return io::fnv1a_hex(document.dump());
}

int run_simulate(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    const auto hash = bench_config_hash(config);
    const auto manifest = simulate_outputs(config, config.out_dir, hash, false);
    io::write_json_file(config.out_dir / "manifest.json", io::manifest_to_json(manifest));
    std::cout << "simulate: " << manifest.entries.size() << " datasets -> "
              << config.out_dir.string() << "\n";
    std::cout << "manifest: config " << hash << "\n";
    return 0;
}

int run_analyze(const RunConfig& config) {
    std::vector<fs::path> inputs;
    if (fs::is_directory(config.input)) {
        for (const auto& entry : fs::directory_iterator(config.input)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                inputs.push_back(entry.path());
            }
        }
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) {
            std::cerr << "analyze: no .csv files in " << config.input.string() << "\n";
            return 2;
        }
    } else {
        inputs.push_back(config.input);
    }
    fs::create_directories(config.out_dir);
    const auto hash = analysis_config_hash(config);

    const auto n = static_cast<std::int64_t>(inputs.size());
    const int outer = n == 1 ? 1 : config.workers;
    const int inner = n == 1 ? config.workers : 1;
    std::vector<std::string> lines(static_cast<std::size_t>(n));
    std::vector<char> failed(static_cast<std::size_t>(n), 0);
    parallel_for(n, outer, [&](std::int64_t i) {
        const auto& path = inputs[static_cast<std::size_t>(i)];
        const auto name = path.filename().string();
        const auto dataset_id = parse_dataset_id(name);
        io::ResultDocument result;
        try {
            const auto signal = io::read_signal_csv(path, config.sample_period);
            result = analyze_signal(signal, name, dataset_id, config, inner);
        } catch (const std::exception& e) {
            result = io::make_error_result(name, dataset_id, describe_error(e));
            failed[static_cast<std::size_t>(i)] = 1;
        }
        result.config_hash = hash;
        io::write_json_file(config.out_dir / result_file_for(result),
                            io::result_to_json(result));
        std::string line = name + ": " + result.status;
        if (result.solution) {
            line += " (N=" + std::to_string(result.solution->amplitudes.size()) + ")";
        } else if (result.failure) {
            line += " (" + result.failure->reason + ")";
        } else if (!result.error.empty()) {
            line += " (" + result.error + ")";
        }
        lines[static_cast<std::size_t>(i)] = std::move(line);
    });

    std::int64_t n_failed = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (n <= 50) std::cout << lines[static_cast<std::size_t>(i)] << "\n";
        n_failed += failed[static_cast<std::size_t>(i)];
    }
    std::cout << "analyze: " << (n - n_failed) << "/" << n << " inputs analyzed, " << n_failed
              << " errors -> " << config.out_dir.string() << "\n";
    return (n_failed == n) ? 1 : 0;
}

int run_evaluate(const RunConfig& config) {
    const auto out_dir = config.out_dir.empty() ? config.input : config.out_dir;
    fs::create_directories(out_dir);
    const auto manifest =
        io::manifest_from_json(io::read_json_file(config.input / "manifest.json"));
    return evaluate_outputs(config, config.input, manifest, out_dir);
}

int run_bench(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    const auto hash = bench_config_hash(config);
    const auto manifest_path = config.out_dir / "manifest.json";
    bool resume = false;
    if (fs::exists(manifest_path)) {
        const auto previous = io::manifest_from_json(io::read_json_file(manifest_path));
        if (previous.config_hash != hash) {
            std::cerr << "bench: " << config.out_dir.string()
                      << " holds results for config " << previous.config_hash
                      << " but this run is config " << hash
                      << "; refusing to mix (use a fresh --out directory)\n";
            return 2;
        }
        resume = true;
    }

    const auto manifest = simulate_outputs(config, config.out_dir, hash, resume);
    io::write_json_file(manifest_path, io::manifest_to_json(manifest));
    std::cout << "simulate: " << manifest.entries.size() << " datasets"
              << (resume ? " (resuming)" : "") << "\n";

    const auto n = static_cast<std::int64_t>(manifest.entries.size());
    std::vector<char> reused(static_cast<std::size_t>(n), 0);
    std::vector<std::string> stale(static_cast<std::size_t>(n));
    parallel_for(n, config.workers, [&](std::int64_t i) {
        const auto& entry = manifest.entries[static_cast<std::size_t>(i)];
        const auto result_path = config.out_dir / io::dataset_result_name(entry.dataset_id);
        if (fs::exists(result_path)) {
            const auto existing = io::result_from_json(io::read_json_file(result_path));
            if (existing.config_hash == hash) {
                reused[static_cast<std::size_t>(i)] = 1;
                return;
            }
            stale[static_cast<std::size_t>(i)] = existing.config_hash;
            return;
        }
        io::ResultDocument result;
        try {
            const auto signal =
                io::read_signal_csv(config.out_dir / entry.signal_file, std::nullopt);
            result = analyze_signal(signal, entry.signal_file, entry.dataset_id, config, 1);
        } catch (const std::exception& e) {
            result = io::make_error_result(entry.signal_file, entry.dataset_id,
                                           describe_error(e));
        }
        result.config_hash = hash;
        io::write_json_file(result_path, io::result_to_json(result));
    });
    std::int64_t n_reused = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!stale[static_cast<std::size_t>(i)].empty()) {
            std::cerr << "bench: result for dataset "
                      << manifest.entries[static_cast<std::size_t>(i)].dataset_id
                      << " was produced by config " << stale[static_cast<std::size_t>(i)]
                      << ", not " << hash << "; refusing stale results\n";
            return 2;
        }
        n_reused += reused[static_cast<std::size_t>(i)];
    }
    std::cout << "analyze: " << (n - n_reused) << " analyzed, " << n_reused << " reused\n";

    return evaluate_outputs(config, config.out_dir, manifest, config.out_dir);
}

}  // namespace rtn::cli
