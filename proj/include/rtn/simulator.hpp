#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rtn/core.hpp"

namespace rtn::sim {

/// Device-like regime: source count is Poisson, dwell means are log-normal,
/// noise scales with the summed amplitude of the drawn sources.
struct PhysicalSimConfig {
    double poisson_mean_sources = 4.0;  // > 0; a draw of 0 is redrawn
    double amplitude_min = 0.4;         // log-uniform amplitude range, > 0
    double amplitude_max = 3.0;
    double dwell_log_mean = 2.3;        // log-normal parameters for dwell means
    double dwell_log_sd = 1.5;
    double duration = 1000.0;           // time units
    double sample_rate = 50.0;          // samples per time unit
    double noise_fraction = 0.02;       // sigma = noise_fraction * sum(amplitudes)
    double baseline = 0.0;
    std::int64_t n_datasets = 1;
};

/// Sweep regime: fixed source counts, unit-exponential amplitudes, dwell means
/// log-uniform over what the sampling window can resolve, absolute noise
/// percentages on the unit amplitude scale.
struct BenchmarkSimConfig {
    std::vector<int> source_counts = {1, 2, 3, 4, 5, 6, 7};
    int datasets_per_count = 200;
    std::vector<double> noise_levels = {0.01, 0.05, 0.10, 0.20, 0.30};
    double duration = 1000.0;
    double sample_rate = 10.0;
    double baseline = 0.0;
};

/// A simulated signal together with everything needed to score an estimate.
struct LabeledDataset {
    Signal signal;
    std::vector<RtnSource> sources;
    std::vector<ActivityTrace> activities;  // one per source, aligned with signal
    std::vector<double> clean;              // signal minus noise, bit-exact
    double baseline = 0.0;
    double noise_sigma = 0.0;
    double noise_level = 0.0;  // configured label (benchmark) or noise_sigma (physical)
    std::int64_t dataset_id = 0;
    std::int64_t base_id = 0;  // realization id; shared across noise levels
};

/// Draws sources for the physical regime; n_override skips the Poisson draw.
std::vector<RtnSource> sample_sources(const PhysicalSimConfig& config,
                                      std::optional<int> n_override, Rng& rng);

/// Draws n sources for the benchmark regime.
std::vector<RtnSource> sample_sources(const BenchmarkSimConfig& config, int n, Rng& rng);

/// Alternating exponential dwells, discretized to whole samples (ceil, min 1),
/// initial state drawn from the stationary on-probability.
ActivityTrace simulate_activity(const RtnSource& source, std::int64_t n_samples,
                                double sample_period, Rng& rng);

/// Superimposes sources on a baseline and adds white Gaussian noise.
LabeledDataset render_dataset(std::vector<RtnSource> sources,
                              std::vector<ActivityTrace> activities, double baseline,
                              double noise_sigma, double sample_period, Rng& noise_rng);

/// Lazy benchmark suite: dataset (base_id, level) pairs are generated on
/// demand as pure functions of (config, base_seed, index), so generation
/// order, worker count, and resumption cannot change any dataset.
class BenchmarkSuite {
  public:
    BenchmarkSuite(BenchmarkSimConfig config, std::uint64_t base_seed);

    std::int64_t base_count() const { return base_count_; }
    std::int64_t size() const { return base_count_ * noise_level_count(); }
    std::int64_t noise_level_count() const {
        return static_cast<std::int64_t>(config_.noise_levels.size());
    }
    const BenchmarkSimConfig& config() const { return config_; }

    /// dataset_id == index == base_id * noise_level_count() + level_index.
    LabeledDataset generate(std::int64_t index) const;

    /// Number of true sources for a base realization, without building traces.
    int sources_for_base(std::int64_t base_id) const;

  private:
    BenchmarkSimConfig config_;
    std::uint64_t base_seed_;
    std::int64_t base_count_;
};

/// Physical-regime dataset for stream `dataset_id`; pure in (config, seed, id).
LabeledDataset generate_physical(const PhysicalSimConfig& config, std::uint64_t base_seed,
                                 std::int64_t dataset_id);

}  // namespace rtn::sim
