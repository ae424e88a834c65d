#include "rtn/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace rtn::sim {

namespace {

void check_window(double duration, double sample_rate) {
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be > 0");
}

std::int64_t window_samples(double duration, double sample_rate) {
    auto n = static_cast<std::int64_t>(std::llround(duration * sample_rate));
    if (n < 1) throw std::invalid_argument("window shorter than one sample");
    return n;
}

}  // namespace

std::vector<RtnSource> sample_sources(const PhysicalSimConfig& config,
                                      std::optional<int> n_override, Rng& rng) {
    int n;
    if (n_override) {
        n = *n_override;
        if (n < 1) throw std::invalid_argument("n_override must be >= 1");
    } else {
        std::int64_t drawn = 0;
        do {
            drawn = rng.poisson(config.poisson_mean_sources);
        } while (drawn == 0);
        n = static_cast<int>(drawn);
    }
    std::vector<RtnSource> sources(static_cast<std::size_t>(n));
    for (auto& s : sources) {
        s.amplitude = rng.log_uniform(config.amplitude_min, config.amplitude_max);
        s.mean_on = rng.lognormal(config.dwell_log_mean, config.dwell_log_sd);
        s.mean_off = rng.lognormal(config.dwell_log_mean, config.dwell_log_sd);
    }
    return sources;
}

std::vector<RtnSource> sample_sources(const BenchmarkSimConfig& config, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("source count must be >= 1");
    check_window(config.duration, config.sample_rate);
    const double sample_period = 1.0 / config.sample_rate;
    const double dwell_lo = 10.0 * sample_period;
    const double dwell_hi = config.duration / 2.0;
    if (!(dwell_lo < dwell_hi)) {
        throw std::invalid_argument("window too short for the dwell-mean range");
    }
    std::vector<RtnSource> sources(static_cast<std::size_t>(n));
    for (auto& s : sources) {
        s.amplitude = rng.exponential(1.0);
        s.mean_on = rng.log_uniform(dwell_lo, dwell_hi);
        s.mean_off = rng.log_uniform(dwell_lo, dwell_hi);
    }
    return sources;
}

ActivityTrace simulate_activity(const RtnSource& source, std::int64_t n_samples,
                                double sample_period, Rng& rng) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (!(sample_period > 0.0)) throw std::invalid_argument("sample_period must be > 0");
    if (!(source.mean_on > 0.0) || !(source.mean_off > 0.0)) {
        throw std::invalid_argument("dwell means must be > 0");
    }
    ActivityTrace trace;
    trace.states.reserve(static_cast<std::size_t>(n_samples));
    const double p_on = source.mean_on / (source.mean_on + source.mean_off);
    std::uint8_t state = rng.bernoulli(p_on) ? 1 : 0;
    std::int64_t filled = 0;
    while (filled < n_samples) {
        const double duration = rng.exponential(state ? source.mean_on : source.mean_off);
        const double samples = std::ceil(duration / sample_period);
        std::int64_t len = n_samples - filled;  // truncate at the window end
        if (samples < static_cast<double>(len)) {
            len = std::max<std::int64_t>(1, static_cast<std::int64_t>(samples));
        }
        trace.states.insert(trace.states.end(), static_cast<std::size_t>(len), state);
        filled += len;
        state ^= 1;
    }
    return trace;
}

LabeledDataset render_dataset(std::vector<RtnSource> sources,
                              std::vector<ActivityTrace> activities, double baseline,
                              double noise_sigma, double sample_period, Rng& noise_rng) {
    if (sources.size() != activities.size()) {
        throw LengthMismatch("render_dataset: sources vs activities");
    }
    if (activities.empty()) throw EmptyInput("render_dataset: no sources");
    if (noise_sigma < 0.0) throw InvalidSigma("render_dataset: noise_sigma must be >= 0");
    const std::size_t n = activities.front().size();
    for (const auto& trace : activities) {
        if (trace.size() != n) throw LengthMismatch("render_dataset: trace lengths differ");
    }

    LabeledDataset dataset;
    dataset.clean.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double value = baseline;
        for (std::size_t k = 0; k < sources.size(); ++k) {
            if (activities[k].states[t]) value += sources[k].amplitude;
        }
        dataset.clean[t] = value;
    }
    dataset.signal.sample_period = sample_period;
    dataset.signal.values.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        dataset.signal.values[t] = dataset.clean[t] + noise_sigma * noise_rng.normal();
    }
    dataset.sources = std::move(sources);
    dataset.activities = std::move(activities);
    dataset.baseline = baseline;
    dataset.noise_sigma = noise_sigma;
    dataset.noise_level = noise_sigma;
    return dataset;
}

BenchmarkSuite::BenchmarkSuite(BenchmarkSimConfig config, std::uint64_t base_seed)
    : config_(std::move(config)), base_seed_(base_seed) {
    check_window(config_.duration, config_.sample_rate);
    if (config_.source_counts.empty()) throw EmptyInput("benchmark: no source counts");
    if (config_.datasets_per_count < 1) {
        throw std::invalid_argument("benchmark: datasets_per_count must be >= 1");
    }
    if (config_.noise_levels.empty()) throw EmptyInput("benchmark: no noise levels");
    for (int count : config_.source_counts) {
        if (count < 1) throw std::invalid_argument("benchmark: source counts must be >= 1");
    }
    for (double level : config_.noise_levels) {
        if (level < 0.0) throw InvalidSigma("benchmark: noise levels must be >= 0");
    }
    base_count_ = static_cast<std::int64_t>(config_.source_counts.size()) *
                  config_.datasets_per_count;
}

int BenchmarkSuite::sources_for_base(std::int64_t base_id) const {
    if (base_id < 0 || base_id >= base_count_) throw std::out_of_range("base_id");
    const auto count_index =
        static_cast<std::size_t>(base_id / config_.datasets_per_count);
    return config_.source_counts[count_index];
}

LabeledDataset BenchmarkSuite::generate(std::int64_t index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("dataset index");
    const std::int64_t levels = noise_level_count();
    const std::int64_t base_id = index / levels;
    const auto level_index = static_cast<std::size_t>(index % levels);

    // The base stream fixes sources and activities; noise for each level comes
    // from a sub-stream, so every rendition of a base shares the clean signal.
    const std::uint64_t base_stream = derive_seed(base_seed_, static_cast<std::uint64_t>(base_id));
    Rng base_rng(base_stream);
    const int n_sources = sources_for_base(base_id);
    auto sources = sample_sources(config_, n_sources, base_rng);

    const std::int64_t n_samples = window_samples(config_.duration, config_.sample_rate);
    const double sample_period = 1.0 / config_.sample_rate;
    std::vector<ActivityTrace> activities;
    activities.reserve(sources.size());
    for (const auto& source : sources) {
        activities.push_back(simulate_activity(source, n_samples, sample_period, base_rng));
    }

    const double noise_level = config_.noise_levels[level_index];
    Rng noise_rng(derive_seed(base_stream, 1 + static_cast<std::uint64_t>(level_index)));
    LabeledDataset dataset = render_dataset(std::move(sources), std::move(activities),
                                            config_.baseline, noise_level, sample_period,
                                            noise_rng);
    dataset.noise_level = noise_level;
    dataset.dataset_id = index;
    dataset.base_id = base_id;
    return dataset;
}

LabeledDataset generate_physical(const PhysicalSimConfig& config, std::uint64_t base_seed,
                                 std::int64_t dataset_id) {
    check_window(config.duration, config.sample_rate);
    if (!(config.amplitude_min > 0.0) || !(config.amplitude_max >= config.amplitude_min)) {
        throw std::invalid_argument("physical: bad amplitude range");
    }
    if (!(config.noise_fraction >= 0.0)) {
        throw InvalidSigma("physical: noise_fraction must be >= 0");
    }
    Rng rng(base_seed, static_cast<std::uint64_t>(dataset_id));
    auto sources = sample_sources(config, std::nullopt, rng);
    double amplitude_sum = 0.0;
    for (const auto& s : sources) amplitude_sum += s.amplitude;

    const std::int64_t n_samples = window_samples(config.duration, config.sample_rate);
    const double sample_period = 1.0 / config.sample_rate;
    std::vector<ActivityTrace> activities;
    activities.reserve(sources.size());
    for (const auto& source : sources) {
        activities.push_back(simulate_activity(source, n_samples, sample_period, rng));
    }
    const double noise_sigma = config.noise_fraction * amplitude_sum;
    LabeledDataset dataset = render_dataset(std::move(sources), std::move(activities),
                                            config.baseline, noise_sigma, sample_period, rng);
    dataset.dataset_id = dataset_id;
    dataset.base_id = dataset_id;
    return dataset;
}

}  // namespace rtn::sim
