#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "rtn/core.hpp"
#include "rtn/simulator.hpp"

using namespace rtn;
using namespace rtn::sim;

TEST_CASE("benchmark sources: unit-exponential amplitudes, dwells inside the window") {
    BenchmarkSimConfig config;
    config.duration = 1000.0;
    config.sample_rate = 10.0;
    Rng rng(301);
    const int n = 2000;
    auto sources = sample_sources(config, n, rng);
    REQUIRE(sources.size() == static_cast<std::size_t>(n));
    double amp_sum = 0.0;
    for (const auto& s : sources) {
        amp_sum += s.amplitude;
        CHECK(s.amplitude > 0.0);
        CHECK(s.mean_on >= 10.0 * 0.1);  // 10 sample periods
        CHECK(s.mean_on <= 500.0);       // half the window
        CHECK(s.mean_off >= 1.0);
        CHECK(s.mean_off <= 500.0);
    }
    // Exp(1): mean 1, sd 1
    CHECK(std::abs(amp_sum / n - 1.0) < 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("benchmark sources reject a window too short for resolvable dwells") {
    BenchmarkSimConfig config;
    config.duration = 1.0;     // half-window 0.5
    config.sample_rate = 10.0;  // 10 periods = 1.0 > 0.5
    Rng rng(1);
    CHECK_THROWS_AS(sample_sources(config, 2, rng), std::invalid_argument);
}

TEST_CASE("physical sources: count is Poisson conditioned away from zero") {
    PhysicalSimConfig config;
    config.poisson_mean_sources = 0.5;  // zero would dominate without the redraw
    Rng rng(302);
    const int trials = 2000;
    double count_sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        auto sources = sample_sources(config, std::nullopt, rng);
        REQUIRE(sources.size() >= 1);
        count_sum += static_cast<double>(sources.size());
        for (const auto& s : sources) {
            CHECK(s.amplitude >= config.amplitude_min);
            CHECK(s.amplitude <= config.amplitude_max);
            CHECK(s.mean_on > 0.0);
            CHECK(s.mean_off > 0.0);
        }
    }
    // zero-truncated Poisson(0.5): mean = lambda / (1 - e^-lambda)
    const double lambda = 0.5;
    const double mean = lambda / (1.0 - std::exp(-lambda));
    const double second = (lambda + lambda * lambda) / (1.0 - std::exp(-lambda));
    const double sd = std::sqrt(second - mean * mean);
    CHECK(std::abs(count_sum / trials - mean) < 5.0 * sd / std::sqrt(static_cast<double>(trials)));
}

TEST_CASE("physical sources honor n_override") {
    PhysicalSimConfig config;
    Rng rng(5);
    CHECK(sample_sources(config, 7, rng).size() == 7);
    CHECK_THROWS_AS(sample_sources(config, 0, rng), std::invalid_argument);
}

TEST_CASE("activity traces alternate and match the discretized dwell law") {
    // ceil-discretized Exp(m) run lengths are geometric with p = 1 - e^{-T/m}
    RtnSource source{1.0, 0.5, 0.25};
    const double period = 0.01;
    const std::int64_t n_samples = 300000;
    Rng rng(303);
    const auto trace = simulate_activity(source, n_samples, period, rng);
    REQUIRE(trace.size() == static_cast<std::size_t>(n_samples));

    const auto runs = rle_encode(trace.states);
    REQUIRE(runs.size() > 100);
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        CHECK(runs[i].first != runs[i + 1].first);  // strict alternation
        CHECK(runs[i].second >= 1);
    }

    double on_sum = 0.0, off_sum = 0.0;
    std::int64_t on_count = 0, off_count = 0;
    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {  // interior = complete dwells
        if (runs[i].first) {
            on_sum += static_cast<double>(runs[i].second);
            ++on_count;
        } else {
            off_sum += static_cast<double>(runs[i].second);
            ++off_count;
        }
    }
    REQUIRE(on_count > 1000);
    REQUIRE(off_count > 1000);
    const auto check_mean = [&](double mean_dwell, double sum, std::int64_t count) {
        const double p = 1.0 - std::exp(-period / mean_dwell);
        const double expected = 1.0 / p;
        const double sd = std::sqrt(1.0 - p) / p;
        CHECK(std::abs(sum / static_cast<double>(count) - expected) <
              5.0 * sd / std::sqrt(static_cast<double>(count)));
    };
    check_mean(source.mean_on, on_sum, on_count);
    check_mean(source.mean_off, off_sum, off_count);
}

TEST_CASE("activity initial state follows the stationary on-probability") {
    RtnSource source{1.0, 0.5, 0.25};  // p_on = 2/3
    const int trials = 20000;
    int on_first = 0;
    for (int i = 0; i < trials; ++i) {
        Rng rng(909, static_cast<std::uint64_t>(i));
        on_first += simulate_activity(source, 1, 1.0, rng).states[0];
    }
    const double p = 2.0 / 3.0;
    CHECK(std::abs(static_cast<double>(on_first) / trials - p) <
          5.0 * std::sqrt(p * (1.0 - p) / trials));
}

TEST_CASE("sub-period dwells still occupy at least one sample") {
    RtnSource source{1.0, 0.001, 0.001};  // dwells far below the period
    Rng rng(304);
    const auto trace = simulate_activity(source, 5000, 1.0, rng);
    for (const auto& [value, length] : rle_encode(trace.states)) {
        CHECK(length >= 1);
    }
}

TEST_CASE("noiseless render reproduces the clean superposition exactly") {
    std::vector<RtnSource> sources{{0.7, 1.0, 1.0}, {1.3, 2.0, 0.5}, {0.25, 0.3, 0.4}};
    std::vector<double> amplitudes;
    for (const auto& s : sources) amplitudes.push_back(s.amplitude);

    const std::int64_t n = 4000;
    std::vector<ActivityTrace> activities;
    Rng rng(305);
    for (const auto& s : sources) {
        activities.push_back(simulate_activity(s, n, 0.1, rng));
    }
    const double baseline = 0.35;
    auto noiseless = render_dataset(sources, activities, baseline, 0.0, 0.1, rng);
    CHECK(noiseless.signal.values == noiseless.clean);
    CHECK(noiseless.signal.sample_period == 0.1);
    CHECK(noiseless.noise_sigma == 0.0);

    // clean[t] equals the canonical subset sum of the active sources
    const auto configs = make_configurations(baseline, amplitudes);
    for (std::int64_t t = 0; t < n; ++t) {
        std::uint32_t mask = 0;
        for (std::size_t k = 0; k < activities.size(); ++k) {
            if (activities[k].states[static_cast<std::size_t>(t)]) mask |= 1u << k;
        }
        REQUIRE(noiseless.clean[static_cast<std::size_t>(t)] ==
                configs[mask].total_amplitude);
    }

    auto noisy = render_dataset(sources, activities, baseline, 0.05, 0.1, rng);
    CHECK(noisy.clean == noiseless.clean);
    CHECK(noisy.signal.values != noisy.clean);
    CHECK(noisy.noise_sigma == 0.05);
    CHECK(noisy.noise_level == 0.05);
}

TEST_CASE("render validates its inputs") {
    std::vector<RtnSource> sources{{1.0, 1.0, 1.0}};
    std::vector<ActivityTrace> activities{ActivityTrace{{1, 0, 1}}};
    Rng rng(1);
    CHECK_THROWS_AS(render_dataset(sources, {}, 0.0, 0.1, 1.0, rng), LengthMismatch);
    CHECK_THROWS_AS(render_dataset({}, {}, 0.0, 0.1, 1.0, rng), EmptyInput);
    CHECK_THROWS_AS(render_dataset(sources, activities, 0.0, -0.1, 1.0, rng), InvalidSigma);
    std::vector<ActivityTrace> ragged{ActivityTrace{{1, 0}}};
    std::vector<RtnSource> two{{1.0, 1.0, 1.0}, {2.0, 1.0, 1.0}};
    std::vector<ActivityTrace> ragged2{ActivityTrace{{1, 0, 1}}, ActivityTrace{{1, 0}}};
    CHECK_THROWS_AS(render_dataset(two, ragged2, 0.0, 0.1, 1.0, rng), LengthMismatch);
}

TEST_CASE("benchmark suite indexes datasets as base_id * levels + level") {
    BenchmarkSimConfig config;
    config.source_counts = {1, 2};
    config.datasets_per_count = 3;
    config.noise_levels = {0.01, 0.30};
    config.duration = 100.0;
    config.sample_rate = 10.0;
    BenchmarkSuite suite(config, 42);

    CHECK(suite.base_count() == 6);
    CHECK(suite.noise_level_count() == 2);
    CHECK(suite.size() == 12);
    CHECK(suite.sources_for_base(0) == 1);
    CHECK(suite.sources_for_base(2) == 1);
    CHECK(suite.sources_for_base(3) == 2);
    CHECK(suite.sources_for_base(5) == 2);
    CHECK_THROWS_AS(suite.sources_for_base(6), std::out_of_range);
    CHECK_THROWS_AS(suite.generate(12), std::out_of_range);

    for (std::int64_t i = 0; i < suite.size(); ++i) {
        const auto dataset = suite.generate(i);
        CHECK(dataset.dataset_id == i);
        CHECK(dataset.base_id == i / 2);
        CHECK(dataset.noise_level == config.noise_levels[static_cast<std::size_t>(i % 2)]);
        CHECK(dataset.noise_sigma == dataset.noise_level);
        CHECK(dataset.sources.size() ==
              static_cast<std::size_t>(suite.sources_for_base(i / 2)));
        CHECK(dataset.signal.size() == 1000);
    }
}

TEST_CASE("benchmark renditions of one base share the clean signal") {
    BenchmarkSimConfig config;
    config.source_counts = {3};
    config.datasets_per_count = 1;
    config.noise_levels = {0.01, 0.30};
    config.duration = 200.0;
    config.sample_rate = 10.0;
    BenchmarkSuite suite(config, 7);

    const auto low = suite.generate(0);
    const auto high = suite.generate(1);
    CHECK(low.clean == high.clean);
    CHECK(low.baseline == high.baseline);
    REQUIRE(low.sources.size() == high.sources.size());
    for (std::size_t k = 0; k < low.sources.size(); ++k) {
        CHECK(low.sources[k].amplitude == high.sources[k].amplitude);
        CHECK(low.activities[k].states == high.activities[k].states);
    }
    CHECK(low.signal.values != high.signal.values);
}

TEST_CASE("benchmark generation is a pure function of (config, seed, index)") {
    BenchmarkSimConfig config;
    config.source_counts = {2};
    config.datasets_per_count = 2;
    config.noise_levels = {0.05};
    config.duration = 100.0;
    config.sample_rate = 10.0;
    BenchmarkSuite a(config, 99), b(config, 99);

    const auto first = a.generate(1);
    const auto again = b.generate(1);
    CHECK(first.signal.values == again.signal.values);
    CHECK(first.clean == again.clean);
    CHECK(first.sources.size() == again.sources.size());
    for (std::size_t k = 0; k < first.sources.size(); ++k) {
        CHECK(first.sources[k].amplitude == again.sources[k].amplitude);
        CHECK(first.sources[k].mean_on == again.sources[k].mean_on);
        CHECK(first.activities[k].states == again.activities[k].states);
    }

    BenchmarkSuite other_seed(config, 100);
    CHECK(other_seed.generate(1).signal.values != first.signal.values);
}

TEST_CASE("physical generation is pure and scales noise with summed amplitude") {
    PhysicalSimConfig config;
    config.duration = 50.0;
    config.sample_rate = 20.0;
    const auto a = generate_physical(config, 11, 3);
    const auto b = generate_physical(config, 11, 3);
    CHECK(a.signal.values == b.signal.values);
    CHECK(a.clean == b.clean);
    CHECK(a.dataset_id == 3);
    CHECK(a.base_id == 3);

    double amp_sum = 0.0;
    for (const auto& s : a.sources) amp_sum += s.amplitude;
    CHECK(a.noise_sigma == config.noise_fraction * amp_sum);
    CHECK(a.noise_level == a.noise_sigma);

    const auto other = generate_physical(config, 11, 4);
    CHECK(other.signal.values != a.signal.values);
}
