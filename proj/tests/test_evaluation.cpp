#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "rtn/core.hpp"
#include "rtn/evaluation.hpp"
#include "rtn/simulator.hpp"

using namespace rtn;
using namespace rtn::eval;

namespace {

ActivityTrace trace_of(std::initializer_list<int> bits) {
    ActivityTrace trace;
    for (int bit : bits) trace.states.push_back(static_cast<std::uint8_t>(bit));
    return trace;
}

// Least total |log(est/true)| over all injective matchings of the smaller side.
double brute_force_cost(const std::vector<double>& truth, const std::vector<double>& est) {
    const bool truth_small = truth.size() <= est.size();
    const auto& small = truth_small ? truth : est;
    const auto& large = truth_small ? est : truth;
    std::vector<int> candidates(large.size());
    for (std::size_t i = 0; i < large.size(); ++i) candidates[i] = static_cast<int>(i);
    double best = std::numeric_limits<double>::infinity();
    std::sort(candidates.begin(), candidates.end());
    do {
        double total = 0.0;
        for (std::size_t k = 0; k < small.size(); ++k) {
            total += std::abs(std::log(large[static_cast<std::size_t>(candidates[k])] /
                                       small[k]));
        }
        best = std::min(best, total);
    } while (std::next_permutation(candidates.begin(), candidates.end()));
    return best;
}

double matching_cost(const std::vector<double>& truth, const std::vector<double>& est,
                     const MatchingResult& result) {
    double total = 0.0;
    for (const auto& match : result.matches) {
        total += std::abs(std::log(est[static_cast<std::size_t>(match.est_index)] /
                                   truth[static_cast<std::size_t>(match.true_index)]));
    }
    return total;
}

}  // namespace

TEST_CASE("identical amplitude sets match one-to-one with unit ratios") {
    const std::vector<double> amplitudes{1.0, 2.0, 3.0};
    const auto result = match_sources(amplitudes, amplitudes);
    REQUIRE(result.matches.size() == 3);
    CHECK(result.unmatched_true.empty());
    CHECK(result.unmatched_est.empty());
    for (int i = 0; i < 3; ++i) {
        CHECK(result.matches[static_cast<std::size_t>(i)].true_index == i);
        CHECK(result.matches[static_cast<std::size_t>(i)].est_index == i);
        CHECK(result.matches[static_cast<std::size_t>(i)].amplitude_ratio == 1.0);
    }
}

TEST_CASE("surplus estimates are discarded by the log-ratio objective") {
    const std::vector<double> truth{1.0, 2.0};
    const std::vector<double> est{1.9, 0.5, 1.05};
    const auto result = match_sources(truth, est);
    REQUIRE(result.matches.size() == 2);
    CHECK(result.matches[0].true_index == 0);
    CHECK(result.matches[0].est_index == 2);  // 1.05 pairs with 1.0
    CHECK(result.matches[0].amplitude_ratio == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(result.matches[1].true_index == 1);
    CHECK(result.matches[1].est_index == 0);  // 1.9 pairs with 2.0
    CHECK(result.matches[1].amplitude_ratio == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(result.unmatched_true.empty());
    CHECK(result.unmatched_est == std::vector<int>{1});
}

TEST_CASE("the shorter side is always fully matched") {
    const std::vector<double> truth4{0.5, 1.0, 2.0, 4.0};
    const std::vector<double> est5{0.52, 0.9, 2.2, 3.9, 7.0};
    const auto more_est = match_sources(truth4, est5);
    CHECK(more_est.matches.size() == 4);
    CHECK(more_est.unmatched_true.empty());
    CHECK(more_est.unmatched_est.size() == 1);

    const std::vector<double> truth5{0.5, 1.0, 2.0, 4.0, 8.0};
    const std::vector<double> est3{1.1, 3.7, 8.4};
    const auto fewer_est = match_sources(truth5, est3);
    CHECK(fewer_est.matches.size() == 3);
    CHECK(fewer_est.unmatched_true.size() == 2);
    CHECK(fewer_est.unmatched_est.empty());

    const auto none = match_sources(truth4, std::vector<double>{});
    CHECK(none.matches.empty());
    CHECK(none.unmatched_true == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("matching reaches the brute-force optimum for small sets") {
    Rng rng(701);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n_true = 1 + static_cast<std::size_t>(rng.next_u64() % 6);
        const auto n_est = 1 + static_cast<std::size_t>(rng.next_u64() % 6);
        std::vector<double> truth, est;
        for (std::size_t i = 0; i < n_true; ++i) truth.push_back(rng.log_uniform(0.1, 10.0));
        for (std::size_t i = 0; i < n_est; ++i) est.push_back(rng.log_uniform(0.1, 10.0));
        const auto result = match_sources(truth, est);
        CHECK(result.matches.size() == std::min(n_true, n_est));
        CHECK(matching_cost(truth, est, result) ==
              doctest::Approx(brute_force_cost(truth, est)).epsilon(1e-12));
    }
}

TEST_CASE("matching validates amplitudes") {
    const std::vector<double> good{1.0};
    const std::vector<double> bad{0.0};
    CHECK_THROWS_AS(match_sources(bad, good), std::invalid_argument);
    CHECK_THROWS_AS(match_sources(good, bad), std::invalid_argument);
}

TEST_CASE("activity match is the percentage of agreeing samples") {
    const auto a = trace_of({1, 1, 0, 0});
    CHECK(activity_match(a, a) == 100.0);
    CHECK(activity_match(a, trace_of({0, 0, 1, 1})) == 0.0);
    ActivityTrace ten, ten_off_by_one;
    ten.states.assign(10, 1);
    ten_off_by_one.states.assign(10, 1);
    ten_off_by_one.states[3] = 0;
    CHECK(activity_match(ten, ten_off_by_one) == 90.0);
    CHECK_THROWS_AS(activity_match(a, ten), LengthMismatch);
    CHECK_THROWS_AS(activity_match(ActivityTrace{}, ActivityTrace{}), EmptyInput);
}

TEST_CASE("complementing one trace complements the match percentage") {
    Rng rng(702);
    for (int trial = 0; trial < 10; ++trial) {
        ActivityTrace a, b;
        for (int t = 0; t < 97; ++t) {
            a.states.push_back(static_cast<std::uint8_t>(rng.bernoulli(0.5)));
            b.states.push_back(static_cast<std::uint8_t>(rng.bernoulli(0.5)));
        }
        ActivityTrace complement = b;
        for (auto& state : complement.states) state ^= 1;
        CHECK(activity_match(a, b) + activity_match(a, complement) ==
              doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("dwell fit averages complete interior segments") {
    // runs: off 1 (censored), on 2, off 2, on 4, off 3 (censored)
    const auto trace = trace_of({0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 0});
    const auto fit = fit_dwell_means(trace, 1.0);
    REQUIRE(fit.mean_on.has_value());
    REQUIRE(fit.mean_off.has_value());
    CHECK(*fit.mean_on == 3.0);  // segments of 2 and 4
    CHECK(*fit.mean_off == 2.0);
    CHECK(fit.n_on_segments == 2);
    CHECK(fit.n_off_segments == 1);

    const auto scaled = fit_dwell_means(trace, 0.5);
    CHECK(*scaled.mean_on == 1.5);
    CHECK(*scaled.mean_off == 1.0);
}

TEST_CASE("dwell fit reports nothing when every run touches a window edge") {
    ActivityTrace constant;
    constant.states.assign(50, 0);
    const auto all_off = fit_dwell_means(constant, 1.0);
    CHECK_FALSE(all_off.mean_on.has_value());
    CHECK_FALSE(all_off.mean_off.has_value());
    CHECK(all_off.n_on_segments == 0);

    const auto two_runs = fit_dwell_means(trace_of({0, 0, 1, 1}), 1.0);
    CHECK_FALSE(two_runs.mean_on.has_value());
    CHECK_FALSE(two_runs.mean_off.has_value());

    // three runs: only the middle one is complete
    const auto three_runs = fit_dwell_means(trace_of({0, 1, 1, 1, 0}), 1.0);
    REQUIRE(three_runs.mean_on.has_value());
    CHECK(*three_runs.mean_on == 3.0);
    CHECK_FALSE(three_runs.mean_off.has_value());

    CHECK_THROWS_AS(fit_dwell_means(ActivityTrace{}, 1.0), EmptyInput);
    CHECK_THROWS_AS(fit_dwell_means(constant, 0.0), std::invalid_argument);
}

TEST_CASE("dwell MLE equals the sample mean of interior runs") {
    // interior runs: on {3, 2, 9}, off {7, 4}
    ActivityTrace trace;
    const int lengths[] = {5, 3, 7, 2, 4, 9, 1};
    std::uint8_t state = 0;
    for (int length : lengths) {
        trace.states.insert(trace.states.end(), static_cast<std::size_t>(length), state);
        state ^= 1;
    }
    const auto fit = fit_dwell_means(trace, 2.0);
    CHECK(*fit.mean_on == doctest::Approx(2.0 * (3 + 2 + 9) / 3.0).epsilon(1e-15));
    CHECK(*fit.mean_off == doctest::Approx(2.0 * (7 + 4) / 2.0).epsilon(1e-15));
    CHECK(fit.n_on_segments == 3);
    CHECK(fit.n_off_segments == 2);
}

TEST_CASE("dwell MLE converges on simulated activity") {
    const RtnSource source{1.0, 5.0, 3.0};
    const double period = 0.01;
    Rng rng(703);
    const auto trace = sim::simulate_activity(source, 10000000, period, rng);
    const auto fit = fit_dwell_means(trace, period);
    REQUIRE(fit.n_on_segments >= 10000);
    REQUIRE(fit.n_off_segments >= 10000);
    CHECK(std::abs(*fit.mean_on - source.mean_on) / source.mean_on < 0.05);
    CHECK(std::abs(*fit.mean_off - source.mean_off) / source.mean_off < 0.05);
}

TEST_CASE("within_factor bounds are inclusive") {
    CHECK(within_factor(2.0, 1.0, 2.0));   // upper bound
    CHECK(within_factor(0.5, 1.0, 2.0));   // lower bound
    CHECK(within_factor(1.3, 1.0, 2.0));
    CHECK_FALSE(within_factor(2.01, 1.0, 2.0));
    CHECK_FALSE(within_factor(0.49, 1.0, 2.0));
    CHECK_THROWS_AS(within_factor(1.0, 0.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(within_factor(1.0, 1.0, 1.0), std::invalid_argument);
}

namespace {

TruthRecord make_truth(std::int64_t id, double noise) {
    TruthRecord truth;
    truth.dataset_id = id;
    truth.noise_level = noise;
    truth.sample_period = 1.0;
    truth.sources = {{1.0, 4.0, 4.0}, {3.0, 6.0, 2.0}};
    truth.activities = {trace_of({0, 1, 1, 0, 0, 1, 1, 1, 0, 0}),
                        trace_of({1, 1, 0, 0, 1, 1, 0, 0, 1, 1})};
    return truth;
}

}  // namespace

TEST_CASE("score_dataset fills match records from the reconstruction") {
    const auto truth = make_truth(7, 0.05);
    EstimateRecord estimate;
    estimate.converged = true;
    estimate.amplitudes = {2.9, 1.1};  // swapped order relative to truth
    estimate.traces = {trace_of({1, 1, 0, 0, 1, 1, 0, 0, 1, 1}),
                       trace_of({0, 1, 1, 0, 0, 1, 1, 0, 0, 0})};

    const auto score = score_dataset(truth, estimate);
    CHECK(score.dataset_id == 7);
    CHECK(score.noise_level == 0.05);
    CHECK(score.n_true == 2);
    CHECK(score.n_est == 2);
    CHECK(score.converged);
    REQUIRE(score.matches.size() == 2);
    CHECK(score.unmatched_true.empty());
    CHECK(score.unmatched_est.empty());

    const auto& first = score.matches[0];  // true 1.0 <-> est 1.1
    CHECK(first.true_index == 0);
    CHECK(first.est_index == 1);
    CHECK(first.true_amplitude == 1.0);
    CHECK(first.est_amplitude == 1.1);
    CHECK(first.activity_match_pct == 90.0);  // traces differ only at t = 7
    CHECK(first.true_mean_on == 4.0);
    CHECK(first.true_mean_off == 4.0);

    const auto& second = score.matches[1];  // true 3.0 <-> est 2.9
    CHECK(second.true_index == 1);
    CHECK(second.est_index == 0);
    CHECK(second.activity_match_pct == 100.0);
    // est trace runs: 2,2,2,2,2 -> interior on {2}, off {2, 2}
    REQUIRE(second.est_mean_on.has_value());
    CHECK(*second.est_mean_on == 2.0);
    CHECK(*second.est_mean_off == 2.0);
}

TEST_CASE("a non-converged estimate leaves every true source unmatched") {
    const auto truth = make_truth(3, 0.30);
    const auto score = score_dataset(truth, EstimateRecord{});
    CHECK_FALSE(score.converged);
    CHECK(score.n_est == 0);
    CHECK(score.matches.empty());
    CHECK(score.unmatched_true == std::vector<int>{0, 1});
}

TEST_CASE("aggregate groups by noise level and counts yields") {
    std::vector<DatasetScore> scores;

    // noise 0.01: two converged datasets (2 + 1 matches of 2 + 2 true), one not
    {
        auto s = score_dataset(make_truth(0, 0.01), EstimateRecord{
            true, {1.05, 2.8}, {trace_of({0, 1, 1, 0, 0, 1, 1, 1, 0, 0}),
                                trace_of({1, 1, 0, 0, 1, 1, 0, 0, 1, 1})}});
        scores.push_back(s);
    }
    {
        auto s = score_dataset(make_truth(1, 0.01), EstimateRecord{
            true, {0.9}, {trace_of({0, 1, 1, 0, 0, 1, 1, 1, 0, 0})}});
        scores.push_back(s);
    }
    scores.push_back(score_dataset(make_truth(2, 0.01), EstimateRecord{}));

    // noise 0.30: one converged, one not
    {
        auto s = score_dataset(make_truth(3, 0.30), EstimateRecord{
            true, {1.2, 2.5}, {trace_of({0, 1, 1, 0, 0, 1, 1, 1, 0, 0}),
                               trace_of({1, 1, 0, 0, 1, 1, 0, 0, 1, 1})}});
        scores.push_back(s);
    }
    scores.push_back(score_dataset(make_truth(4, 0.30), EstimateRecord{}));

    const auto report = aggregate(scores);
    REQUIRE(report.yields.size() == 2);
    CHECK(report.yields[0].noise_level == 0.01);
    CHECK(report.yields[0].datasets_total == 3);
    CHECK(report.yields[0].datasets_converged == 2);
    CHECK(report.yields[0].dataset_yield_pct == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(report.yields[0].sources_true_total == 6);
    CHECK(report.yields[0].sources_detected == 3);  // 2 + 1 matches
    CHECK(report.yields[0].source_yield_pct == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(report.yields[1].noise_level == 0.30);
    CHECK(report.yields[1].datasets_total == 2);
    CHECK(report.yields[1].datasets_converged == 1);
    CHECK(report.yields[1].sources_detected == 2);

    // confusion matrices count converged datasets only
    CHECK(report.confusion.total() == 3);
    REQUIRE(report.confusion.true_axis == std::vector<int>{2});
    REQUIRE(report.confusion.est_axis == std::vector<int>{1, 2});
    CHECK(report.confusion.at(0, 0) == 1);  // the one-source estimate
    CHECK(report.confusion.at(0, 1) == 2);
    REQUIRE(report.confusion_by_noise.size() == 2);
    CHECK(report.confusion_by_noise[0].second.total() == 2);
    CHECK(report.confusion_by_noise[1].second.total() == 1);

    // flattened matches keep dataset order
    REQUIRE(report.matches.size() == 5);
    CHECK(report.matches[0].dataset_id == 0);
    CHECK(report.matches[2].dataset_id == 1);
    CHECK(report.matches[3].dataset_id == 3);
    CHECK(report.amplitude_pairs == 5);
    CHECK(report.amplitude_within_factor2 == 1.0);  // every ratio within [0.5, 2]

    // series: x ascending; CDF y ascending to 1; CCDF y descending from 1
    const auto& cdf = report.activity_match_cdf;
    REQUIRE(cdf.x.size() == 5);
    for (std::size_t i = 1; i < cdf.x.size(); ++i) {
        CHECK(cdf.x[i] >= cdf.x[i - 1]);
        CHECK(cdf.y[i] >= cdf.y[i - 1]);
    }
    CHECK(cdf.y.back() == 1.0);
    const auto& ccdf = report.amplitude_ccdf_est;
    REQUIRE(ccdf.x.size() == 5);
    CHECK(ccdf.y.front() == 1.0);
    for (std::size_t i = 1; i < ccdf.x.size(); ++i) {
        CHECK(ccdf.x[i] >= ccdf.x[i - 1]);
        CHECK(ccdf.y[i] <= ccdf.y[i - 1]);
    }
    CHECK(report.amplitude_ccdf_true.x.size() == 5);
}

TEST_CASE("ccdf duplicates share the fraction at their first index") {
    std::vector<DatasetScore> scores;
    // two matches with identical estimated amplitude
    auto s = score_dataset(make_truth(0, 0.1), EstimateRecord{
        true, {1.0, 1.0}, {trace_of({0, 1, 1, 0, 0, 1, 1, 1, 0, 0}),
                           trace_of({1, 1, 0, 0, 1, 1, 0, 0, 1, 1})}});
    scores.push_back(s);
    const auto report = aggregate(scores);
    REQUIRE(report.amplitude_ccdf_est.x.size() == 2);
    CHECK(report.amplitude_ccdf_est.x[0] == report.amplitude_ccdf_est.x[1]);
    CHECK(report.amplitude_ccdf_est.y[0] == 1.0);
    CHECK(report.amplitude_ccdf_est.y[1] == 1.0);
}

TEST_CASE("aggregating nothing yields an empty report") {
    const auto report = aggregate({});
    CHECK(report.yields.empty());
    CHECK(report.confusion.total() == 0);
    CHECK(report.matches.empty());
    CHECK(report.amplitude_pairs == 0);
    CHECK(report.activity_match_cdf.x.empty());
}
