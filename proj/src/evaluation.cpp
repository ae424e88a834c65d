#include "rtn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace rtn::eval {

namespace {

constexpr int kMaxMaskSide = 16;  // assignment DP uses a bitmask over the smaller side

std::vector<SourceMatch> assign_pairs(std::span<const double> small,
                                      std::span<const double> large, bool small_is_true) {
    // dp[mask] after consuming a prefix of `large`: least total |log ratio|
    // with `mask` of `small` already matched. Each element of `small` must be
    // matched; `large` elements may be skipped.
    const auto p = static_cast<int>(small.size());
    const auto q = static_cast<int>(large.size());
    const std::size_t n_masks = std::size_t(1) << p;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(n_masks, inf);
    dp[0] = 0.0;
    // choice[j][mask]: which small index large[j] took to reach `mask`
    // (-1 = j skipped), for path reconstruction.
    std::vector<std::int8_t> choice(static_cast<std::size_t>(q) * n_masks, -1);
    std::vector<double> next(n_masks, inf);
    for (int j = 0; j < q; ++j) {
        std::fill(next.begin(), next.end(), inf);
        auto* row = &choice[static_cast<std::size_t>(j) * n_masks];
        for (std::size_t mask = 0; mask < n_masks; ++mask) {
            if (dp[mask] == inf) continue;
            if (dp[mask] < next[mask]) {
                next[mask] = dp[mask];
                row[mask] = -1;
            }
            for (int k = 0; k < p; ++k) {
                if (mask & (std::size_t(1) << k)) continue;
                const std::size_t to = mask | (std::size_t(1) << k);
                const double cost = dp[mask] + std::abs(std::log(large[static_cast<std::size_t>(
                                                             j)] /
                                                         small[static_cast<std::size_t>(k)]));
                if (cost < next[to]) {
                    next[to] = cost;
                    row[to] = static_cast<std::int8_t>(k);
                }
            }
        }
        dp.swap(next);
    }

    std::vector<SourceMatch> matches;
    std::size_t mask = n_masks - 1;
    for (int j = q - 1; j >= 0; --j) {
        const auto k = choice[static_cast<std::size_t>(j) * n_masks + mask];
        if (k < 0) continue;
        SourceMatch match;
        const double small_value = small[static_cast<std::size_t>(k)];
        const double large_value = large[static_cast<std::size_t>(j)];
        if (small_is_true) {
            match.true_index = k;
            match.est_index = j;
            match.amplitude_ratio = large_value / small_value;
        } else {
            match.true_index = j;
            match.est_index = k;
            match.amplitude_ratio = small_value / large_value;
        }
        matches.push_back(match);
        mask &= ~(std::size_t(1) << k);
    }
    return matches;
}

DistributionSeries cdf_series(std::vector<double> values) {
    DistributionSeries series;
    if (values.empty()) return series;
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    series.x = std::move(values);
    series.y.resize(series.x.size());
    for (std::size_t i = 0; i < series.y.size(); ++i) {
        series.y[i] = static_cast<double>(i + 1) / n;
    }
    return series;
}

DistributionSeries ccdf_series(std::vector<double> values) {
    DistributionSeries series;
    if (values.empty()) return series;
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    series.x = std::move(values);
    series.y.resize(series.x.size());
    for (std::size_t i = 0; i < series.y.size(); ++i) {
        // fraction of samples >= x[i]; duplicates share the first index
        std::size_t first = i;
        while (first > 0 && series.x[first - 1] == series.x[i]) --first;
        series.y[i] = static_cast<double>(series.x.size() - first) / n;
    }
    return series;
}

ConfusionMatrix build_confusion(const std::vector<const DatasetScore*>& converged) {
    ConfusionMatrix cm;
    std::set<int> true_values, est_values;
    for (const auto* score : converged) {
        true_values.insert(score->n_true);
        est_values.insert(score->n_est);
    }
    cm.true_axis.assign(true_values.begin(), true_values.end());
    cm.est_axis.assign(est_values.begin(), est_values.end());
    cm.cells.assign(cm.true_axis.size() * cm.est_axis.size(), 0);
    for (const auto* score : converged) {
        const auto row = static_cast<std::size_t>(
            std::lower_bound(cm.true_axis.begin(), cm.true_axis.end(), score->n_true) -
            cm.true_axis.begin());
        const auto col = static_cast<std::size_t>(
            std::lower_bound(cm.est_axis.begin(), cm.est_axis.end(), score->n_est) -
            cm.est_axis.begin());
        ++cm.cells[row * cm.est_axis.size() + col];
    }
    return cm;
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
    std::int64_t sum = 0;
    for (auto cell : cells) sum += cell;
    return sum;
}

MatchingResult match_sources(std::span<const double> true_amplitudes,
                             std::span<const double> est_amplitudes) {
    for (double a : true_amplitudes) {
        if (!(a > 0.0)) throw std::invalid_argument("match_sources: true amplitude <= 0");
    }
    for (double a : est_amplitudes) {
        if (!(a > 0.0)) throw std::invalid_argument("match_sources: estimated amplitude <= 0");
    }
    MatchingResult result;
    if (true_amplitudes.empty() || est_amplitudes.empty()) {
        for (int i = 0; i < static_cast<int>(true_amplitudes.size()); ++i) {
            result.unmatched_true.push_back(i);
        }
        for (int i = 0; i < static_cast<int>(est_amplitudes.size()); ++i) {
            result.unmatched_est.push_back(i);
        }
        return result;
    }
    const bool true_is_small = true_amplitudes.size() <= est_amplitudes.size();
    const auto& small = true_is_small ? true_amplitudes : est_amplitudes;
    const auto& large = true_is_small ? est_amplitudes : true_amplitudes;
    if (small.size() > kMaxMaskSide) {
        throw std::invalid_argument("match_sources: too many sources for exact assignment");
    }
    result.matches = assign_pairs(small, large, true_is_small);
    std::sort(result.matches.begin(), result.matches.end(),
              [](const SourceMatch& a, const SourceMatch& b) {
                  return a.true_index < b.true_index;
              });

    std::vector<bool> true_used(true_amplitudes.size(), false);
    std::vector<bool> est_used(est_amplitudes.size(), false);
    for (const auto& match : result.matches) {
        true_used[static_cast<std::size_t>(match.true_index)] = true;
        est_used[static_cast<std::size_t>(match.est_index)] = true;
    }
    for (std::size_t i = 0; i < true_used.size(); ++i) {
        if (!true_used[i]) result.unmatched_true.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < est_used.size(); ++i) {
        if (!est_used[i]) result.unmatched_est.push_back(static_cast<int>(i));
    }
    return result;
}

MatchingResult match_sources(const std::vector<RtnSource>& truth,
                             std::span<const double> est_amplitudes) {
    std::vector<double> amplitudes;
    amplitudes.reserve(truth.size());
    for (const auto& source : truth) amplitudes.push_back(source.amplitude);
    return match_sources(amplitudes, est_amplitudes);
}

double activity_match(const ActivityTrace& a, const ActivityTrace& b) {
    if (a.states.size() != b.states.size()) {
        throw LengthMismatch("activity_match: traces differ in length");
    }
    if (a.states.empty()) throw EmptyInput("activity_match: empty traces");
    std::int64_t hamming = 0;
    for (std::size_t t = 0; t < a.states.size(); ++t) {
        hamming += (a.states[t] != b.states[t]) ? 1 : 0;
    }
    return 100.0 * (1.0 - static_cast<double>(hamming) /
                              static_cast<double>(a.states.size()));
}

DwellFit fit_dwell_means(const ActivityTrace& trace, double sample_period) {
    if (trace.states.empty()) throw EmptyInput("fit_dwell_means: empty trace");
    if (!(sample_period > 0.0)) {
        throw std::invalid_argument("fit_dwell_means: sample_period must be > 0");
    }
    const auto runs = rle_encode(trace.states);
    DwellFit fit;
    if (runs.size() <= 2) return fit;  // every run touches a window edge
    double on_sum = 0.0, off_sum = 0.0;
    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
        const double duration = static_cast<double>(runs[i].second) * sample_period;
        if (runs[i].first) {
            on_sum += duration;
            ++fit.n_on_segments;
        } else {
            off_sum += duration;
            ++fit.n_off_segments;
        }
    }
    if (fit.n_on_segments > 0) fit.mean_on = on_sum / static_cast<double>(fit.n_on_segments);
    if (fit.n_off_segments > 0) fit.mean_off = off_sum / static_cast<double>(fit.n_off_segments);
    return fit;
}

bool within_factor(double est, double truth, double factor) {
    if (!(truth > 0.0)) throw std::invalid_argument("within_factor: truth must be > 0");
    if (!(factor > 1.0)) throw std::invalid_argument("within_factor: factor must be > 1");
    return truth / factor <= est && est <= truth * factor;
}

DatasetScore score_dataset(const TruthRecord& truth, const EstimateRecord& estimate) {
    if (truth.activities.size() != truth.sources.size()) {
        throw LengthMismatch("score_dataset: truth activities vs sources");
    }
    DatasetScore score;
    score.dataset_id = truth.dataset_id;
    score.noise_level = truth.noise_level;
    score.n_true = static_cast<int>(truth.sources.size());
    score.converged = estimate.converged;
    if (!estimate.converged) {
        for (int i = 0; i < score.n_true; ++i) score.unmatched_true.push_back(i);
        return score;
    }
    if (estimate.traces.size() != estimate.amplitudes.size()) {
        throw LengthMismatch("score_dataset: estimate traces vs amplitudes");
    }
    score.n_est = static_cast<int>(estimate.amplitudes.size());

    const auto matching = match_sources(truth.sources, estimate.amplitudes);
    score.unmatched_true = matching.unmatched_true;
    score.unmatched_est = matching.unmatched_est;
    score.matches.reserve(matching.matches.size());
    for (const auto& match : matching.matches) {
        const auto ti = static_cast<std::size_t>(match.true_index);
        const auto ei = static_cast<std::size_t>(match.est_index);
        MatchRecord record;
        record.dataset_id = truth.dataset_id;
        record.noise_level = truth.noise_level;
        record.true_index = match.true_index;
        record.est_index = match.est_index;
        record.true_amplitude = truth.sources[ti].amplitude;
        record.est_amplitude = estimate.amplitudes[ei];
        record.activity_match_pct = activity_match(truth.activities[ti], estimate.traces[ei]);
        record.true_mean_on = truth.sources[ti].mean_on;
        record.true_mean_off = truth.sources[ti].mean_off;
        const auto fit = fit_dwell_means(estimate.traces[ei], truth.sample_period);
        record.est_mean_on = fit.mean_on;
        record.est_mean_off = fit.mean_off;
        score.matches.push_back(std::move(record));
    }
    return score;
}

EvaluationReport aggregate(const std::vector<DatasetScore>& scores) {
    EvaluationReport report;

    std::map<double, std::vector<const DatasetScore*>> by_noise;
    for (const auto& score : scores) by_noise[score.noise_level].push_back(&score);

    std::vector<const DatasetScore*> converged_all;
    for (const auto& [noise, group] : by_noise) {
        NoiseYield yield;
        yield.noise_level = noise;
        std::vector<const DatasetScore*> converged;
        for (const auto* score : group) {
            ++yield.datasets_total;
            yield.sources_true_total += score->n_true;
            if (score->converged) {
                ++yield.datasets_converged;
                yield.sources_detected += static_cast<std::int64_t>(score->matches.size());
                converged.push_back(score);
                converged_all.push_back(score);
            }
        }
        if (yield.datasets_total > 0) {
            yield.dataset_yield_pct = 100.0 * static_cast<double>(yield.datasets_converged) /
                                      static_cast<double>(yield.datasets_total);
        }
        if (yield.sources_true_total > 0) {
            yield.source_yield_pct = 100.0 * static_cast<double>(yield.sources_detected) /
                                     static_cast<double>(yield.sources_true_total);
        }
        report.yields.push_back(yield);
        report.confusion_by_noise.emplace_back(noise, build_confusion(converged));
    }
    report.confusion = build_confusion(converged_all);

    for (const auto& score : scores) {
        if (!score.converged) continue;
        for (const auto& match : score.matches) report.matches.push_back(match);
    }

    std::vector<double> activity_values, est_amplitudes, true_amplitudes;
    std::vector<double> est_on, true_on, est_off, true_off;
    std::int64_t amplitude_ok = 0, on_ok = 0, off_ok = 0;
    for (const auto& match : report.matches) {
        activity_values.push_back(match.activity_match_pct);
        est_amplitudes.push_back(match.est_amplitude);
        true_amplitudes.push_back(match.true_amplitude);
        true_on.push_back(match.true_mean_on);
        true_off.push_back(match.true_mean_off);
        ++report.amplitude_pairs;
        if (within_factor(match.est_amplitude, match.true_amplitude, 2.0)) ++amplitude_ok;
        if (match.est_mean_on) {
            ++report.mean_on_pairs;
            est_on.push_back(*match.est_mean_on);
            if (within_factor(*match.est_mean_on, match.true_mean_on, 2.0)) ++on_ok;
        }
        if (match.est_mean_off) {
            ++report.mean_off_pairs;
            est_off.push_back(*match.est_mean_off);
            if (within_factor(*match.est_mean_off, match.true_mean_off, 2.0)) ++off_ok;
        }
    }
    if (report.amplitude_pairs > 0) {
        report.amplitude_within_factor2 = static_cast<double>(amplitude_ok) /
                                          static_cast<double>(report.amplitude_pairs);
    }
    if (report.mean_on_pairs > 0) {
        report.mean_on_within_factor2 =
            static_cast<double>(on_ok) / static_cast<double>(report.mean_on_pairs);
    }
    if (report.mean_off_pairs > 0) {
        report.mean_off_within_factor2 =
            static_cast<double>(off_ok) / static_cast<double>(report.mean_off_pairs);
    }
    report.activity_match_cdf = cdf_series(std::move(activity_values));
    report.amplitude_ccdf_est = ccdf_series(std::move(est_amplitudes));
    report.amplitude_ccdf_true = ccdf_series(std::move(true_amplitudes));
    report.mean_on_cdf_est = cdf_series(std::move(est_on));
    report.mean_on_cdf_true = cdf_series(std::move(true_on));
    report.mean_off_cdf_est = cdf_series(std::move(est_off));
    report.mean_off_cdf_true = cdf_series(std::move(true_off));
    return report;
}

}  // namespace rtn::eval
