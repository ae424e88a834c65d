#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rtn/core.hpp"

namespace rtn::eval {

/// One matched (true source, estimated source) pair.
struct SourceMatch {
    int true_index = -1;
    int est_index = -1;
    double amplitude_ratio = 0.0;      ///< estimated / true
    double activity_match_pct = 0.0;   ///< in [0, 100]; filled when traces are compared
};

struct MatchingResult {
    std::vector<SourceMatch> matches;  ///< sorted by true_index
    std::vector<int> unmatched_true;   ///< ascending
    std::vector<int> unmatched_est;    ///< ascending
};

/// Optimal one-to-one amplitude matching over min(N, N') pairs, minimizing
/// the total |log(est/true)|. Exact assignment solve (intended for small N);
/// leftover sources on the longer side are reported as unmatched.
MatchingResult match_sources(std::span<const double> true_amplitudes,
                             std::span<const double> est_amplitudes);
MatchingResult match_sources(const std::vector<RtnSource>& truth,
                             std::span<const double> est_amplitudes);

/// Percent agreement between two activity traces of equal length:
/// 100 * (1 - hamming / length).
double activity_match(const ActivityTrace& a, const ActivityTrace& b);

/// Exponential dwell-time MLE per state from one activity trace. Segments are
/// maximal runs; the first and last run are excluded (censored by the window
/// edges). The MLE of an exponential mean is the arithmetic mean of the
/// included durations, in time units. A state with no complete segment has no
/// estimate.
struct DwellFit {
    std::optional<double> mean_on;
    std::optional<double> mean_off;
    std::int64_t n_on_segments = 0;
    std::int64_t n_off_segments = 0;
};
DwellFit fit_dwell_means(const ActivityTrace& trace, double sample_period);

/// Inclusive factor bound: truth/factor <= est <= truth*factor.
bool within_factor(double est, double truth, double factor);

/// Ground truth for one dataset, decoupled from how it was produced.
struct TruthRecord {
    std::int64_t dataset_id = 0;
    double noise_level = 0.0;
    double sample_period = 1.0;
    std::vector<RtnSource> sources;
    std::vector<ActivityTrace> activities;  ///< one per source, signal length
};

/// Estimate for one dataset; traces empty and amplitudes empty when the
/// analysis did not converge.
struct EstimateRecord {
    bool converged = false;
    std::vector<double> amplitudes;
    std::vector<ActivityTrace> traces;  ///< one per amplitude, signal length
};

/// One matched pair with full scoring context.
struct MatchRecord {
    std::int64_t dataset_id = 0;
    double noise_level = 0.0;
    int true_index = -1;
    int est_index = -1;
    double true_amplitude = 0.0;
    double est_amplitude = 0.0;
    double activity_match_pct = 0.0;
    double true_mean_on = 0.0;   ///< generating parameter, time units
    double true_mean_off = 0.0;
    std::optional<double> est_mean_on;   ///< MLE from the reconstructed trace
    std::optional<double> est_mean_off;
};

struct DatasetScore {
    std::int64_t dataset_id = 0;
    double noise_level = 0.0;
    int n_true = 0;
    int n_est = 0;  ///< 0 when not converged
    bool converged = false;
    std::vector<MatchRecord> matches;
    std::vector<int> unmatched_true;
    std::vector<int> unmatched_est;
};

/// Score one dataset: match amplitudes, compare per-source activity, fit
/// dwell means on the reconstructed traces.
DatasetScore score_dataset(const TruthRecord& truth, const EstimateRecord& estimate);

/// Counts of converged datasets per (true N, estimated N) cell.
struct ConfusionMatrix {
    std::vector<int> true_axis;  ///< distinct true source counts, ascending
    std::vector<int> est_axis;   ///< distinct estimated source counts, ascending
    std::vector<std::int64_t> cells;  ///< row-major [true][est]

    std::int64_t at(std::size_t true_row, std::size_t est_col) const {
        return cells[true_row * est_axis.size() + est_col];
    }
    std::int64_t total() const;
};

struct NoiseYield {
    double noise_level = 0.0;
    std::int64_t datasets_total = 0;
    std::int64_t datasets_converged = 0;
    double dataset_yield_pct = 0.0;
    std::int64_t sources_true_total = 0;  ///< over every dataset at this noise
    std::int64_t sources_detected = 0;    ///< matched pairs over converged datasets
    double source_yield_pct = 0.0;
};

/// Plot-ready sampled distribution: x ascending with one y per point.
struct DistributionSeries {
    std::vector<double> x;
    std::vector<double> y;
};

struct EvaluationReport {
    std::vector<NoiseYield> yields;  ///< sorted by noise level
    ConfusionMatrix confusion;       ///< all converged datasets
    std::vector<std::pair<double, ConfusionMatrix>> confusion_by_noise;
    std::vector<MatchRecord> matches;  ///< flattened, dataset order

    std::int64_t amplitude_pairs = 0;
    std::int64_t mean_on_pairs = 0;   ///< pairs with an on-dwell estimate
    std::int64_t mean_off_pairs = 0;
    double amplitude_within_factor2 = 0.0;  ///< fractions in [0, 1]
    double mean_on_within_factor2 = 0.0;
    double mean_off_within_factor2 = 0.0;

    DistributionSeries activity_match_cdf;  ///< pct over matched pairs, y = fraction <= x
    DistributionSeries amplitude_ccdf_est;  ///< estimated amplitudes, y = fraction >= x
    DistributionSeries amplitude_ccdf_true;  ///< matched true amplitudes (reference)
    DistributionSeries mean_on_cdf_est;  ///< dwell means with an estimate present
    DistributionSeries mean_on_cdf_true;  ///< all matched true on-dwell means
    DistributionSeries mean_off_cdf_est;
    DistributionSeries mean_off_cdf_true;
};

/// Deterministic fold over per-dataset scores (order-independent grouping,
/// dataset-order match list).
EvaluationReport aggregate(const std::vector<DatasetScore>& scores);

}  // namespace rtn::eval
