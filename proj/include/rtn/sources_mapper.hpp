#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtn/affinity_propagation.hpp"
#include "rtn/core.hpp"
#include "rtn/levels_extractor.hpp"

namespace rtn::mapper {

/// Row-stochastic first-order transition estimate between quantized levels.
struct TransitionMatrix {
    int n_levels = 0;
    std::vector<double> probabilities;  // row-major, rows sum to 1
    std::vector<std::int64_t> counts;   // raw transition counts

    double p(int i, int j) const {
        return probabilities[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_levels) +
                             static_cast<std::size_t>(j)];
    }
    std::int64_t c(int i, int j) const {
        return counts[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_levels) +
                      static_cast<std::size_t>(j)];
    }
    std::int64_t row_total(int i) const;
};

/// Rows with no observed outgoing transitions become identity rows.
TransitionMatrix transition_matrix(const std::vector<std::int32_t>& quantized, int n_levels);

/// One unordered level pair embedded in (transition probability, separation)
/// space. x/y hold error-normalized coordinates; delta/pt are raw.
struct PtDeltaPoint {
    int level_i = 0;  // i < j, levels sorted by mu
    int level_j = 0;
    double delta = 0.0;       // mu_j - mu_i, > 0
    double pt = 0.0;          // symmetrized transition probability
    double delta_error = 0.0; // sqrt(sigma_i^2 + sigma_j^2)
    double pt_error = 0.0;    // binomial SE, floored at 1/n_out
    double x = 0.0;           // delta / median delta_error
    double y = 0.0;           // pt / median pt_error
};

struct PtDeltaSpace {
    std::vector<PtDeltaPoint> points;  // all pairs i < j
    double delta_scale = 1.0;          // median delta_error
    double pt_scale = 1.0;             // median pt_error
};

/// Throws NoPairs when fewer than two levels exist.
PtDeltaSpace build_pt_delta_space(const std::vector<Level>& levels,
                                  const TransitionMatrix& transitions);

/// A deduplicated candidate amplitude with its accumulated cluster support.
struct AmplitudeCandidate {
    double value = 0.0;
    std::int64_t support = 0;
};

/// Exemplar separations from the preference sweep, merged across variants:
/// values within sigma_ref collapse to their support-weighted mean.
/// Ascending by value.
std::vector<AmplitudeCandidate> representative_amplitudes(const PtDeltaSpace& space,
                                                          const ap::ApParams& params,
                                                          double sigma_ref, int workers = 1);

/// Smallest N >= 1 with 2^N >= n_levels.
int minimum_sources(int n_levels);

/// Size-n amplitude sets drawn from the ensemble. When all combinations
/// exceed `cap`, the highest summed-support combinations are kept. When the
/// ensemble is smaller than n, every member is used at least once and the
/// shortfall is filled by repetition (flagged).
struct CandidateSet {
    std::vector<std::vector<int>> member_indices;  // each ascending into the ensemble
    bool repetition_used = false;
};
CandidateSet candidate_solutions(const std::vector<AmplitudeCandidate>& ensemble, int n,
                                 std::int64_t cap);

/// Maximum-likelihood baseline on a grid: candidates span
/// [min mu - sum(amplitudes), max mu] in steps of median(level sigma)/4, and
/// each is scored by the summed log density of its 2^N configuration points
/// under the occupancy-weighted Gaussian level mixture (floored at
/// 1e-12 * peak). Ties take the smaller baseline.
struct BaselineFit {
    double baseline = 0.0;
    double log_likelihood = 0.0;
};
BaselineFit optimal_baseline(std::span<const double> amplitudes,
                             const std::vector<Level>& levels);

struct MapperTolerances {
    double violation_tolerance = 0.02;  // fraction of transitions allowed multi-flip
    double mismatch_tolerance = 1.0;    // sigma units of mean level-to-configuration error
};

/// Static + dynamic fit of one amplitude set at one baseline.
struct CostBreakdown {
    double cost = 0.0;              // mismatch_metric + violation_metric, in [0, 2]
    double mismatch_metric = 0.0;   // clamped mean sigma-distance of levels to configs
    double violation_metric = 0.0;  // clamped share of multi-flip transitions
    std::int64_t violations = 0;
    std::int64_t transitions = 0;
    std::vector<std::int32_t> level_to_config;
};
CostBreakdown evaluate_cost(const std::vector<StateConfiguration>& configurations,
                            const std::vector<Level>& levels,
                            const std::vector<std::int32_t>& quantized,
                            const MapperTolerances& tolerances);

struct CandidateSolution {
    std::vector<double> amplitudes;  // ascending
    double baseline = 0.0;
    std::vector<StateConfiguration> configurations;  // mask order
    std::vector<std::int32_t> level_to_config;
    double cost = 0.0;
    double mismatch_metric = 0.0;
    double violation_metric = 0.0;
    std::int64_t violations = 0;
    std::int64_t transitions = 0;
};

struct Solution {
    CandidateSolution candidate;
    std::vector<ActivityTrace> source_traces;           // one per amplitude
    std::vector<std::int32_t> quantized_reconstruction; // per-sample configuration index
    std::int64_t n_transitions = 0;
    bool amplitude_repetition = false;
};

struct MapperParams {
    ap::ApParams ap;
    MapperTolerances tolerances;
    std::int64_t candidate_cap = 20000;
    int max_extra_sources = 3;  // hypotheses run up to minimum_sources(L) + this
};

/// Outcome of the escalation over source-count hypotheses. No solution with
/// cost < 2 at any hypothesis is a legitimate no-result (non-convergence),
/// not an error.
struct MapOutcome {
    std::optional<Solution> solution;
    std::string failure_reason;
    int first_hypothesis = 0;
    int last_hypothesis = 0;
    double best_cost = 0.0;  // best cost seen anywhere in the escalation
};

MapOutcome map_sources(const levels::FeatureModel& model, const MapperParams& params,
                       int workers = 1);

}  // namespace rtn::mapper
