#pragma once

#include <cstdint>
#include <vector>

#include "rtn/core.hpp"

namespace rtn::levels {

struct ExtractorParams {
    /// New-level decision threshold on the posterior same-level probability.
    double p_threshold = 1e-15;
    /// Consecutive samples required to accept a level change.
    int continuity = 3;
    /// Number of candidate noise scales swept.
    int sigma_grid_size = 10;
    /// Upper grid endpoint: this percentile of |x_{t+1} - x_t|, MMR-corrected.
    double sigma_upper_percentile = 80.0;
    /// Reference likelihood of "this sample belongs to a new level"; the
    /// carried posterior only decays while sample likelihoods stay below it.
    double new_level_likelihood = 0.1;
};

/// Level set plus per-sample assignment selected for one noise scale.
struct FeatureModel {
    std::vector<Level> levels;          // sorted by mu, strictly increasing
    std::vector<std::int32_t> quantized;  // per-sample level index
    double sigma_init = 0.0;            // noise scale the model was built with
    double bic = 0.0;
};

/// Noise scale from the median moving range: median|x_{t+1}-x_t| / 0.9539.
/// Throws DegenerateSignal when the median difference is zero.
double estimate_sigma_mmr(const Signal& signal);

/// Evenly spaced scales from sigma_MMR up to the configured percentile of the
/// absolute differences (same correction); collapses to {sigma_MMR} when the
/// upper endpoint does not exceed the lower.
std::vector<double> sigma_grid(const Signal& signal, const ExtractorParams& params);

/// Single streaming pass growing the level set. Each sample is scored by the
/// CDF-based proximity to its nearest level (sigma-normalized distance); the
/// posterior probability that it belongs there is carried to the next sample
/// (capped at the neutral 0.5) and a new level opens when it falls below
/// p_threshold. Level means/sigmas update by streaming moments, sigma floored
/// at sigma_init. Levels are returned in creation order.
std::vector<Level> bayesian_levels(const Signal& signal, double sigma_init,
                                   const ExtractorParams& params);

/// Maps samples to nearest levels and suppresses level changes not confirmed
/// by `continuity` consecutive samples; a shorter trailing window is accepted
/// only if every remaining sample agrees. Returns per-sample level indices.
std::vector<std::int32_t> denoise(const Signal& signal, const std::vector<Level>& levels,
                                  int continuity);

/// Bayesian information criterion: -2*logL + log(n)*d with a global Gaussian
/// residual scale sigma and d = number of levels. Natural logarithms.
double bic(const Signal& signal, const std::vector<std::int32_t>& quantized,
           const std::vector<Level>& levels, double sigma);

/// Full sweep: for every grid scale, detect, denoise, prune empty levels,
/// recompute level statistics from the assignment, and score with BIC.
/// Returns the minimum-BIC model (ties: fewer levels, then smaller scale).
FeatureModel extract(const Signal& signal, const ExtractorParams& params, int workers = 1);

}  // namespace rtn::levels
