#include "rtn/levels_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtn/parallel.hpp"

namespace rtn::levels {

namespace {

// Median |Z1 - Z2| for independent standard normals: sqrt(2) * probit(0.75).
constexpr double kMmrDivisor = 0.9539;

std::vector<double> sorted_abs_diffs(const Signal& signal) {
    if (signal.size() < 2) throw DegenerateSignal("signal has fewer than 2 samples");
    std::vector<double> diffs;
    diffs.reserve(signal.size() - 1);
    for (std::size_t t = 1; t < signal.size(); ++t) {
        diffs.push_back(std::abs(signal.values[t] - signal.values[t - 1]));
    }
    std::sort(diffs.begin(), diffs.end());
    return diffs;
}

struct RunningLevel {
    double mu;
    double m2 = 0.0;  // sum of squared deviations (Welford)
    std::int64_t count = 1;
    double sigma;

    RunningLevel(double value, double sigma_init) : mu(value), sigma(sigma_init) {}

    void add(double value, double sigma_init) {
        ++count;
        const double delta = value - mu;
        mu += delta / static_cast<double>(count);
        m2 += delta * (value - mu);
        sigma = std::max(std::sqrt(m2 / static_cast<double>(count)), sigma_init);
    }
};

template <typename LevelLike>
std::size_t nearest_level(const std::vector<LevelLike>& levels, double value) {
    std::size_t best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double distance = std::abs(value - levels[i].mu) / levels[i].sigma;
        if (distance < best_distance) {
            best_distance = distance;
            best = i;
        }
    }
    return best;
}

void validate(const ExtractorParams& params) {
    if (!(params.p_threshold > 0.0) || !(params.p_threshold < 1.0)) {
        throw std::invalid_argument("p_threshold must be in (0, 1)");
    }
    if (params.continuity < 1) throw std::invalid_argument("continuity must be >= 1");
    if (params.sigma_grid_size < 1) throw std::invalid_argument("sigma_grid_size must be >= 1");
    if (!(params.sigma_upper_percentile > 50.0) || params.sigma_upper_percentile > 100.0) {
        throw std::invalid_argument("sigma_upper_percentile must be in (50, 100]");
    }
    if (!(params.new_level_likelihood > 0.0) || !(params.new_level_likelihood < 1.0)) {
        throw std::invalid_argument("new_level_likelihood must be in (0, 1)");
    }
}

}  // namespace

double estimate_sigma_mmr(const Signal& signal) {
    const auto diffs = sorted_abs_diffs(signal);
    const double med = median_sorted(diffs);
    if (!(med > 0.0)) throw DegenerateSignal("median consecutive difference is zero");
    return med / kMmrDivisor;
}

std::vector<double> sigma_grid(const Signal& signal, const ExtractorParams& params) {
    validate(params);
    const auto diffs = sorted_abs_diffs(signal);
    const double med = median_sorted(diffs);
    if (!(med > 0.0)) throw DegenerateSignal("median consecutive difference is zero");
    const double lower = med / kMmrDivisor;
    const double upper =
        quantile_sorted(diffs, params.sigma_upper_percentile / 100.0) / kMmrDivisor;
    if (upper <= lower || params.sigma_grid_size == 1) return {lower};
    std::vector<double> grid(static_cast<std::size_t>(params.sigma_grid_size));
    const double step = (upper - lower) / static_cast<double>(params.sigma_grid_size - 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = lower + step * static_cast<double>(i);
    }
    grid.back() = upper;  // endpoint inclusive regardless of rounding
    return grid;
}

std::vector<Level> bayesian_levels(const Signal& signal, double sigma_init,
                                   const ExtractorParams& params) {
    validate(params);
    if (!(sigma_init > 0.0)) throw InvalidSigma("bayesian_levels: sigma_init must be > 0");
    if (signal.values.empty()) throw EmptyInput("bayesian_levels: empty signal");

    // Posterior bookkeeping in log-odds: s = logit(P(same level)), capped at
    // the neutral logit(0.5) = 0 so detection latency stays bounded.
    const double decision = std::log(params.p_threshold) - std::log1p(-params.p_threshold);
    const double log_alt = std::log(params.new_level_likelihood);

    std::vector<RunningLevel> running;
    running.reserve(32);
    running.emplace_back(signal.values[0], sigma_init);
    double log_odds = 0.0;

    for (std::size_t t = 1; t < signal.size(); ++t) {
        const double d = signal.values[t];
        const std::size_t near = nearest_level(running, d);
        const double likelihood = proximity(d, running[near].mu, running[near].sigma);
        const bool open_new =
            (likelihood == 0.0) || (log_odds + std::log(likelihood) - log_alt < decision);
        if (open_new) {
            running.emplace_back(d, sigma_init);
            log_odds = 0.0;
        } else {
            running[near].add(d, sigma_init);
            log_odds = std::min(0.0, log_odds + std::log(likelihood) - log_alt);
        }
    }

    std::vector<Level> levels;
    levels.reserve(running.size());
    for (const auto& r : running) levels.push_back({r.mu, r.sigma, r.count});
    return levels;
}

std::vector<std::int32_t> denoise(const Signal& signal, const std::vector<Level>& levels,
                                  int continuity) {
    if (levels.empty()) throw EmptyInput("denoise: no levels");
    if (signal.values.empty()) throw EmptyInput("denoise: empty signal");
    if (continuity < 1) throw std::invalid_argument("denoise: continuity must be >= 1");
    for (const auto& level : levels) {
        if (!(level.sigma > 0.0)) throw InvalidSigma("denoise: level sigma must be > 0");
    }

    const std::size_t n = signal.size();
    const auto c = static_cast<std::size_t>(continuity);
    std::vector<std::int32_t> nearest(n);
    for (std::size_t t = 0; t < n; ++t) {
        nearest[t] = static_cast<std::int32_t>(nearest_level(levels, signal.values[t]));
    }

    std::vector<std::int32_t> quantized(n);
    std::int32_t current = nearest[0];
    quantized[0] = current;
    bool before_first_accept = true;
    for (std::size_t t = 1; t < n; ++t) {
        if (nearest[t] == current) {
            quantized[t] = current;
            continue;
        }
        const std::int32_t candidate = nearest[t];
        const std::size_t window_end = std::min(t + c, n);
        bool confirmed = true;
        for (std::size_t u = t; u < window_end; ++u) {
            if (nearest[u] != candidate) {
                confirmed = false;
                break;
            }
        }
        if (confirmed) {
            // A change confirmed before the first run reaches full length
            // absorbs the startup samples, keeping all non-final runs >= c.
            if (before_first_accept && t < c) {
                std::fill(quantized.begin(), quantized.begin() + static_cast<std::ptrdiff_t>(t),
                          candidate);
            }
            current = candidate;
            before_first_accept = false;
        }
        quantized[t] = current;
    }
    return quantized;
}

double bic(const Signal& signal, const std::vector<std::int32_t>& quantized,
           const std::vector<Level>& levels, double sigma) {
    if (!(sigma > 0.0)) throw InvalidSigma("bic: sigma must be > 0");
    if (signal.values.empty()) throw EmptyInput("bic: empty signal");
    if (quantized.size() != signal.size()) throw LengthMismatch("bic: quantized vs signal");

    double rss = 0.0;
    for (std::size_t t = 0; t < signal.size(); ++t) {
        const auto index = static_cast<std::size_t>(quantized[t]);
        if (index >= levels.size()) throw std::out_of_range("bic: level index");
        const double r = signal.values[t] - levels[index].mu;
        rss += r * r;
    }
    const auto n = static_cast<double>(signal.size());
    static constexpr double log_two_pi = 1.8378770664093454836;
    const double log_likelihood =
        -0.5 * n * log_two_pi - 0.5 * n * std::log(sigma * sigma) - rss / (2.0 * sigma * sigma);
    return -2.0 * log_likelihood +
           std::log(n) * static_cast<double>(levels.size());
}

namespace {

FeatureModel build_model(const Signal& signal, const ExtractorParams& params,
                         double sigma_init) {
    FeatureModel model;
    model.sigma_init = sigma_init;
    const auto raw = bayesian_levels(signal, sigma_init, params);
    auto quantized = denoise(signal, raw, params.continuity);

    // Keep only occupied levels and re-estimate them from their samples; the
    // streaming estimates only seeded positions and carry assimilation bias.
    std::vector<double> sum(raw.size(), 0.0);
    std::vector<double> sum_sq(raw.size(), 0.0);
    std::vector<std::int64_t> count(raw.size(), 0);
    for (std::size_t t = 0; t < quantized.size(); ++t) {
        const auto index = static_cast<std::size_t>(quantized[t]);
        const double v = signal.values[t];
        sum[index] += v;
        sum_sq[index] += v * v;
        ++count[index];
    }

    struct Rebuilt {
        Level level;
        std::size_t raw_index;
    };
    std::vector<Rebuilt> rebuilt;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (count[i] == 0) continue;
        const double n = static_cast<double>(count[i]);
        const double mu = sum[i] / n;
        const double variance = std::max(0.0, sum_sq[i] / n - mu * mu);
        rebuilt.push_back({{mu, std::max(std::sqrt(variance), sigma_init), count[i]}, i});
    }
    std::sort(rebuilt.begin(), rebuilt.end(), [](const Rebuilt& a, const Rebuilt& b) {
        return a.level.mu < b.level.mu;
    });

    // Exactly coincident means cannot stay separate (levels must be strictly
    // increasing); fold duplicates together, pooling their samples.
    std::vector<std::int32_t> remap(raw.size(), -1);
    for (const auto& entry : rebuilt) {
        if (!model.levels.empty() && model.levels.back().mu == entry.level.mu) {
            Level& kept = model.levels.back();
            const double pooled_n = static_cast<double>(kept.count + entry.level.count);
            const double pooled_var =
                (static_cast<double>(kept.count) * kept.sigma * kept.sigma +
                 static_cast<double>(entry.level.count) * entry.level.sigma * entry.level.sigma) /
                pooled_n;
            kept.sigma = std::max(std::sqrt(pooled_var), sigma_init);
            kept.count += entry.level.count;
        } else {
            model.levels.push_back(entry.level);
        }
        remap[entry.raw_index] = static_cast<std::int32_t>(model.levels.size() - 1);
    }
    for (auto& q : quantized) q = remap[static_cast<std::size_t>(q)];
    model.quantized = std::move(quantized);
    model.bic = bic(signal, model.quantized, model.levels, sigma_init);
    return model;
}

}  // namespace

FeatureModel extract(const Signal& signal, const ExtractorParams& params, int workers) {
    validate(params);
    const auto grid = sigma_grid(signal, params);
    std::vector<FeatureModel> models(grid.size());
    parallel_for(static_cast<std::int64_t>(grid.size()), workers, [&](std::int64_t i) {
        models[static_cast<std::size_t>(i)] =
            build_model(signal, params, grid[static_cast<std::size_t>(i)]);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < models.size(); ++i) {
        const auto& challenger = models[i];
        const auto& incumbent = models[best];
        if (challenger.bic < incumbent.bic ||
            (challenger.bic == incumbent.bic &&
             (challenger.levels.size() < incumbent.levels.size() ||
              (challenger.levels.size() == incumbent.levels.size() &&
               challenger.sigma_init < incumbent.sigma_init)))) {
            best = i;
        }
    }
    return std::move(models[best]);
}

}  // namespace rtn::levels
