#include "rtn/sources_mapper.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "rtn/parallel.hpp"

namespace rtn::mapper {

namespace {

constexpr double kDensityFloorRatio = 1e-12;
constexpr double kMixtureWindowSigmas = 9.0;  // beyond this a component is below the floor

std::int64_t saturating_choose(std::int64_t m, std::int64_t n, std::int64_t limit) {
    if (n < 0 || n > m) return 0;
    n = std::min(n, m - n);
    std::int64_t result = 1;
    for (std::int64_t i = 1; i <= n; ++i) {
        const double projected = static_cast<double>(result) * static_cast<double>(m - n + i) /
                                 static_cast<double>(i);
        if (projected >= static_cast<double>(limit)) return limit;
        result = result * (m - n + i) / i;  // exact: product of i consecutive ints divides i!
    }
    return result;
}

/// Occupancy-weighted Gaussian mixture over a sorted level set, with a
/// floored log density so unmatched configurations stay finite.
class LevelMixture {
  public:
    explicit LevelMixture(const std::vector<Level>& levels) : levels_(levels) {
        double total = 0.0;
        max_sigma_ = 0.0;
        for (const auto& level : levels) {
            if (!(level.sigma > 0.0)) throw InvalidSigma("level mixture: sigma must be > 0");
            total += static_cast<double>(level.count);
            max_sigma_ = std::max(max_sigma_, level.sigma);
        }
        if (!(total > 0.0)) throw EmptyInput("level mixture: no occupancy");
        weights_.reserve(levels.size());
        static constexpr double inv_sqrt_two_pi = 0.39894228040143267794;
        for (const auto& level : levels) {
            weights_.push_back(static_cast<double>(level.count) / total * inv_sqrt_two_pi /
                               level.sigma);
        }
        double peak = 0.0;
        for (const auto& level : levels) peak = std::max(peak, density(level.mu));
        floor_ = kDensityFloorRatio * peak;
        log_floor_ = std::log(floor_);
    }

    double density(double x) const {
        // Components further than the window from x cannot clear the floor.
        const double reach = kMixtureWindowSigmas * max_sigma_;
        const auto first = std::lower_bound(
            levels_.begin(), levels_.end(), x - reach,
            [](const Level& level, double bound) { return level.mu < bound; });
        double f = 0.0;
        for (auto it = first; it != levels_.end() && it->mu <= x + reach; ++it) {
            const double z = (x - it->mu) / it->sigma;
            if (std::abs(z) > kMixtureWindowSigmas) continue;
            f += weights_[static_cast<std::size_t>(it - levels_.begin())] *
                 std::exp(-0.5 * z * z);
        }
        return f;
    }

    double log_density_floored(double x) const {
        const double f = density(x);
        return (f > floor_) ? std::log(f) : log_floor_;
    }

  private:
    const std::vector<Level>& levels_;
    std::vector<double> weights_;
    double max_sigma_ = 0.0;
    double floor_ = 0.0;
    double log_floor_ = 0.0;
};

double median_level_sigma(const std::vector<Level>& levels) {
    std::vector<double> sigmas;
    sigmas.reserve(levels.size());
    for (const auto& level : levels) sigmas.push_back(level.sigma);
    std::sort(sigmas.begin(), sigmas.end());
    return median_sorted(sigmas);
}

}  // namespace

std::int64_t TransitionMatrix::row_total(int i) const {
    std::int64_t total = 0;
    for (int j = 0; j < n_levels; ++j) total += c(i, j);
    return total;
}

TransitionMatrix transition_matrix(const std::vector<std::int32_t>& quantized, int n_levels) {
    if (quantized.empty()) throw EmptyInput("transition_matrix: empty assignment");
    if (n_levels < 1) throw std::invalid_argument("transition_matrix: n_levels must be >= 1");
    const auto n = static_cast<std::size_t>(n_levels);
    TransitionMatrix tm;
    tm.n_levels = n_levels;
    tm.counts.assign(n * n, 0);
    tm.probabilities.assign(n * n, 0.0);
    for (std::size_t t = 1; t < quantized.size(); ++t) {
        const auto from = static_cast<std::size_t>(quantized[t - 1]);
        const auto to = static_cast<std::size_t>(quantized[t]);
        if (from >= n || to >= n) throw std::out_of_range("transition_matrix: level index");
        ++tm.counts[from * n + to];
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t row = 0;
        for (std::size_t j = 0; j < n; ++j) row += tm.counts[i * n + j];
        if (row == 0) {
            tm.probabilities[i * n + i] = 1.0;  // absorbing by convention
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                tm.probabilities[i * n + j] =
                    static_cast<double>(tm.counts[i * n + j]) / static_cast<double>(row);
            }
        }
    }
    return tm;
}

PtDeltaSpace build_pt_delta_space(const std::vector<Level>& levels,
                                  const TransitionMatrix& transitions) {
    if (levels.size() < 2) throw NoPairs("pt-delta space needs at least two levels");
    if (transitions.n_levels != static_cast<int>(levels.size())) {
        throw LengthMismatch("pt-delta: levels vs transition matrix");
    }
    PtDeltaSpace space;
    space.points.reserve(levels.size() * (levels.size() - 1) / 2);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = i + 1; j < levels.size(); ++j) {
            PtDeltaPoint point;
            point.level_i = static_cast<int>(i);
            point.level_j = static_cast<int>(j);
            point.delta = std::abs(levels[j].mu - levels[i].mu);
            point.pt = 0.5 * (transitions.p(static_cast<int>(i), static_cast<int>(j)) +
                              transitions.p(static_cast<int>(j), static_cast<int>(i)));
            point.delta_error = std::sqrt(levels[i].sigma * levels[i].sigma +
                                          levels[j].sigma * levels[j].sigma);
            const std::int64_t n_out = transitions.row_total(static_cast<int>(i)) +
                                       transitions.row_total(static_cast<int>(j));
            if (n_out > 0) {
                const double se = std::sqrt(point.pt * (1.0 - point.pt) /
                                            static_cast<double>(n_out));
                point.pt_error = std::max(se, 1.0 / static_cast<double>(n_out));
            } else {
                point.pt_error = 1.0;
            }
            space.points.push_back(point);
        }
    }

    std::vector<double> delta_errors, pt_errors;
    delta_errors.reserve(space.points.size());
    pt_errors.reserve(space.points.size());
    for (const auto& point : space.points) {
        delta_errors.push_back(point.delta_error);
        pt_errors.push_back(point.pt_error);
    }
    std::sort(delta_errors.begin(), delta_errors.end());
    std::sort(pt_errors.begin(), pt_errors.end());
    space.delta_scale = median_sorted(delta_errors);
    space.pt_scale = median_sorted(pt_errors);
    for (auto& point : space.points) {
        point.x = point.delta / space.delta_scale;
        point.y = point.pt / space.pt_scale;
    }
    return space;
}

std::vector<AmplitudeCandidate> representative_amplitudes(const PtDeltaSpace& space,
                                                          const ap::ApParams& params,
                                                          double sigma_ref, int workers) {
    if (space.points.empty()) throw EmptyInput("representative_amplitudes: no points");
    if (!(sigma_ref > 0.0)) throw InvalidSigma("representative_amplitudes: sigma_ref");

    std::vector<ap::Point2> points;
    points.reserve(space.points.size());
    for (const auto& point : space.points) points.push_back({point.x, point.y});
    const auto sweep = ap_sweep(points, params, workers);

    struct Exemplar {
        double delta;
        std::int64_t support;
    };
    std::vector<Exemplar> pool;
    for (const auto& clustering : sweep) {
        for (int exemplar : clustering.exemplar_indices) {
            std::int64_t cluster_size = 0;
            for (int assigned : clustering.assignment) {
                if (assigned == exemplar) ++cluster_size;
            }
            pool.push_back({space.points[static_cast<std::size_t>(exemplar)].delta,
                            cluster_size});
        }
    }
    std::sort(pool.begin(), pool.end(), [](const Exemplar& a, const Exemplar& b) {
        return a.delta < b.delta || (a.delta == b.delta && a.support > b.support);
    });

    // Merge near-duplicates into their support-weighted mean; values within
    // sigma_ref of the running group belong to it.
    std::vector<AmplitudeCandidate> ensemble;
    double group_weighted_sum = 0.0;
    std::int64_t group_support = 0;
    double group_anchor = 0.0;
    auto flush = [&]() {
        if (group_support > 0) {
            ensemble.push_back({group_weighted_sum / static_cast<double>(group_support),
                                group_support});
        }
    };
    for (const auto& exemplar : pool) {
        if (group_support > 0 && exemplar.delta - group_anchor > sigma_ref) {
            flush();
            group_weighted_sum = 0.0;
            group_support = 0;
        }
        if (group_support == 0) group_anchor = exemplar.delta;
        group_weighted_sum += exemplar.delta * static_cast<double>(exemplar.support);
        group_support += exemplar.support;
    }
    flush();
    return ensemble;
}

int minimum_sources(int n_levels) {
    if (n_levels < 1) throw std::invalid_argument("minimum_sources: n_levels must be >= 1");
    int n = 1;
    while ((std::int64_t(1) << n) < n_levels) ++n;
    return n;
}

CandidateSet candidate_solutions(const std::vector<AmplitudeCandidate>& ensemble, int n,
                                 std::int64_t cap) {
    if (ensemble.empty()) throw EmptyInput("candidate_solutions: empty ensemble");
    if (n < 1) throw std::invalid_argument("candidate_solutions: n must be >= 1");
    if (cap < 1) throw std::invalid_argument("candidate_solutions: cap must be >= 1");
    const auto m = static_cast<std::int64_t>(ensemble.size());
    CandidateSet set;

    if (m < n) {
        // Too few distinct values: use every member once and distribute the
        // remaining n - m slots over the members (all such multisets).
        set.repetition_used = true;
        std::vector<int> counts(static_cast<std::size_t>(m), 1);
        std::vector<std::vector<int>> combos;
        std::vector<int> extra(static_cast<std::size_t>(m), 0);
        const int shortfall = n - static_cast<int>(m);
        auto emit = [&]() {
            std::vector<int> combo;
            combo.reserve(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < m; ++i) {
                for (int r = 0; r < 1 + extra[static_cast<std::size_t>(i)]; ++r) {
                    combo.push_back(static_cast<int>(i));
                }
            }
            combos.push_back(std::move(combo));
        };
        // Stars and bars over `extra`, lexicographic.
        std::function<void(std::int64_t, int)> distribute = [&](std::int64_t index,
                                                                int remaining) {
            if (index == m - 1) {
                extra[static_cast<std::size_t>(index)] = remaining;
                emit();
                return;
            }
            for (int take = remaining; take >= 0; --take) {
                extra[static_cast<std::size_t>(index)] = take;
                distribute(index + 1, remaining - take);
            }
        };
        distribute(0, shortfall);
        if (static_cast<std::int64_t>(combos.size()) > cap) combos.resize(static_cast<std::size_t>(cap));
        set.member_indices = std::move(combos);
        return set;
    }

    // Rank members by support so a cap keeps the best-backed combinations.
    std::vector<int> by_support(static_cast<std::size_t>(m));
    std::iota(by_support.begin(), by_support.end(), 0);
    std::stable_sort(by_support.begin(), by_support.end(), [&](int a, int b) {
        return ensemble[static_cast<std::size_t>(a)].support >
               ensemble[static_cast<std::size_t>(b)].support;
    });

    std::int64_t prefix = m;
    if (saturating_choose(m, n, cap + 1) > cap) {
        prefix = n;
        while (saturating_choose(prefix, n, cap + 1) <= cap) ++prefix;
    }

    std::vector<int> chosen_members(by_support.begin(), by_support.begin() + prefix);
    std::sort(chosen_members.begin(), chosen_members.end());

    std::vector<std::vector<int>> combos;
    std::vector<int> combo(static_cast<std::size_t>(n));
    std::function<void(std::int64_t, int)> enumerate = [&](std::int64_t start, int depth) {
        if (depth == n) {
            combos.emplace_back(combo);
            return;
        }
        for (std::int64_t i = start; i <= static_cast<std::int64_t>(chosen_members.size()) -
                                              (n - depth);
             ++i) {
            combo[static_cast<std::size_t>(depth)] = chosen_members[static_cast<std::size_t>(i)];
            enumerate(i + 1, depth + 1);
        }
    };
    enumerate(0, 0);

    if (static_cast<std::int64_t>(combos.size()) > cap) {
        std::vector<std::int64_t> score(combos.size(), 0);
        for (std::size_t i = 0; i < combos.size(); ++i) {
            for (int member : combos[i]) {
                score[i] += ensemble[static_cast<std::size_t>(member)].support;
            }
        }
        std::vector<std::size_t> order(combos.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return combos[a] < combos[b];
        });
        order.resize(static_cast<std::size_t>(cap));
        std::sort(order.begin(), order.end());  // keep lexicographic combo order
        std::vector<std::vector<int>> kept;
        kept.reserve(order.size());
        for (std::size_t index : order) kept.push_back(std::move(combos[index]));
        combos = std::move(kept);
    }
    set.member_indices = std::move(combos);
    return set;
}

BaselineFit optimal_baseline(std::span<const double> amplitudes,
                             const std::vector<Level>& levels) {
    if (amplitudes.empty()) throw EmptyInput("optimal_baseline: no amplitudes");
    if (levels.empty()) throw EmptyInput("optimal_baseline: no levels");
    for (double a : amplitudes) {
        if (!(a > 0.0)) throw std::invalid_argument("optimal_baseline: amplitudes must be > 0");
    }

    double amplitude_sum = 0.0;
    for (double a : amplitudes) amplitude_sum += a;
    const double lo = levels.front().mu - amplitude_sum;
    const double hi = levels.back().mu;
    const double step = median_level_sigma(levels) / 4.0;
    if (!(step > 0.0)) throw InvalidSigma("optimal_baseline: degenerate level sigma");

    // Subset sums in mask order; the scan only needs offsets, the returned
    // candidate re-derives exact configuration values from the baseline.
    const auto n_sources = amplitudes.size();
    const std::size_t n_configs = std::size_t(1) << n_sources;
    std::vector<double> offsets(n_configs, 0.0);
    for (std::size_t mask = 1; mask < n_configs; ++mask) {
        const auto low_bit = static_cast<std::size_t>(std::countr_zero(mask));
        offsets[mask] = offsets[mask & (mask - 1)] + amplitudes[low_bit];
    }

    const LevelMixture mixture(levels);
    const auto n_steps = static_cast<std::int64_t>(std::floor((hi - lo) / step));
    BaselineFit best;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i <= n_steps; ++i) {
        const double b = lo + static_cast<double>(i) * step;
        double ll = 0.0;
        for (std::size_t mask = 0; mask < n_configs; ++mask) {
            ll += mixture.log_density_floored(b + offsets[mask]);
        }
        if (ll > best.log_likelihood) {  // strict: ties keep the smaller baseline
            best.log_likelihood = ll;
            best.baseline = b;
        }
    }
    return best;
}

CostBreakdown evaluate_cost(const std::vector<StateConfiguration>& configurations,
                            const std::vector<Level>& levels,
                            const std::vector<std::int32_t>& quantized,
                            const MapperTolerances& tolerances) {
    if (configurations.empty()) throw EmptyInput("evaluate_cost: no configurations");
    if (levels.empty()) throw EmptyInput("evaluate_cost: no levels");
    if (quantized.empty()) throw EmptyInput("evaluate_cost: empty assignment");
    if (!(tolerances.violation_tolerance > 0.0) || !(tolerances.mismatch_tolerance > 0.0)) {
        throw std::invalid_argument("evaluate_cost: tolerances must be > 0");
    }

    CostBreakdown result;
    result.level_to_config.resize(levels.size());
    double mismatch_sum = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        std::size_t best = 0;
        double best_distance = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < configurations.size(); ++k) {
            const double distance = std::abs(levels[i].mu - configurations[k].total_amplitude);
            if (distance < best_distance) {
                best_distance = distance;
                best = k;
            }
        }
        result.level_to_config[i] = static_cast<std::int32_t>(best);
        mismatch_sum += best_distance / levels[i].sigma;
    }
    const double mean_mismatch = mismatch_sum / static_cast<double>(levels.size());
    result.mismatch_metric = std::min(1.0, mean_mismatch / tolerances.mismatch_tolerance);

    std::uint32_t previous_mask =
        configurations[static_cast<std::size_t>(
                           result.level_to_config[static_cast<std::size_t>(quantized[0])])]
            .on_mask;
    for (std::size_t t = 1; t < quantized.size(); ++t) {
        const std::uint32_t mask =
            configurations[static_cast<std::size_t>(
                               result.level_to_config[static_cast<std::size_t>(quantized[t])])]
                .on_mask;
        if (mask != previous_mask) {
            ++result.transitions;
            if (std::popcount(mask ^ previous_mask) > 1) ++result.violations;
            previous_mask = mask;
        }
    }
    if (result.transitions > 0) {
        result.violation_metric =
            std::min(1.0, static_cast<double>(result.violations) /
                              (tolerances.violation_tolerance *
                               static_cast<double>(result.transitions)));
    }
    result.cost = result.mismatch_metric + result.violation_metric;
    return result;
}

namespace {

int distinct_amplitudes(const std::vector<double>& amplitudes) {
    int distinct = 1;
    for (std::size_t i = 1; i < amplitudes.size(); ++i) {
        if (amplitudes[i] != amplitudes[i - 1]) ++distinct;
    }
    return distinct;
}

}  // namespace

MapOutcome map_sources(const levels::FeatureModel& model, const MapperParams& params,
                       int workers) {
    MapOutcome outcome;
    outcome.best_cost = std::numeric_limits<double>::infinity();
    const auto n_levels = static_cast<int>(model.levels.size());
    if (n_levels < 2) {
        outcome.failure_reason = "single-level model: no source structure detected";
        return outcome;
    }

    const auto transitions = transition_matrix(model.quantized, n_levels);
    const auto space = build_pt_delta_space(model.levels, transitions);
    const double sigma_ref = median_level_sigma(model.levels);
    const auto ensemble = representative_amplitudes(space, params.ap, sigma_ref, workers);

    const int n_min = minimum_sources(n_levels);
    const int n_max = n_min + params.max_extra_sources;
    outcome.first_hypothesis = n_min;

    for (int hypothesis = n_min; hypothesis <= n_max; ++hypothesis) {
        outcome.last_hypothesis = hypothesis;
        const auto candidates = candidate_solutions(ensemble, hypothesis, params.candidate_cap);
        const auto n_candidates = static_cast<std::int64_t>(candidates.member_indices.size());

        std::vector<CandidateSolution> evaluated(static_cast<std::size_t>(n_candidates));
        parallel_for(n_candidates, workers, [&](std::int64_t index) {
            auto& result = evaluated[static_cast<std::size_t>(index)];
            const auto& members = candidates.member_indices[static_cast<std::size_t>(index)];
            result.amplitudes.reserve(members.size());
            for (int member : members) {
                result.amplitudes.push_back(ensemble[static_cast<std::size_t>(member)].value);
            }
            const auto fit = optimal_baseline(result.amplitudes, model.levels);
            result.baseline = fit.baseline;
            result.configurations = make_configurations(result.baseline, result.amplitudes);
            auto cost = evaluate_cost(result.configurations, model.levels, model.quantized,
                                      params.tolerances);
            result.cost = cost.cost;
            result.mismatch_metric = cost.mismatch_metric;
            result.violation_metric = cost.violation_metric;
            result.violations = cost.violations;
            result.transitions = cost.transitions;
            result.level_to_config = std::move(cost.level_to_config);
        });

        std::int64_t best = -1;
        for (std::int64_t index = 0; index < n_candidates; ++index) {
            if (best < 0) {
                best = index;
                continue;
            }
            const auto& challenger = evaluated[static_cast<std::size_t>(index)];
            const auto& incumbent = evaluated[static_cast<std::size_t>(best)];
            if (challenger.cost < incumbent.cost) {
                best = index;
            } else if (challenger.cost == incumbent.cost) {
                const int challenger_distinct = distinct_amplitudes(challenger.amplitudes);
                const int incumbent_distinct = distinct_amplitudes(incumbent.amplitudes);
                if (challenger_distinct < incumbent_distinct ||
                    (challenger_distinct == incumbent_distinct &&
                     challenger.amplitudes < incumbent.amplitudes)) {
                    best = index;
                }
            }
        }
        if (best < 0) continue;
        auto& winner = evaluated[static_cast<std::size_t>(best)];
        outcome.best_cost = std::min(outcome.best_cost, winner.cost);
        if (winner.cost >= 2.0) continue;  // both metrics saturated: reject hypothesis

        Solution solution;
        solution.amplitude_repetition = candidates.repetition_used;
        solution.candidate = std::move(winner);
        const auto& l2c = solution.candidate.level_to_config;
        solution.quantized_reconstruction.resize(model.quantized.size());
        for (std::size_t t = 0; t < model.quantized.size(); ++t) {
            solution.quantized_reconstruction[t] =
                l2c[static_cast<std::size_t>(model.quantized[t])];
        }
        solution.source_traces.assign(static_cast<std::size_t>(hypothesis), ActivityTrace{});
        for (auto& trace : solution.source_traces) {
            trace.states.resize(model.quantized.size());
        }
        std::int64_t transitions_seen = 0;
        std::uint32_t previous_mask = 0;
        for (std::size_t t = 0; t < solution.quantized_reconstruction.size(); ++t) {
            const std::uint32_t mask =
                solution.candidate
                    .configurations[static_cast<std::size_t>(
                        solution.quantized_reconstruction[t])]
                    .on_mask;
            for (int k = 0; k < hypothesis; ++k) {
                solution.source_traces[static_cast<std::size_t>(k)].states[t] =
                    static_cast<std::uint8_t>((mask >> k) & 1u);
            }
            if (t > 0 && mask != previous_mask) ++transitions_seen;
            previous_mask = mask;
        }
        solution.n_transitions = transitions_seen;
        outcome.solution = std::move(solution);
        return outcome;
    }

    outcome.failure_reason = "no amplitude set reached cost < 2 at any hypothesis";
    return outcome;
}

}  // namespace rtn::mapper
