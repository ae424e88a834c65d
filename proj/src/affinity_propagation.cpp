#include "rtn/affinity_propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtn/parallel.hpp"

namespace rtn::ap {

namespace {

void validate(const ApParams& params) {
    if (!(params.damping >= 0.5) || !(params.damping < 1.0)) {
        throw std::invalid_argument("ap: damping must be in [0.5, 1)");
    }
    if (params.max_iterations < 1) throw std::invalid_argument("ap: max_iterations must be >= 1");
    if (params.convergence_window < 1) {
        throw std::invalid_argument("ap: convergence_window must be >= 1");
    }
    if (params.preference_quantiles.empty()) {
        throw EmptyInput("ap: no preference quantiles");
    }
}

std::vector<double> similarity_matrix(const std::vector<Point2>& points, double preference) {
    const std::size_t n = points.size();
    std::vector<double> s(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) {
                s[i * n + k] = preference;
            } else {
                const double dx = points[i].x - points[k].x;
                const double dy = points[i].y - points[k].y;
                s[i * n + k] = -(dx * dx + dy * dy);
            }
        }
    }
    return s;
}

}  // namespace

Clustering affinity_propagation(const std::vector<Point2>& points, double preference,
                                const ApParams& params) {
    validate(params);
    const std::size_t n = points.size();
    if (n == 0) throw EmptyInput("ap: no points");
    if (n == 1) return {{0}, {0}, true};

    const auto s = similarity_matrix(points, preference);
    std::vector<double> r(n * n, 0.0);
    std::vector<double> a(n * n, 0.0);
    const double lambda = params.damping;

    // Message fixed-point tolerance, relative to the similarity scale. Without
    // it, a thresholded exemplar vector can hold still for a full window while
    // the underlying messages are mid-oscillation (near-duplicate points fight
    // over exemplar status indefinitely), yielding a "converged" flag on a
    // transient state.
    double similarity_scale = 1.0;
    for (const double value : s) similarity_scale = std::max(similarity_scale, std::abs(value));
    const double residual_tolerance = 1e-9 * similarity_scale;

    std::vector<char> exemplar_now(n, 0);
    std::vector<char> exemplar_prev(n, 0);
    int stable_iterations = 0;
    bool converged = false;

    for (int iteration = 0; iteration < params.max_iterations; ++iteration) {
        double residual = 0.0;

        // Responsibilities: r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k')).
        for (std::size_t i = 0; i < n; ++i) {
            double max1 = -std::numeric_limits<double>::infinity();
            double max2 = -std::numeric_limits<double>::infinity();
            std::size_t arg1 = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = a[i * n + k] + s[i * n + k];
                if (v > max1) {
                    max2 = max1;
                    max1 = v;
                    arg1 = k;
                } else if (v > max2) {
                    max2 = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                const double competing = (k == arg1) ? max2 : max1;
                const double updated =
                    lambda * r[i * n + k] + (1.0 - lambda) * (s[i * n + k] - competing);
                residual = std::max(residual, std::abs(updated - r[i * n + k]));
                r[i * n + k] = updated;
            }
        }

        // Availabilities: a(i,k) <- min(0, r(k,k) + sum over positive foreign
        // responsibilities); the self-availability takes the full sum.
        for (std::size_t k = 0; k < n; ++k) {
            double positive_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i != k) positive_sum += std::max(0.0, r[i * n + k]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double fresh;
                if (i == k) {
                    fresh = positive_sum;
                } else {
                    fresh = std::min(0.0, r[k * n + k] + positive_sum -
                                              std::max(0.0, r[i * n + k]));
                }
                const double updated = lambda * a[i * n + k] + (1.0 - lambda) * fresh;
                residual = std::max(residual, std::abs(updated - a[i * n + k]));
                a[i * n + k] = updated;
            }
        }

        bool any_exemplar = false;
        for (std::size_t k = 0; k < n; ++k) {
            exemplar_now[k] = (r[k * n + k] + a[k * n + k] > 0.0) ? 1 : 0;
            if (exemplar_now[k]) any_exemplar = true;
        }
        // Converged means: a non-empty exemplar set held still for the whole
        // window AND the damped messages themselves stopped moving. An empty
        // set is never a valid solution (ramp-up transient), and a still
        // threshold over moving messages is an oscillation, not a fixed point.
        if (iteration > 0 && any_exemplar && exemplar_now == exemplar_prev) {
            ++stable_iterations;
            if (stable_iterations >= params.convergence_window &&
                residual <= residual_tolerance) {
                converged = true;
                break;
            }
        } else {
            stable_iterations = 0;
        }
        exemplar_prev = exemplar_now;
    }

    Clustering result;
    result.converged = converged;
    for (std::size_t k = 0; k < n; ++k) {
        if (exemplar_now[k]) result.exemplar_indices.push_back(static_cast<int>(k));
    }
    if (result.exemplar_indices.empty()) {
        // Degenerate run (all evidence ties at zero): fall back to the single
        // strongest self-supporting point.
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            const double v = r[k * n + k] + a[k * n + k];
            if (v > best_value) {
                best_value = v;
                best = k;
            }
        }
        result.exemplar_indices.push_back(static_cast<int>(best));
    }

    result.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int chosen = result.exemplar_indices.front();
        double best_similarity = -std::numeric_limits<double>::infinity();
        bool is_exemplar = false;
        for (int k : result.exemplar_indices) {
            if (static_cast<std::size_t>(k) == i) {
                is_exemplar = true;
                break;
            }
            const double v = s[i * n + static_cast<std::size_t>(k)];
            if (v > best_similarity) {
                best_similarity = v;
                chosen = k;
            }
        }
        result.assignment[i] = is_exemplar ? static_cast<int>(i) : chosen;
    }
    return result;
}

std::vector<Clustering> ap_sweep(const std::vector<Point2>& points, const ApParams& params,
                                 int workers) {
    validate(params);
    if (points.empty()) throw EmptyInput("ap_sweep: no points");

    std::vector<double> preferences(params.preference_quantiles.size(), 0.0);
    if (points.size() > 1) {
        std::vector<double> off_diagonal;
        off_diagonal.reserve(points.size() * (points.size() - 1));
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (std::size_t k = 0; k < points.size(); ++k) {
                if (i == k) continue;
                const double dx = points[i].x - points[k].x;
                const double dy = points[i].y - points[k].y;
                off_diagonal.push_back(-(dx * dx + dy * dy));
            }
        }
        std::sort(off_diagonal.begin(), off_diagonal.end());
        for (std::size_t v = 0; v < preferences.size(); ++v) {
            preferences[v] = quantile_sorted(off_diagonal, params.preference_quantiles[v]);
        }
    }

    std::vector<Clustering> sweep(preferences.size());
    parallel_for(static_cast<std::int64_t>(preferences.size()), workers, [&](std::int64_t v) {
        sweep[static_cast<std::size_t>(v)] =
            affinity_propagation(points, preferences[static_cast<std::size_t>(v)], params);
    });
    return sweep;
}

}  // namespace rtn::ap
