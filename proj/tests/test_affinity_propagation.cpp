#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "rtn/affinity_propagation.hpp"
#include "rtn/core.hpp"

using namespace rtn;
using namespace rtn::ap;

namespace {

double similarity(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return -(dx * dx + dy * dy);
}

double net_similarity(const std::vector<Point2>& points, const std::vector<int>& exemplars,
                      double preference) {
    double total = static_cast<double>(exemplars.size()) * preference;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::find(exemplars.begin(), exemplars.end(), static_cast<int>(i)) !=
            exemplars.end()) {
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int e : exemplars) {
            best = std::max(best, similarity(points[i], points[static_cast<std::size_t>(e)]));
        }
        total += best;
    }
    return total;
}

// Best net similarity over every exemplar set of the given size.
double brute_force_best(const std::vector<Point2>& points, std::size_t set_size,
                        double preference) {
    const std::size_t n = points.size();
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != set_size) continue;
        std::vector<int> exemplars;
        for (std::size_t k = 0; k < n; ++k) {
            if (mask & (1u << k)) exemplars.push_back(static_cast<int>(k));
        }
        best = std::max(best, net_similarity(points, exemplars, preference));
    }
    return best;
}

double median_off_diagonal(const std::vector<Point2>& points) {
    std::vector<double> values;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t k = 0; k < points.size(); ++k) {
            if (i != k) values.push_back(similarity(points[i], points[k]));
        }
    }
    std::sort(values.begin(), values.end());
    return median_sorted(values);
}

std::vector<Point2> three_triplets(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point2> points;
    const Point2 centers[3] = {{0.0, 0.0}, {100.0, 0.0}, {0.0, 100.0}};
    for (const auto& center : centers) {
        for (int j = 0; j < 3; ++j) {
            points.push_back({center.x + rng.uniform(-0.5, 0.5),
                              center.y + rng.uniform(-0.5, 0.5)});
        }
    }
    return points;
}

void check_well_formed(const std::vector<Point2>& points, const Clustering& clustering) {
    REQUIRE(clustering.assignment.size() == points.size());
    REQUIRE(!clustering.exemplar_indices.empty());
    for (std::size_t i = 1; i < clustering.exemplar_indices.size(); ++i) {
        CHECK(clustering.exemplar_indices[i] > clustering.exemplar_indices[i - 1]);
    }
    for (int e : clustering.exemplar_indices) {
        CHECK(clustering.assignment[static_cast<std::size_t>(e)] == e);  // self-assignment
    }
    for (int target : clustering.assignment) {
        CHECK(std::find(clustering.exemplar_indices.begin(), clustering.exemplar_indices.end(),
                        target) != clustering.exemplar_indices.end());
    }
}

}  // namespace

TEST_CASE("a single point is its own exemplar") {
    const std::vector<Point2> points{{3.0, -2.0}};
    const auto clustering = affinity_propagation(points, -1.0, ApParams{});
    CHECK(clustering.exemplar_indices == std::vector<int>{0});
    CHECK(clustering.assignment == std::vector<int>{0});
    CHECK(clustering.converged);
}

TEST_CASE("duplicated identical points collapse to one exemplar") {
    const std::vector<Point2> points(6, Point2{1.5, 2.5});
    const auto sweep = ap_sweep(points, ApParams{});
    REQUIRE(sweep.size() == 3);
    for (const auto& clustering : sweep) {
        check_well_formed(points, clustering);
        CHECK(clustering.exemplar_indices.size() == 1);
    }
}

TEST_CASE("three tight triplets produce three clusters, exemplars inside each") {
    const auto points = three_triplets(501);
    const auto sweep = ap_sweep(points, ApParams{});
    REQUIRE(sweep.size() == 3);
    for (const auto& clustering : sweep) {
        check_well_formed(points, clustering);
        REQUIRE(clustering.exemplar_indices.size() == 3);
        // one exemplar per triplet: indices 0-2, 3-5, 6-8
        for (int t = 0; t < 3; ++t) {
            CHECK(clustering.exemplar_indices[static_cast<std::size_t>(t)] / 3 == t);
        }
        // every point stays in its own triplet
        for (std::size_t i = 0; i < points.size(); ++i) {
            CHECK(clustering.assignment[i] / 3 == static_cast<int>(i) / 3);
        }
    }
}

TEST_CASE("converged runs reach the brute-force net similarity for their size") {
    const auto configurations = {three_triplets(502), three_triplets(503)};
    for (const auto& points : configurations) {
        const double preference = median_off_diagonal(points);
        const auto clustering = affinity_propagation(points, preference, ApParams{});
        check_well_formed(points, clustering);
        if (!clustering.converged) continue;
        const double achieved = net_similarity(points, clustering.exemplar_indices, preference);
        const double best = brute_force_best(points, clustering.exemplar_indices.size(),
                                             preference);
        CHECK(achieved >= best - 1e-9);
    }

    // a scattered 8-point configuration without built-in cluster structure
    Rng rng(504);
    std::vector<Point2> scattered;
    for (int i = 0; i < 8; ++i) {
        scattered.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
    }
    for (const double quantile : {0.1, 0.5, 0.9}) {
        std::vector<double> off;
        for (std::size_t i = 0; i < scattered.size(); ++i) {
            for (std::size_t k = 0; k < scattered.size(); ++k) {
                if (i != k) off.push_back(similarity(scattered[i], scattered[k]));
            }
        }
        std::sort(off.begin(), off.end());
        const double preference = quantile_sorted(off, quantile);
        const auto clustering = affinity_propagation(scattered, preference, ApParams{});
        check_well_formed(scattered, clustering);
        if (!clustering.converged) continue;
        const double achieved =
            net_similarity(scattered, clustering.exemplar_indices, preference);
        const double best =
            brute_force_best(scattered, clustering.exemplar_indices.size(), preference);
        CHECK(achieved >= best - 1e-9);
    }
}

TEST_CASE("clustering is equivariant under point permutation") {
    const auto points = three_triplets(505);
    // rotate-by-4 permutation: permuted[i] = points[(i + 4) % n]
    const std::size_t n = points.size();
    std::vector<Point2> permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = points[(i + 4) % n];

    const double preference = median_off_diagonal(points);
    const auto base = affinity_propagation(points, preference, ApParams{});
    const auto moved = affinity_propagation(permuted, preference, ApParams{});

    // exemplar sets must be equal as point sets
    auto exemplar_points = [&](const std::vector<Point2>& source, const Clustering& c) {
        std::vector<std::pair<double, double>> result;
        for (int e : c.exemplar_indices) {
            result.push_back({source[static_cast<std::size_t>(e)].x,
                              source[static_cast<std::size_t>(e)].y});
        }
        std::sort(result.begin(), result.end());
        return result;
    };
    CHECK(exemplar_points(points, base) == exemplar_points(permuted, moved));

    // assignments must map to the same physical points
    for (std::size_t i = 0; i < n; ++i) {
        const auto original_target =
            points[static_cast<std::size_t>(base.assignment[(i + 4) % n])];
        const auto moved_target = permuted[static_cast<std::size_t>(moved.assignment[i])];
        CHECK(original_target.x == moved_target.x);
        CHECK(original_target.y == moved_target.y);
    }
}

TEST_CASE("sweep yields one clustering per quantile, independent of workers") {
    const auto points = three_triplets(506);
    ApParams params;
    params.preference_quantiles = {0.1, 0.25, 0.5, 0.75};
    const auto serial = ap_sweep(points, params, 1);
    const auto parallel = ap_sweep(points, params, 4);
    REQUIRE(serial.size() == 4);
    REQUIRE(parallel.size() == 4);
    for (std::size_t v = 0; v < serial.size(); ++v) {
        CHECK(serial[v].exemplar_indices == parallel[v].exemplar_indices);
        CHECK(serial[v].assignment == parallel[v].assignment);
        CHECK(serial[v].converged == parallel[v].converged);
    }
}

TEST_CASE("parameter validation") {
    const std::vector<Point2> points{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(affinity_propagation({}, -1.0, ApParams{}), EmptyInput);
    ApParams bad;
    bad.damping = 1.0;
    CHECK_THROWS_AS(affinity_propagation(points, -1.0, bad), std::invalid_argument);
    bad = ApParams{};
    bad.damping = 0.4;
    CHECK_THROWS_AS(affinity_propagation(points, -1.0, bad), std::invalid_argument);
    bad = ApParams{};
    bad.preference_quantiles = {};
    CHECK_THROWS_AS(ap_sweep(points, bad), EmptyInput);
    bad = ApParams{};
    bad.max_iterations = 0;
    CHECK_THROWS_AS(affinity_propagation(points, -1.0, bad), std::invalid_argument);
}
