#pragma once

#include <vector>

#include "rtn/core.hpp"

namespace rtn::ap {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct ApParams {
    double damping = 0.9;                 // in [0.5, 1)
    int max_iterations = 1000;
    int convergence_window = 50;          // iterations the exemplar set must hold
    std::vector<double> preference_quantiles = {0.1, 0.25, 0.5};
};

struct Clustering {
    std::vector<int> exemplar_indices;  // ascending point indices
    std::vector<int> assignment;        // per point, an entry of exemplar_indices
    bool converged = false;
};

/// Message-passing exemplar clustering with negative squared Euclidean
/// similarities and a shared self-similarity (preference). Deterministic:
/// ties resolve to the lowest index and no noise is injected.
Clustering affinity_propagation(const std::vector<Point2>& points, double preference,
                                const ApParams& params);

/// One clustering per preference quantile, where each preference is that
/// quantile of the off-diagonal similarities. Members run independently.
std::vector<Clustering> ap_sweep(const std::vector<Point2>& points, const ApParams& params,
                                 int workers = 1);

}  // namespace rtn::ap
