#pragma once

#include <cstdint>
#include <vector>

#include "splitmc/engine.hpp"

namespace splitmc {

/// Per-iteration ensemble statistics over a set of seeded traces sharing one
/// configuration. Aggregation sums in sorted order, so the result is
/// bit-identical under any permutation of the seed list.
struct EnsembleSummary {
    std::uint64_t config_fingerprint = 0;
    int seed_count = 0;
    std::vector<double> mean_dist, median_dist, q25_dist, q75_dist;
    std::vector<double> mean_delta, median_delta;
    std::vector<double> mean_dnorm, median_dnorm;
};

/// Iterations at which the pathwise distance-decrease inequality
///   dist_{n+1}^2 <= dist_n^2 - lambda_n (2 - lambda_n) ||d_n||^2 + tol*max(1, dist_n^2)
/// fails. Valid zero-error traces with realized lambda <= 2 yield an empty
/// list. The trace must carry the distance column.
std::vector<std::int64_t> fejer_check(const Trace& trace, double tol);

/// Deterministic aggregation of equal-length traces with matching
/// fingerprints.
EnsembleSummary summarize(const std::vector<Trace>& traces);

}  // namespace splitmc
