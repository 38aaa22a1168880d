#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace benchtrack {

/// Value with a sampling standard error. Every stochastic estimator in the
/// library returns one of these; `truncation_bound` is a deterministic bound
/// on the mass discarded by cutting the time integral at the horizon.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double truncation_bound = 0.0;

  double lo(double k = 3.0) const { return value - k * std_error; }
  double hi(double k = 3.0) const { return value + k * std_error; }
};

/// Pairwise (tree) summation: order-insensitive and thread-count independent
/// for a fixed index order, with O(log n) rounding-error growth.
double pairwise_sum(std::span<const double> xs);

/// Mean and standard error of the mean via pairwise sums.
Estimate mean_estimate(std::span<const double> xs);

/// Collapses antithetic pairs (2k, 2k+1) to their midpoints, then computes
/// the mean estimate over the pair midpoints.
Estimate mean_estimate_antithetic(std::span<const double> xs);

}  // namespace benchtrack
