#include "benchtrack/estimate.hpp"

#include "benchtrack/errors.hpp"

namespace benchtrack {

namespace {
double pairwise_sum_range(const double* xs, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += xs[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(xs, half) + pairwise_sum_range(xs + half, n - half);
}
}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise_sum_range(xs.data(), xs.size());
}

Estimate mean_estimate(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) throw ConfigError("mean_estimate: empty sample");
  const double mean = pairwise_sum(xs) / static_cast<double>(n);
  if (n == 1) return {mean, 0.0, 1, 0.0};
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n)), n, 0.0};
}

Estimate mean_estimate_antithetic(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2 || n % 2 != 0) {
    throw ConfigError("mean_estimate_antithetic: need an even sample size");
  }
  std::vector<double> mids(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    mids[k] = 0.5 * (xs[2 * k] + xs[2 * k + 1]);
  }
  Estimate e = mean_estimate(mids);
  e.n = n;  // raw path count; pairs drive the error bar
  return e;
}

}  // namespace benchtrack
