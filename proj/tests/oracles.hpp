#pragma once

// Test-only oracles, independent of the implementation paths they check:
// exact joint sampling of (endpoint, running max) of a drifted Brownian
// motion via the bridge-maximum law, an inverse-Gaussian first-passage
// sampler, and canned parameter sets.

#include <cmath>
#include <utility>

#include "benchtrack/params.hpp"
#include "benchtrack/rng.hpp"

namespace testutil {

inline benchtrack::ModelParams base_params(double rho = 3.0, double p = 0.5) {
  benchtrack::MarketParams m{1, {0.1}, {1.0}};
  benchtrack::BenchmarkParams b;
  b.mu_Z = 0.1;
  b.sigma_Z = 0.1;
  b.mu_B = 0.1;
  b.sigma_B = 0.1;
  b.gamma = {1.0};
  b.eta = {1.0};
  b.z0 = 0.8;
  b.m0 = 0.0;
  b.b0 = -0.5;
  benchtrack::PreferenceParams pref{p, rho, 1.0};
  return benchtrack::make_model(m, b, pref);
}

inline benchtrack::ModelParams growth_params() {
  benchtrack::MarketParams m{1, {0.1}, {1.0}};
  benchtrack::BenchmarkParams b;
  b.mu_Z = 2.0;
  b.sigma_Z = 1.0;
  b.mu_B = 2.0;
  b.sigma_B = 0.0;
  b.gamma = {1.0};
  b.eta = {1.0};
  b.z0 = 0.8;
  b.m0 = 0.0;
  b.b0 = 1.0;
  benchtrack::PreferenceParams pref{0.5, 6.0, 1.0};
  return benchtrack::make_model(m, b, pref);
}

/// Exact draw of (W_T, max_{s<=T} W_s) for W_t = mu t + sigma B_t: endpoint
/// first, then the bridge maximum by inverting its conditional law.
inline std::pair<double, double> sample_endpoint_max(benchtrack::PathRng& rng,
                                                     double T, double mu,
                                                     double sigma) {
  const double w = mu * T + sigma * std::sqrt(T) * rng.normal();
  double u = rng.u01();
  if (u <= 0.0) u = 1e-300;
  const double m =
      0.5 * (w + std::sqrt(w * w - 2.0 * sigma * sigma * T * std::log(u)));
  return {w, m};
}

/// Exact draw of the reflected (at zero) endpoint X_T for the process
/// x0 + mu t + sigma B_t + regulator, via X_T = max(x0 + W_T, M~_T) with
/// (W_T, M~_T) the endpoint/max pair of the time-reversed driver.
inline double sample_reflected_endpoint(benchtrack::PathRng& rng, double T,
                                        double x0, double mu, double sigma) {
  const auto [w, m] = sample_endpoint_max(rng, T, mu, sigma);
  return std::max(x0 + w, m);
}

/// Exact first-passage time of level h > 0 for mu t + sigma B_t with
/// mu > 0: inverse Gaussian with mean h/mu and shape (h/sigma)^2
/// (Michael-Schucany-Haas).
inline double sample_first_passage(benchtrack::PathRng& rng, double h,
                                   double mu, double sigma) {
  const double mean = h / mu;
  const double lambda = h * h / (sigma * sigma);
  const double nu = rng.normal();
  const double y = nu * nu;
  const double x = mean + mean * mean * y / (2.0 * lambda) -
                   mean / (2.0 * lambda) *
                       std::sqrt(4.0 * mean * lambda * y +
                                 mean * mean * y * y);
  const double u = rng.u01();
  if (u <= mean / (mean + x)) return x;
  return mean * mean / x;
}

}  // namespace testutil
