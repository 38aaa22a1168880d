#pragma once

#include "benchtrack/params.hpp"

namespace benchtrack {

/// Drift and volatility of the scalar Brownian motion whose endpoint /
/// running-maximum pair phi1 describes.
struct DriftSpec {
  double mu_hat = 0.0;    // drift per unit time
  double sigma_hat = 1.0;  // volatility, > 0

  /// Driver of the reflected dual-log-state process: drift rho - alpha^2/2,
  /// volatility alpha.
  static DriftSpec dual_log_driver(const ModelParams& p) {
    const double a = p.derived.alpha;
    return {p.preferences.rho - 0.5 * a * a, a};
  }
};

/// Joint density of (W_s, max_{q<=s} W_q) at (x, y) for a Brownian motion
/// with drift spec.mu_hat and volatility spec.sigma_hat, supported on
/// y >= max(x, 0).
double phi1(double s, double x, double y, const DriftSpec& spec);

/// Closed form of int_{-inf}^y e^{w x} phi1(s,x,y) dx. With w = 0 this is
/// the marginal density of the running maximum.
double phi1_weighted_x_integral(double s, double y, double w,
                                const DriftSpec& spec);

/// First-passage density of level h > 0 for mu_B s + sigma_B W_s.
/// Defective when mu_B < 0: integrates to exp(2 mu_B h / sigma_B^2).
double phi2(double s, double h, double mu_B, double sigma_B);

/// Transition density at x of Brownian motion with drift `drift` and
/// volatility `vol`, reflected at 0, started at x0, after time s.
double rdbm_density(double s, double x0, double x, double drift, double vol);

/// E[e^{-X_s}] for the reflected process above, in closed form.
double rdbm_exp_neg_moment(double s, double x0, double drift, double vol);

/// Expected regulator (local time at 0) at time s of the process reflected
/// at 0 with drift -mu_B and volatility sigma_B, started at h:
///   E[G_s^h] = (sigma_B^2 / 2) * int_0^s p(l, h, 0) dl.
/// Nondecreasing in s, nonincreasing in h.
double expected_local_time(double s, double h, double mu_B, double sigma_B);

/// d/ds of expected_local_time: the rate (sigma_B^2/2) p(s, h, 0).
double expected_local_time_rate(double s, double h, double mu_B,
                                double sigma_B);

}  // namespace benchtrack
