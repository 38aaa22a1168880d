#pragma once

#include <iosfwd>
#include <vector>

#include "benchtrack/dual_field.hpp"
#include "benchtrack/estimate.hpp"
#include "benchtrack/mc_engine.hpp"
#include "benchtrack/policy.hpp"

namespace benchtrack {

/// One stored controlled trajectory. Arrays are indexed by grid point;
/// L_X holds regulator increments (index 0 is zero); theta is step-major
/// with d entries per step.
struct PathRecord {
  std::vector<double> t, X, I, Z, m, V, A_star, L_X, c;
  std::vector<double> theta;
  double discounted_utility = 0.0;
  double discounted_injection = 0.0;
};

struct BenchmarkResult {
  std::vector<double> times;
  std::vector<std::vector<double>> B, m, Z, M;  // stored paths only
  Estimate mean_M_T;
  std::size_t n_paths = 0;
};

/// Benchmark paths: B = b0 + mu_B t + sigma_B W^gamma, m its running max
/// seeded at m0, Z an exact GBM from z0, M = m + Z. sigma_B = 0 is allowed
/// here (deterministic B).
BenchmarkResult simulate_benchmark(const ModelParams& params,
                                   const McConfig& config,
                                   std::size_t store_cap = 100);

enum class PolicyMode {
  Optimal,
  ZeroInvestment,    // theta = 0, consumption unchanged
  HalfConsumption,   // c = c*/2
  NoConsumption,     // c = 0 (requires p > 0)
};

struct ControlledResult {
  Estimate J;          // discounted utility minus beta * discounted injection
  Estimate utility;
  Estimate injection;  // discounted regulator integral over (0, T]
  double u_reference = 0.0;     // primal value at the start state
  double u_reference_se = 0.0;  // propagated table noise at the start state
  double extrapolated_fraction = 0.0;  // steps evaluated outside the grid
  std::vector<PathRecord> stored;
};

/// Euler simulation of the controlled reflected system from auxiliary state
/// (x,h,z), with controls re-evaluated each step from the field. The GBM
/// increment is exact; reflection is applied after the full step including
/// the running-max increment, so the stored states satisfy the
/// running-max reconstruction identity on the grid exactly.
ControlledResult simulate_controlled(const DualField& field,
                                     const McConfig& config, double x,
                                     double h, double z,
                                     PolicyMode mode = PolicyMode::Optimal,
                                     std::size_t store_cap = 0);

struct InjectionResult {
  Estimate discounted_injection;  // over (0, T]
  double immediate_injection = 0.0;  // (m v b + z - v)^+ at time zero
  double lower_bound = 0.0;          // tilde_w(v0, z0)
  double u_reference = 0.0;
};

/// Discounted capital injection under the optimal feedback control, started
/// from original coordinates (v0, m0, z0, b0).
InjectionResult estimate_injection(const DualField& field,
                                   const McConfig& config, double v0,
                                   double m0, double z0, double b0);

/// CSV export, header mandatory, floats at 17 significant digits:
/// path_id,t,X,I,Z,m,M,V,A_star,theta_1..theta_d,c,L_X
void write_paths_csv(std::ostream& os, const ControlledResult& result, int d);

/// path_id,t,B,m,Z,M
void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result);

}  // namespace benchtrack
