#pragma once

// Verification checks shared by the CLI `verify` command and the acceptance
// suite. Each check is self-contained, deterministic for a fixed seed, and
// returns a pass flag plus a human-readable detail line.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "benchtrack/dual_field.hpp"
#include "benchtrack/mc_engine.hpp"
#include "benchtrack/params.hpp"

namespace benchtrack {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

using RhPoint = std::pair<double, double>;

/// |residual| of the closed-form Neumann problem on a grid_n x grid_n grid
/// over [0, grid_max]^2, and l_r(0,z) = 0 to boundary_tol.
CheckResult check_closed_form_residual(const ModelParams& params,
                                       std::size_t grid_n = 20,
                                       double grid_max = 5.0,
                                       double tol = 1e-9,
                                       double boundary_tol = 1e-12);

/// Root residual of the dual quadratic over n random valid parameter sets,
/// plus 0 < ell < 1 whenever rho > mu_Z > kappa2.
CheckResult check_quadratic_roots(std::uint64_t seed, std::size_t n = 1000,
                                  double tol = 1e-12);

/// estimate_l against the closed form at n_points random (r,z) points:
/// within k_se standard errors and relative error below rel_tol.
CheckResult check_l_vs_mc(const ModelParams& params, const McConfig& config,
                          std::size_t n_points, std::uint64_t point_seed,
                          double k_se = 3.0, double rel_tol = 0.02);

/// Independent-driver local-time estimator against the factorized
/// quadrature at the given (r,h) points, within k_se combined errors.
CheckResult check_factorization(const ModelParams& params,
                                const McConfig& config,
                                std::span<const RhPoint> points,
                                double k_se = 3.0);

/// phi + xi = psi at the given (r,h) points within k_se combined errors.
CheckResult check_homogenization(const ModelParams& params,
                                 const McConfig& config,
                                 std::span<const RhPoint> points,
                                 double k_se = 3.0);

/// u_hat_y(beta,h,z) = 0; v_h(r,0,z) = beta e^{-r} on the boundary (exact
/// at nodes, within interp_tol * beta between them -- the spline's natural
/// end conditions dominate near r = 0); the h=0 row of the psi_h table
/// equals beta e^{-r} exactly.
CheckResult check_field_boundaries(const DualField& field,
                                   double interp_tol = 1e-2);

/// u_hat_yy > 0 at n random interior points of the field.
CheckResult check_dual_convexity(const DualField& field, std::size_t n = 100,
                                 std::uint64_t seed = 0x5eed);

/// Full PDE residual on sampled interior points (MC-noise scaled budget).
CheckResult check_field_residuals(const DualField& field,
                                  double floor_tol = 5e-2);

/// Round-trip dual inversion to 1e-9; u_x = y* by finite differences
/// (tolerance 1e-3 * scale); Lipschitz bounds on random pairs;
/// c* <= Cq (1 + x) everywhere sampled.
CheckResult check_policy_consistency(const DualField& field,
                                     std::uint64_t seed = 0x5eed,
                                     std::size_t n_pairs = 100);

/// Simulated objective under the feedback control equals the primal value
/// within 3 (MC se + field se + disc_allowance), and three suboptimal
/// policies stay below u + 3 se.
CheckResult check_verification_equality(const DualField& field,
                                        const McConfig& config, double x,
                                        double h, double z,
                                        double disc_allowance);

/// Discounted injection >= tilde_w - 3 se, >= 0, and stable under horizon
/// doubling.
CheckResult check_injection_bounds(const DualField& field,
                                   const McConfig& config, double v0,
                                   double m0, double z0, double b0);

/// Sample mean of M at t=1 within 3 se of the closed-form moment
/// m_1 + z0 e^{mu_Z} (deterministic drifted part when sigma_B = 0), and
/// every stored m path nondecreasing.
CheckResult check_benchmark_moment(const ModelParams& params,
                                   const McConfig& config);

}  // namespace benchtrack
