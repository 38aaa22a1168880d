#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "benchtrack/estimate.hpp"
#include "benchtrack/params.hpp"
#include "benchtrack/rng.hpp"

namespace benchtrack {

struct McConfig {
  std::size_t n_paths = 10'000;
  double dt = 1e-3;
  double horizon = 10.0;
  std::uint64_t seed = kDefaultSeed;
  bool antithetic = false;
  /// Sample the within-step running maximum of each reflecting driver from
  /// its Brownian-bridge law, making the grid running max exact in law.
  /// Off: plain running-maximum over grid points (biased O(sqrt(dt)) near
  /// the boundary).
  bool bridge_max = true;

  void validate() const;  // throws ConfigError
  std::size_t n_steps() const;
};

/// Materialized reflected trajectories, for pathwise tests and export.
/// R: reflected dual log-state; H: reflected benchmark-gap state; N: GBM.
/// dL / dK are the per-step regulator increments (index 0 is zero).
struct ReflectedPathSet {
  std::vector<double> times;
  std::vector<std::vector<double>> R, H, N, dL, dK;
};

/// Discrete Skorokhod construction on the grid: unreflected drivers from
/// three independent Gaussian streams, reflection via running-maximum
/// formulas evaluated at grid points. `correlated` selects whether the
/// H-driver shares noise with the R-driver (weight rho1) or runs on the
/// independent stream alone.
ReflectedPathSet simulate_reflected(const ModelParams& params,
                                    const McConfig& config, double r, double h,
                                    double z, bool correlated);

/// MC estimate of the closed-form dual component along reflected paths.
Estimate estimate_l(const ModelParams& params, const McConfig& config,
                    double r, double z);

/// Correlated local-time term psi(r,h) = -beta E int e^{-rho s - R_s} dK_s.
Estimate estimate_psi(const ModelParams& params, const McConfig& config,
                      double r, double h);

/// Independent-driver variant phi(r,h) (shares psi's machinery).
Estimate estimate_phi(const ModelParams& params, const McConfig& config,
                      double r, double h);

struct PhiDerivatives {
  Estimate phi_r;   // MC, stopped at the first passage of the R-driver max
  Estimate phi_h;   // MC over first-passage times of the H-driver
  Estimate phi_rh;  // deterministic quadrature (std_error = quadrature error)
};
PhiDerivatives estimate_phi_derivatives(const ModelParams& params,
                                        const McConfig& config, double r,
                                        double h);

/// Triple-integral form of phi_rh with the inner x-integral in closed form.
double phi_rh_quadrature(const ModelParams& params, double r, double h,
                         double* abs_err = nullptr);

/// MC oracle of the same expectation (first passage before the R-driver max
/// reaches r), independent drivers.
Estimate estimate_phi_rh_mc(const ModelParams& params, const McConfig& config,
                            double r, double h);

/// Factorized quadrature -beta int E[e^{-rho s - R_s}] dE[G_s^h] using the
/// closed-form exponential moment and the expected local-time rate.
double phi_factorized_quadrature(const ModelParams& params, double r, double h,
                                 double* abs_err = nullptr);

/// Quadrature of the stopped integral beta E int_0^{tau_r} e^{-rho s - R_s}
/// dG_s^h (the first derivative in r of the independent-driver term).
double phi_r_quadrature(const ModelParams& params, double r, double h,
                        double* abs_err = nullptr);

/// Density-quadrature form of phi_rr + phi_r (the noisy limit form of
/// phi_rr itself is deliberately not estimated; phi_rr is exposed only as
/// this combination minus phi_r). Nonnegative.
double phi_rr_plus_phi_r_quadrature(const ModelParams& params, double r,
                                    double h, double* abs_err = nullptr);

/// Factorized quadrature of beta E[e^{-rho eta_h - R_eta}] (first passage
/// independent of the reflected state).
double phi_h_quadrature(const ModelParams& params, double r, double h,
                        double* abs_err = nullptr);

/// Bicubic lookup table of phi_rh over [0,r_max] x [0,h_max]; beyond r_max
/// values decay with e^{-(r-r_max)}, beyond h_max they are held flat.
class PhiRhTable {
 public:
  PhiRhTable(PhiRhTable&&) noexcept;
  PhiRhTable& operator=(PhiRhTable&&) noexcept;
  ~PhiRhTable();
  double eval(double r, double h) const;
  double r_max() const;
  double h_max() const;

 private:
  friend PhiRhTable build_phi_rh_table(const ModelParams&, double, double,
                                       std::size_t, std::size_t);
  PhiRhTable();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PhiRhTable build_phi_rh_table(const ModelParams& params, double r_max,
                              double h_max, std::size_t nr, std::size_t nh);

/// Homogenization correction xi(r,h) = -kappa1 E int e^{-rho s}
/// phi_rh(R_s, H_s) ds over correlated (R, H) paths.
Estimate estimate_xi(const ModelParams& params, const McConfig& config,
                     double r, double h, const PhiRhTable& table);

/// One grid node of the correlated local-time term and its representation-
/// based derivatives, all computed from the same driver paths.
struct PsiNodeEstimates {
  Estimate psi, psi_r, psi_h, psi_rh;
};
PsiNodeEstimates estimate_psi_node(const ModelParams& params,
                                   const McConfig& config, double r, double h,
                                   std::uint64_t stream);

}  // namespace benchtrack
