#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace benchtrack {

/// d risky assets: drift vector mu and invertible d x d volatility matrix
/// sigma (row-major).
struct MarketParams {
  int d = 1;
  std::vector<double> mu;
  std::vector<double> sigma;
};

/// Benchmark = running maximum of a drifted Brownian motion plus a GBM.
/// gamma and eta are the combination weights of the d-dimensional Brownian
/// motion driving the two noise sources; they are normalized to unit
/// Euclidean norm at ingestion so the combined drivers are standard
/// Brownian motions.
struct BenchmarkParams {
  double mu_Z = 0.0;
  double sigma_Z = 0.0;
  double mu_B = 0.0;
  double sigma_B = 0.0;
  std::vector<double> gamma;
  std::vector<double> eta;
  double z0 = 0.0;
  double m0 = 0.0;
  double b0 = 0.0;
};

/// Power utility c^p / p, discount rate rho, injection cost weight beta.
struct PreferenceParams {
  double p = 0.5;
  double rho = 1.0;
  double beta = 1.0;
};

/// Scalars derived once from the raw inputs, plus the solved direction
/// vectors that the policy and simulator reuse.
struct DerivedConstants {
  double alpha = 0.0;   // |sigma^{-1} mu|, market price of risk norm
  double kappa1 = 0.0;  // sigma_B mu' (sigma sigma')^{-1} sigma gamma
  double kappa2 = 0.0;  // sigma_Z mu' (sigma sigma')^{-1} sigma eta
  double rho1 = 0.0;    // correlation of the dual driver with the B-noise
  double rho2 = 0.0;    // correlation of the dual driver with the Z-noise
  double ell = 0.0;     // positive root of the dual quadratic
  double C1 = 0.0;
  double C2 = 0.0;
  double Cq = 0.0;      // consumption growth constant
  double sigma_cond = 0.0;  // condition number of sigma

  std::vector<double> iss_mu;      // (sigma sigma')^{-1} mu
  std::vector<double> iss_sgamma;  // (sigma sigma')^{-1} sigma gamma
  std::vector<double> iss_seta;    // (sigma sigma')^{-1} sigma eta
};

struct ModelParams {
  MarketParams market;
  BenchmarkParams benchmark;
  PreferenceParams preferences;
  DerivedConstants derived;
};

/// Residual of the quadratic whose positive root defines ell.
double ell_quadratic_residual(double ell, double alpha, double rho,
                              double kappa2, double mu_Z);

/// Pure function of the validated inputs. Throws SingularSigma, ZeroMu or
/// AssumptionViolated (negative discriminant).
DerivedConstants derive_constants(const MarketParams& market,
                                  const BenchmarkParams& bench,
                                  const PreferenceParams& pref);

/// Normalizes gamma/eta, checks the type invariants, derives constants.
ModelParams make_model(MarketParams market, BenchmarkParams bench,
                       PreferenceParams pref);

struct ValidationCheck {
  std::string name;
  bool checked = true;  // false: reported but deliberately not evaluated
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  /// All evaluated checks pass.
  bool all_pass() const;
  /// Everything the dual solver needs (includes sigma_B > 0).
  bool dual_solver_ok() const;
  std::string to_string() const;
};

/// Standing-assumption report. Never throws: the caller decides whether a
/// failed check is fatal for the mode it wants to run.
ValidationReport validate_assumptions(const ModelParams& params);

/// JSON parameter file ingestion:
///   {"market": {"d", "mu": [...], "sigma": [[...], ...]},
///    "benchmark": {"mu_Z", "sigma_Z", "mu_B", "sigma_B",
///                  "gamma": [...], "eta": [...], "z0", "m0", "b0"},
///    "preferences": {"p", "rho", "beta"}}
ModelParams parse_params_json(const std::string& text);
ModelParams load_params_json(const std::string& path);

}  // namespace benchtrack
