#pragma once

#include "benchtrack/params.hpp"

namespace benchtrack {

/// Closed-form component l(r,z) of the dual value and its exact partial
/// derivatives:
///
///   l(r,z) = C1 beta^{-p/(1-p)} e^{p r/(1-p)} + C2 beta e^{-r}
///          + z (beta e^{-r} - (beta/ell) e^{-ell r})
///
/// All derivatives are analytic; finite differences appear only in tests.
/// For r past `r_clamp` the growing exponential would overflow long before
/// the dual inversion could need it, so evaluation clamps r there and the
/// caller can ask whether a query was clamped.
class ClosedFormL {
 public:
  explicit ClosedFormL(const ModelParams& params, double r_clamp = 50.0);

  double value(double r, double z) const;

  struct Partials {
    double l_r = 0.0;
    double l_rr = 0.0;
    double l_z = 0.0;
    double l_rz = 0.0;
    double l_zz = 0.0;  // identically zero: l is affine in z
  };
  Partials partials(double r, double z) const;

  bool clamped(double r) const { return r > r_clamp_; }
  double r_clamp() const { return r_clamp_; }

  double C1() const { return C1_; }
  double C2() const { return C2_; }
  double ell() const { return ell_; }
  double beta() const { return beta_; }
  double growth_exponent() const { return a_; }  // p/(1-p)

 private:
  double check_args(double r, double z) const;
  double p_, beta_, a_, C1_, C2_, ell_, r_clamp_;
  double c1term_;  // C1 * beta^{-p/(1-p)}
};

/// Explicit lower bound on the expected discounted capital injection:
///   w~(v,z) = z (1-ell)/ell * (1 + (v-z)^+/z)^{ell/(ell-1)},  z > 0.
/// Throws DegenerateEll unless ell lies in (0,1).
double tilde_w(double v, double z, double ell);

}  // namespace benchtrack
