#include "benchtrack/special.hpp"

#include <limits>

namespace benchtrack {

double erfcx(double x) {
  if (x < 0.0) {
    // erfcx(-x) = 2 e^{x^2} - erfcx(x); overflows for x << 0, as it must.
    const double e = std::exp(x * x);
    return 2.0 * e - erfcx(-x);
  }
  if (x < 25.0) {
    return std::exp(x * x) * std::erfc(x);
  }
  // Asymptotic continued-fraction tail; relative error < 1e-16 for x >= 25.
  const double ix2 = 1.0 / (x * x);
  double s = 1.0;
  double term = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * 0.5 * ix2;
    s += term;
  }
  return s / (x * 1.7724538509055160273);  // x * sqrt(pi)
}

double exp_mul_norm_sf(double a, double c) {
  if (c <= 0.0) {
    // No cancellation risk in the tail factor; guard only the plain exp.
    if (a > 700.0) return std::numeric_limits<double>::infinity();
    return std::exp(a) * norm_sf(c);
  }
  // e^a Phi_bar(c) = 0.5 e^{a - c^2/2} erfcx(c/sqrt(2))
  const double t = a - 0.5 * c * c;
  if (t > 700.0) return std::numeric_limits<double>::infinity();
  if (t < -745.0) return 0.0;
  return 0.5 * std::exp(t) * erfcx(c / kSqrt2);
}

}  // namespace benchtrack
