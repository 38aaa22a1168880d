#pragma once

#include <functional>

namespace benchtrack {

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
};

/// Adaptive integration of f over [a, b] (21-point Gauss-Kronrod panels).
/// Throws NumericalError if the routine cannot reach a sane error estimate.
QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, double abs_tol = 1e-9, double rel_tol = 1e-7);

/// Integration over [0, b] with an integrable endpoint singularity at 0
/// no worse than 1/sqrt: substitutes t = u^2 and integrates the smooth map.
QuadResult integrate_sqrt_origin(const std::function<double(double)>& f,
                                 double b, double abs_tol = 1e-9,
                                 double rel_tol = 1e-7);

/// Adaptive integration over [a, infinity).
QuadResult integrate_upper(const std::function<double(double)>& f, double a,
                           double abs_tol = 1e-9, double rel_tol = 1e-7);

}  // namespace benchtrack
