#pragma once

#include <vector>

#include "benchtrack/dual_field.hpp"

namespace benchtrack {

struct InvertResult {
  double y_star = 0.0;
  double r_star = 0.0;  // -ln(y*/beta)
  int iterations = 0;
  double residual = 0.0;  // |u_hat_y(y*) + x|
  bool extrapolated = false;
};

/// Bisection for the y in (0,beta] with u_hat_y(y,h,z) = -x. Monotone by
/// strict dual convexity; returns exactly beta at x = 0. Throws BracketError
/// if x cannot be matched inside the evaluable range.
InvertResult invert_dual(const DualField& field, double x, double h, double z);

/// u(x,h,z) = u_hat(y*) + x y*.
double primal_value(const DualField& field, double x, double h, double z);

/// Value in the original coordinates (initial wealth v, running max seed m,
/// GBM start z, drifted-BM start b): the auxiliary value at the mapped
/// state, less the linear penalty when the start is below the floor.
double original_value(const DualField& field, double v, double m, double z,
                      double b);

struct PolicyEvaluation {
  double y_star = 0.0;
  double u_value = 0.0;
  std::vector<double> theta_star;
  double c_star = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool extrapolated = false;
};

/// Feedback investment vector and consumption rate at auxiliary state
/// (x,h,z), evaluated through the dual second-order relations.
PolicyEvaluation feedback_controls(const DualField& field, double x, double h,
                                   double z);

/// Warm-started inversion for simulation loops: safeguarded Newton on the
/// same monotone map with a bisection fallback, agreeing with invert_dual
/// to 1e-9. Not thread-safe; use one session per thread.
class PolicySession {
 public:
  explicit PolicySession(const DualField& field);

  struct Controls {
    double y_star;
    double r_star;
    double c_star;
    double log_c_star;
  };
  /// Inverts the dual at (x,h,z) and fills theta (resized to d).
  Controls controls(double x, double h, double z, std::vector<double>& theta);

 private:
  const DualField& field_;
  double warm_r_ = 0.0;
};

}  // namespace benchtrack
