#include "benchtrack/policy.hpp"

#include <algorithm>
#include <cmath>

#include "benchtrack/errors.hpp"

namespace benchtrack {

namespace {

// G(r) = e^r v_r(r,h,z) - beta x. Strictly increasing in r by dual
// convexity, G(0) = -beta x, and the inversion y* = beta e^{-r*} solves
// u_hat_y(y*) = -x exactly when G(r*) = 0.
double g_of_r(const DualField& field, double r, double h, double z, double x) {
  double v_r, v_rr;
  field.query_vr_vrr(r, h, z, v_r, v_rr);
  return std::exp(r) * v_r - field.params().preferences.beta * x;
}

}  // namespace

InvertResult invert_dual(const DualField& field, double x, double h, double z) {
  if (x < 0.0) throw DomainError("invert_dual: x must be >= 0");
  const double beta = field.params().preferences.beta;
  const double r_clamp = field.closed_form().r_clamp();

  InvertResult out;
  if (x == 0.0) {
    out.y_star = beta;
    out.r_star = 0.0;
    out.residual = 0.0;
    return out;
  }

  double lo = 0.0;
  double hi = 1.0;
  int iters = 0;
  while (g_of_r(field, hi, h, z, x) < 0.0) {
    lo = hi;
    hi *= 2.0;
    ++iters;
    if (hi > r_clamp) {
      throw BracketError(
          "invert_dual: x exceeds the evaluable dual range; extend the grid");
    }
  }
  // 60 bisection steps shrink the bracket by 2^-60.
  for (int it = 0; it < 60 && (hi - lo) > 1e-13 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g_of_r(field, mid, h, z, x) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++iters;
  }
  out.r_star = 0.5 * (lo + hi);
  out.y_star = beta * std::exp(-out.r_star);
  out.iterations = iters;
  out.residual = std::abs(g_of_r(field, out.r_star, h, z, x)) / beta;
  out.extrapolated = out.r_star > field.grid().r_max;
  return out;
}

double primal_value(const DualField& field, double x, double h, double z) {
  const InvertResult inv = invert_dual(field, x, h, z);
  const auto q = field.query(inv.r_star, h, z);
  return q.v + x * inv.y_star;
}

double original_value(const DualField& field, double v, double m, double z,
                      double b) {
  if (v < 0.0 || m < 0.0 || z < 0.0) {
    throw DomainError("original_value: v, m, z must be >= 0");
  }
  const double beta = field.params().preferences.beta;
  const double mb = std::max(m, b);
  const double hh = mb - b;
  if (v >= mb + z) {
    return primal_value(field, v - mb - z, hh, z);
  }
  return primal_value(field, 0.0, hh, z) - beta * (mb + z - v);
}

namespace {

PolicyEvaluation controls_at(const DualField& field, double x, double h,
                             double z, const InvertResult& inv) {
  const ModelParams& mp = field.params();
  const double y = inv.y_star;
  const auto q = field.query(inv.r_star, h, z);

  const double u_hat_yy = (q.v_rr + q.v_r) / (y * y);
  if (!(u_hat_yy > 0.0)) {
    throw ConvexityError("u_hat_yy must be positive (field invariant)");
  }
  const double u_x = y;
  const double u_xx = -1.0 / u_hat_yy;
  const double u_hat_yh = -q.v_rh / y;
  const double u_hat_yz = -q.v_rz / y;
  const double u_xh = -u_hat_yh / u_hat_yy;
  const double u_xz = -u_hat_yz / u_hat_yy;

  const auto& d = mp.derived;
  const double sigma_B = mp.benchmark.sigma_B;
  const double sigma_Z = mp.benchmark.sigma_Z;

  PolicyEvaluation ev;
  ev.y_star = y;
  ev.u_value = q.v + x * y;
  ev.iterations = inv.iterations;
  ev.residual = inv.residual;
  ev.extrapolated = inv.extrapolated || q.extrapolated;
  ev.c_star =
      std::exp(std::log(y) / (mp.preferences.p - 1.0));  // y^{1/(p-1)} > 0

  const int dd = mp.market.d;
  ev.theta_star.resize(dd);
  for (int i = 0; i < dd; ++i) {
    const double num = d.iss_mu[i] * u_x - sigma_B * d.iss_sgamma[i] * u_xh +
                       sigma_Z * d.iss_seta[i] * z * (u_xx - u_xz);
    ev.theta_star[i] = -num / u_xx;
  }
  return ev;
}

}  // namespace

PolicyEvaluation feedback_controls(const DualField& field, double x, double h,
                                   double z) {
  const InvertResult inv = invert_dual(field, x, h, z);
  return controls_at(field, x, h, z, inv);
}

PolicySession::PolicySession(const DualField& field) : field_(field) {}

PolicySession::Controls PolicySession::controls(double x, double h, double z,
                                                std::vector<double>& theta) {
  const ModelParams& mp = field_.params();
  const double beta = mp.preferences.beta;
  const double r_clamp = field_.closed_form().r_clamp();

  double r = warm_r_;
  double lo = 0.0, hi = -1.0;  // hi < 0: upper bracket not yet found
  double v_r = 0.0, v_rr = 0.0;
  if (x == 0.0) {
    r = 0.0;
    field_.query_vr_vrr(r, h, z, v_r, v_rr);
  } else {
    const double target = beta * x;
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
      field_.query_vr_vrr(r, h, z, v_r, v_rr);
      const double g = std::exp(r) * v_r - target;
      if (std::abs(g) <= 1e-11 * beta * (1.0 + x)) {
        converged = true;
        break;
      }
      if (g < 0.0) {
        lo = r;
      } else {
        hi = r;
      }
      const double gp = std::exp(r) * (v_r + v_rr);
      double next = gp > 0.0 ? r - g / gp : -1.0;
      if (hi < 0.0) {
        // still expanding the upper bracket
        if (!(next > lo) || next > r_clamp) next = std::min(2.0 * (r + 0.5), r_clamp);
        if (g > 0.0) hi = r;
      } else if (!(next > lo && next < hi)) {
        next = 0.5 * (lo + hi);
      }
      if (std::abs(next - r) < 1e-13 * (1.0 + r)) {
        r = next;
        converged = true;
        break;
      }
      r = next;
      if (r > r_clamp) {
        throw FieldCoverageError(
            "policy: state beyond evaluable dual range (r > clamp)");
      }
    }
    if (!converged) {
      // fall back to the plain bisection path
      const InvertResult inv = invert_dual(field_, x, h, z);
      r = inv.r_star;
      field_.query_vr_vrr(r, h, z, v_r, v_rr);
    }
  }
  warm_r_ = r;

  const double y = beta * std::exp(-r);
  const double u_hat_yy = (v_rr + v_r) / (y * y);
  if (!(u_hat_yy > 0.0)) {
    throw ConvexityError("u_hat_yy must be positive (field invariant)");
  }
  const double u_x = y;
  const double u_xx = -1.0 / u_hat_yy;

  // Mixed partials: v_rh is a single table lookup, v_rz is closed form.
  const double v_rh = field_.psi_rh_value(r, h);
  const double v_rz = field_.closed_form().partials(r, z).l_rz;
  const double u_xh = (v_rh / y) / u_hat_yy;
  const double u_xz = (v_rz / y) / u_hat_yy;

  const auto& d = mp.derived;
  const double sigma_B = mp.benchmark.sigma_B;
  const double sigma_Z = mp.benchmark.sigma_Z;
  const int dd = mp.market.d;
  theta.resize(dd);
  for (int i = 0; i < dd; ++i) {
    const double num = d.iss_mu[i] * u_x - sigma_B * d.iss_sgamma[i] * u_xh +
                       sigma_Z * d.iss_seta[i] * z * (u_xx - u_xz);
    theta[i] = -num / u_xx;
  }

  Controls c;
  c.y_star = y;
  c.r_star = r;
  c.log_c_star = (std::log(beta) - r) / (mp.preferences.p - 1.0);
  c.c_star = std::exp(c.log_c_star);
  return c;
}

}  // namespace benchtrack
