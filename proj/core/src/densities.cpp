#include "benchtrack/densities.hpp"

#include <cmath>

#include "benchtrack/errors.hpp"
#include "benchtrack/quadrature.hpp"
#include "benchtrack/special.hpp"

namespace benchtrack {

double phi1(double s, double x, double y, const DriftSpec& spec) {
  if (!(s > 0.0)) throw DomainError("phi1: s must be > 0");
  if (!(spec.sigma_hat > 0.0)) throw DomainError("phi1: sigma_hat must be > 0");
  if (y < 0.0 || y < x) throw DomainError("phi1: need y >= max(x, 0)");
  const double m = spec.mu_hat;
  const double sg = spec.sigma_hat;
  const double v = sg * sg * s;
  const double u = 2.0 * y - x;
  const double expo = m * x / (sg * sg) - 0.5 * m * m * s / (sg * sg) -
                      u * u / (2.0 * v);
  return 2.0 * u / (sg * sg * sg * std::sqrt(2.0 * M_PI * s * s * s)) *
         std::exp(expo);
}

double phi1_weighted_x_integral(double s, double y, double w,
                                const DriftSpec& spec) {
  if (!(s > 0.0)) throw DomainError("phi1_weighted_x_integral: s must be > 0");
  if (y < 0.0) throw DomainError("phi1_weighted_x_integral: y must be >= 0");
  const double m = spec.mu_hat;
  const double sg = spec.sigma_hat;
  const double v = sg * sg * s;
  const double B = w + m / (sg * sg);
  const double e0 = y * B - 0.5 * m * m * s / (sg * sg) - y * y / (2.0 * v);
  const double c = (y + B * v) / std::sqrt(v);
  const double first = std::exp(e0) * 2.0 / (sg * std::sqrt(2.0 * M_PI * s));
  const double second = 2.0 * B * exp_mul_norm_sf(e0 + 0.5 * c * c, c);
  const double out = first - second;
  return out > 0.0 ? out : 0.0;
}

double phi2(double s, double h, double mu_B, double sigma_B) {
  if (!(s > 0.0)) throw DomainError("phi2: s must be > 0");
  if (!(h > 0.0)) throw DomainError("phi2: h must be > 0");
  if (!(sigma_B > 0.0)) throw DomainError("phi2: sigma_B must be > 0");
  const double dev = h - mu_B * s;
  return h / (sigma_B * std::sqrt(2.0 * M_PI * s * s * s)) *
         std::exp(-dev * dev / (2.0 * sigma_B * sigma_B * s));
}

// Two Gaussian images plus an exponential correction; reduces to the folded
// normal when drift = 0 and to the Exp(2|drift|/vol^2) stationary density as
// s grows with drift < 0.
double rdbm_density(double s, double x0, double x, double drift, double vol) {
  if (!(s > 0.0)) throw DomainError("rdbm_density: s must be > 0");
  if (!(vol > 0.0)) throw DomainError("rdbm_density: vol must be > 0");
  if (x0 < 0.0 || x < 0.0) throw DomainError("rdbm_density: x0, x >= 0");
  const double v = vol * vol * s;
  const double sd = std::sqrt(v);
  const double g1 = norm_pdf((x - x0 - drift * s) / sd) / sd;
  const double lam = 2.0 * drift / (vol * vol);
  const double a = lam * x;
  const double c = (x + x0 + drift * s) / sd;
  const double e2 = a - 0.5 * c * c;  // exp(a) * pdf(c) without overflow
  const double g2 = e2 < -745.0 ? 0.0 : std::exp(e2) * kInvSqrt2Pi / sd;
  const double corr = lam * exp_mul_norm_sf(a, c);
  const double out = g1 + g2 - corr;
  return out > 0.0 ? out : 0.0;
}

double rdbm_exp_neg_moment(double s, double x0, double drift, double vol) {
  if (!(s > 0.0)) throw DomainError("rdbm_exp_neg_moment: s must be > 0");
  if (!(vol > 0.0)) throw DomainError("rdbm_exp_neg_moment: vol must be > 0");
  if (x0 < 0.0) throw DomainError("rdbm_exp_neg_moment: x0 >= 0");
  const double v = vol * vol * s;
  const double sd = std::sqrt(v);
  const double m = x0 + drift * s;
  const double lam = 2.0 * drift / (vol * vol) - 1.0;

  // int_0^inf e^{-u} N(u; m, v) du
  const double i1 = exp_mul_norm_sf(0.5 * v - m, (v - m) / sd);
  // int_0^inf e^{lam u} N(u; -m, v) du
  const double i2core =
      exp_mul_norm_sf(-lam * m + 0.5 * lam * lam * v, (m - lam * v) / sd);
  const double i2 = i2core;
  double i3;
  const double leading = 2.0 * drift / (vol * vol);
  if (lam != 0.0) {
    i3 = leading * (i2core - norm_sf(m / sd)) / lam;
  } else {
    const double c = m / sd;
    i3 = leading * sd * (norm_pdf(c) - c * norm_sf(c));
  }
  const double out = i1 + i2 - i3;
  return out > 0.0 ? (out < 1.0 ? out : 1.0) : 0.0;
}

double expected_local_time_rate(double s, double h, double mu_B,
                                double sigma_B) {
  if (!(sigma_B > 0.0)) {
    throw DomainError("expected_local_time: sigma_B must be > 0");
  }
  return 0.5 * sigma_B * sigma_B * rdbm_density(s, h, 0.0, -mu_B, sigma_B);
}

double expected_local_time(double s, double h, double mu_B, double sigma_B) {
  if (!(sigma_B > 0.0)) {
    throw DomainError("expected_local_time: sigma_B must be > 0");
  }
  if (s < 0.0 || h < 0.0) {
    throw DomainError("expected_local_time: s, h >= 0");
  }
  if (s == 0.0) return 0.0;
  // The integrand behaves like 1/sqrt(l) near l = 0 when h = 0.
  const auto f = [&](double l) {
    return expected_local_time_rate(l, h, mu_B, sigma_B);
  };
  return integrate_sqrt_origin(f, s, 1e-11, 1e-9).value;
}

}  // namespace benchtrack
