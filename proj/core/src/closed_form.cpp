#include "benchtrack/closed_form.hpp"

#include <cmath>

#include "benchtrack/errors.hpp"

namespace benchtrack {

ClosedFormL::ClosedFormL(const ModelParams& params, double r_clamp)
    : p_(params.preferences.p),
      beta_(params.preferences.beta),
      a_(params.preferences.p / (1.0 - params.preferences.p)),
      C1_(params.derived.C1),
      C2_(params.derived.C2),
      ell_(params.derived.ell),
      r_clamp_(r_clamp) {
  c1term_ = C1_ * std::pow(beta_, -a_);
}

double ClosedFormL::check_args(double r, double z) const {
  if (r < 0.0 || z < 0.0 || std::isnan(r) || std::isnan(z)) {
    throw DomainError("l(r,z) requires r >= 0 and z >= 0");
  }
  return r > r_clamp_ ? r_clamp_ : r;
}

double ClosedFormL::value(double r, double z) const {
  r = check_args(r, z);
  const double er = std::exp(-r);
  return c1term_ * std::exp(a_ * r) + C2_ * beta_ * er +
         z * (beta_ * er - beta_ / ell_ * std::exp(-ell_ * r));
}

ClosedFormL::Partials ClosedFormL::partials(double r, double z) const {
  r = check_args(r, z);
  const double er = std::exp(-r);
  const double el = std::exp(-ell_ * r);
  const double grow = c1term_ * std::exp(a_ * r);
  Partials out;
  out.l_r = a_ * grow - C2_ * beta_ * er - z * beta_ * (er - el);
  out.l_rr = a_ * a_ * grow + C2_ * beta_ * er + z * beta_ * (er - ell_ * el);
  out.l_z = beta_ * er - beta_ / ell_ * el;
  out.l_rz = -beta_ * er + beta_ * el;
  out.l_zz = 0.0;
  return out;
}

double tilde_w(double v, double z, double ell) {
  if (!(ell > 0.0 && ell < 1.0)) {
    throw DegenerateEll("tilde_w requires ell in (0,1)");
  }
  if (!(z > 0.0) || v < 0.0) {
    throw DomainError("tilde_w requires z > 0 and v >= 0");
  }
  const double excess = v > z ? (v - z) / z : 0.0;
  return z * (1.0 - ell) / ell *
         std::pow(1.0 + excess, ell / (ell - 1.0));
}

}  // namespace benchtrack
