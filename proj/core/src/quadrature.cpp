#include "benchtrack/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <string>

#include "benchtrack/errors.hpp"

namespace benchtrack {

namespace {

struct GslInit {
  GslInit() { gsl_set_error_handler_off(); }
};
const GslInit gsl_init_once;

double bridge(double x, void* p) {
  return (*static_cast<const std::function<double(double)>*>(p))(x);
}

using Workspace =
    std::unique_ptr<gsl_integration_workspace,
                    decltype(&gsl_integration_workspace_free)>;

Workspace make_workspace(std::size_t n) {
  Workspace w(gsl_integration_workspace_alloc(n),
              &gsl_integration_workspace_free);
  if (!w) throw NumericalError("quadrature workspace allocation failed");
  return w;
}

QuadResult check(int status, double value, double abs_err, double abs_tol,
                 double rel_tol, const char* where) {
  // Roundoff-limited results are fine as long as the reported error is
  // within a generous multiple of the requested tolerance.
  const double budget =
      50.0 * std::max(abs_tol, rel_tol * std::abs(value)) + 1e-300;
  if (status != GSL_SUCCESS && status != GSL_EROUND && abs_err > budget) {
    throw NumericalError(std::string(where) + ": integration failed, status " +
                         std::to_string(status));
  }
  return {value, abs_err};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a,
                     double b, double abs_tol, double rel_tol) {
  if (!(b >= a)) throw DomainError("integrate: b < a");
  if (a == b) return {0.0, 0.0};
  auto ws = make_workspace(2048);
  gsl_function g{&bridge, const_cast<std::function<double(double)>*>(&f)};
  double value = 0.0, err = 0.0;
  const int status =
      gsl_integration_qag(&g, a, b, abs_tol, rel_tol, 2048,
                          GSL_INTEG_GAUSS21, ws.get(), &value, &err);
  return check(status, value, err, abs_tol, rel_tol, "integrate");
}

QuadResult integrate_sqrt_origin(const std::function<double(double)>& f,
                                 double b, double abs_tol, double rel_tol) {
  if (!(b >= 0.0)) throw DomainError("integrate_sqrt_origin: b < 0");
  if (b == 0.0) return {0.0, 0.0};
  const auto g = [&f](double u) { return 2.0 * u * f(u * u); };
  return integrate(g, 0.0, std::sqrt(b), abs_tol, rel_tol);
}

QuadResult integrate_upper(const std::function<double(double)>& f, double a,
                           double abs_tol, double rel_tol) {
  auto ws = make_workspace(2048);
  gsl_function g{&bridge, const_cast<std::function<double(double)>*>(&f)};
  double value = 0.0, err = 0.0;
  const int status = gsl_integration_qagiu(
      &g, a, abs_tol, rel_tol, 2048, ws.get(), &value, &err);
  return check(status, value, err, abs_tol, rel_tol, "integrate_upper");
}

}  // namespace benchtrack
