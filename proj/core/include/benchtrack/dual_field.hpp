#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/mc_engine.hpp"
#include "benchtrack/params.hpp"

namespace benchtrack {

struct GridSpec {
  double r_max = 4.0;
  double h_max = 2.0;
  std::size_t nr = 17;
  std::size_t nh = 17;

  void validate() const;  // throws GridError
  /// r_max so that e^{-ell r_max} < 1e-6, h_max so that the expected local
  /// time over the horizon is below 1e-8.
  static GridSpec suggest(const ModelParams& params, double horizon);
};

/// v(r,h,z) = l(r,z) + psi(r,h): closed form in (r,z), Monte Carlo tables
/// with bicubic interpolation in (r,h). Immutable after build; queries are
/// safe from any number of threads.
class DualField {
 public:
  DualField(DualField&&) noexcept;
  DualField& operator=(DualField&&) noexcept;
  ~DualField();

  struct Query {
    double v = 0, v_r = 0, v_rr = 0, v_h = 0, v_rh = 0, v_hh = 0;
    double v_z = 0, v_rz = 0, v_zz = 0;
    double se_v = 0, se_v_r = 0, se_v_rr = 0, se_v_h = 0, se_v_rh = 0;
    bool extrapolated = false;  // outside the (r,h) grid: psi parts held flat
  };
  Query query(double r, double h, double z) const;

  /// Just v_r and v_rr (hot path of the dual inversion).
  void query_vr_vrr(double r, double h, double z, double& v_r,
                    double& v_rr) const;

  /// Tabulated psi_rh alone (v_rh = psi_rh; the closed form has no h term).
  double psi_rh_value(double r, double h) const;

  struct UHat {
    double value = 0, u_y = 0, u_yy = 0, u_yh = 0, u_yz = 0, u_h = 0,
           u_z = 0;
    double se_value = 0, se_u_y = 0, se_u_yy = 0;
    bool extrapolated = false;
  };
  /// Dual value and partials at y in (0, beta]; throws DomainError outside.
  UHat u_hat(double y, double h, double z) const;

  const ModelParams& params() const;
  const ClosedFormL& closed_form() const;
  const GridSpec& grid() const;
  const McConfig& mc_config() const;

  /// Raw tables, h-major ([j * nr + i]); for tests and diagnostics.
  const std::vector<double>& table(const std::string& name) const;
  const std::vector<double>& table_se(const std::string& name) const;

  std::string to_json() const;
  static DualField from_json(const std::string& text);
  void save(const std::string& path) const;
  static DualField load(const std::string& path);

 private:
  DualField();
  friend DualField build_dual_field(const ModelParams&, const McConfig&,
                                    const GridSpec&);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Populates the psi tables by Monte Carlo (representation-based values and
/// first derivatives; second derivatives by finite differences of the
/// tabulated first derivatives) and attaches the closed form.
DualField build_dual_field(const ModelParams& params, const McConfig& config,
                           const GridSpec& grid);

struct ResidualSample {
  double r, h, z;
  double residual;
  double tolerance;
};

struct ResidualReport {
  double max_abs_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<ResidualSample> samples;
  std::string to_string() const;
};

/// Residual of the full linear PDE for v at sampled interior points, using
/// analytic derivatives for the closed-form part and tabulated/differenced
/// derivatives for the psi part. Tolerance = max(floor, 5 * propagated se).
ResidualReport verify_pde_residuals(const DualField& field, std::size_t nr = 5,
                                    std::size_t nh = 5, std::size_t nz = 3,
                                    double floor_tol = 5e-2);

/// Residual of the closed-form component's own Neumann problem at (r,z)
/// (analytic derivatives only; machine-precision small by construction).
double closed_form_pde_residual(const ModelParams& params,
                                const ClosedFormL& l, double r, double z);

}  // namespace benchtrack
