#include "benchtrack/verification.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/policy.hpp"
#include "benchtrack/simulator.hpp"

namespace benchtrack {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

struct Uniform {
  explicit Uniform(std::uint64_t seed) : rng(seed, 0xCAFE, 0) {}
  double operator()(double lo, double hi) {
    return lo + (hi - lo) * rng.u01();
  }
  PathRng rng;
};

}  // namespace

CheckResult check_closed_form_residual(const ModelParams& mp,
                                       std::size_t grid_n, double grid_max,
                                       double tol, double boundary_tol) {
  const ClosedFormL l(mp);
  double worst = 0.0, worst_b = 0.0;
  for (std::size_t i = 0; i < grid_n; ++i) {
    for (std::size_t j = 0; j < grid_n; ++j) {
      const double r = grid_max * static_cast<double>(i) /
                       static_cast<double>(grid_n - 1);
      const double z = grid_max * static_cast<double>(j) /
                       static_cast<double>(grid_n - 1);
      worst = std::max(worst,
                       std::abs(closed_form_pde_residual(mp, l, r, z)));
    }
  }
  for (std::size_t j = 0; j < grid_n; ++j) {
    const double z =
        grid_max * static_cast<double>(j) / static_cast<double>(grid_n - 1);
    worst_b = std::max(worst_b, std::abs(l.partials(0.0, z).l_r));
  }
  CheckResult out;
  out.name = "closed-form PDE residual";
  out.pass = worst < tol && worst_b < boundary_tol;
  out.detail = "max |residual| = " + fmt(worst) + " (tol " + fmt(tol) +
               "), |l_r(0,z)| = " + fmt(worst_b);
  return out;
}

CheckResult check_quadratic_roots(std::uint64_t seed, std::size_t n,
                                  double tol) {
  Uniform u(seed);
  double worst = 0.0;
  bool range_ok = true;
  std::size_t tested = 0;
  while (tested < n) {
    const double alpha = u(0.02, 2.0);
    const double mu_Z = u(-0.5, 1.0);
    const double kappa2 = u(-0.5, std::min(1.0, mu_Z));  // kappa2 < mu_Z
    const double rho = u(std::max(mu_Z, 0.0) + 0.01, 4.0);
    const double b = rho - kappa2 - 0.5 * alpha * alpha;
    const double disc = b * b + 2.0 * alpha * alpha * (rho - mu_Z);
    if (disc < 0.0) continue;
    ++tested;
    const double sq = std::sqrt(disc);
    const double ell = (b > 0.0) ? 2.0 * (rho - mu_Z) / (sq + b)
                                 : (sq - b) / (alpha * alpha);
    worst = std::max(
        worst, std::abs(ell_quadratic_residual(ell, alpha, rho, kappa2, mu_Z)));
    if (rho > mu_Z && mu_Z > kappa2 && !(ell > 0.0 && ell < 1.0)) {
      range_ok = false;
    }
  }
  CheckResult out;
  out.name = "dual quadratic root identity";
  out.pass = worst < tol && range_ok;
  out.detail = "max |residual| = " + fmt(worst) + " over " + fmt(double(n)) +
               " draws; 0<ell<1 " + (range_ok ? "holds" : "VIOLATED");
  return out;
}

CheckResult check_l_vs_mc(const ModelParams& mp, const McConfig& cfg,
                          std::size_t n_points, std::uint64_t point_seed,
                          double k_se, double rel_tol) {
  const ClosedFormL l(mp);
  Uniform u(point_seed);
  double worst_k = 0.0, worst_rel = 0.0;
  bool pass = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r = u(0.0, 2.5);
    const double z = u(0.0, 2.0);
    const Estimate e = estimate_l(mp, cfg, r, z);
    const double lv = l.value(r, z);
    const double dev = std::abs(e.value - lv);
    const double slack = k_se * e.std_error + e.truncation_bound;
    const double rel = dev / std::max(1e-12, std::abs(lv));
    worst_k = std::max(worst_k, dev / std::max(e.std_error, 1e-300));
    worst_rel = std::max(worst_rel, rel);
    if (dev > slack || rel > rel_tol) {
      pass = false;
      os << " FAIL at (r=" << r << ",z=" << z << "): dev=" << dev
         << " se=" << e.std_error << ";";
    }
  }
  CheckResult out;
  out.name = "Monte Carlo vs closed form (l)";
  out.pass = pass;
  out.detail = "worst dev = " + fmt(worst_k) + " se, worst rel = " +
               fmt(worst_rel) + os.str();
  return out;
}

CheckResult check_factorization(const ModelParams& mp, const McConfig& cfg,
                                std::span<const RhPoint> points, double k_se) {
  bool pass = true;
  double worst = 0.0;
  std::ostringstream os;
  for (const auto& [r, h] : points) {
    const Estimate e = estimate_phi(mp, cfg, r, h);
    double qerr = 0.0;
    const double q = phi_factorized_quadrature(mp, r, h, &qerr);
    const double dev = std::abs(e.value - q);
    const double slack =
        k_se * (e.std_error + qerr) + e.truncation_bound + 1e-12;
    worst = std::max(worst, dev / std::max(e.std_error + qerr, 1e-300));
    if (dev > slack) {
      pass = false;
      os << " FAIL at (" << r << "," << h << "): mc=" << e.value
         << " quad=" << q << " se=" << e.std_error << ";";
    }
  }
  CheckResult out;
  out.name = "factorization identity (independent driver)";
  out.pass = pass;
  out.detail = "worst dev = " + fmt(worst) + " combined se" + os.str();
  return out;
}

CheckResult check_homogenization(const ModelParams& mp, const McConfig& cfg,
                                 std::span<const RhPoint> points,
                                 double k_se) {
  double r_hi = 0.0, h_hi = 0.0;
  for (const auto& [r, h] : points) {
    r_hi = std::max(r_hi, r);
    h_hi = std::max(h_hi, h);
  }
  const PhiRhTable table =
      build_phi_rh_table(mp, std::max(4.0, r_hi + 2.0),
                         std::max(2.0, h_hi + 1.5), 49, 33);
  bool pass = true;
  double worst = 0.0;
  std::ostringstream os;
  for (const auto& [r, h] : points) {
    const Estimate psi = estimate_psi(mp, cfg, r, h);
    const Estimate phi = estimate_phi(mp, cfg, r, h);
    const Estimate xi = estimate_xi(mp, cfg, r, h, table);
    const double lhs = phi.value + xi.value;
    const double dev = std::abs(lhs - psi.value);
    const double comb = phi.std_error + xi.std_error + psi.std_error;
    const double slack = k_se * comb + phi.truncation_bound +
                         xi.truncation_bound + psi.truncation_bound + 1e-12;
    worst = std::max(worst, dev / std::max(comb, 1e-300));
    if (dev > slack) {
      pass = false;
      os << " FAIL at (" << r << "," << h << "): phi+xi=" << lhs
         << " psi=" << psi.value << ";";
    }
  }
  CheckResult out;
  out.name = "homogenization identity (psi = phi + xi)";
  out.pass = pass;
  out.detail = "worst dev = " + fmt(worst) + " combined se" + os.str();
  return out;
}

CheckResult check_field_boundaries(const DualField& field, double interp_tol) {
  const ModelParams& mp = field.params();
  const double beta = mp.preferences.beta;
  const GridSpec& g = field.grid();

  double worst_uy = 0.0;
  for (double h : {0.0, 0.3 * g.h_max, 0.9 * g.h_max}) {
    for (double z : {0.0, 0.8, 2.0}) {
      worst_uy = std::max(worst_uy, std::abs(field.u_hat(beta, h, z).u_y));
    }
  }

  // psi_h table row at h = 0 must be exactly beta e^{-r}
  const auto& psih = field.table("psi_h");
  double worst_row = 0.0;
  for (std::size_t i = 0; i < g.nr; ++i) {
    const double r =
        g.r_max * static_cast<double>(i) / static_cast<double>(g.nr - 1);
    worst_row = std::max(
        worst_row, std::abs(psih[i] - beta * std::exp(-r)));
  }

  double worst_vh = 0.0;
  for (std::size_t i = 0; i < 33; ++i) {
    const double r = g.r_max * static_cast<double>(i) / 32.0;
    const auto q = field.query(r, 0.0, 0.8);
    worst_vh = std::max(worst_vh,
                        std::abs(q.v_h - beta * std::exp(-r)));
  }

  CheckResult out;
  out.name = "Neumann boundaries of the field";
  out.pass = worst_uy < 1e-12 && worst_row < 1e-14 * beta &&
             worst_vh < interp_tol * beta;
  out.detail = "|u_hat_y(beta)| = " + fmt(worst_uy) +
               ", psi_h(.,0) row dev = " + fmt(worst_row) +
               ", interp dev = " + fmt(worst_vh);
  return out;
}

CheckResult check_dual_convexity(const DualField& field, std::size_t n,
                                 std::uint64_t seed) {
  const double beta = field.params().preferences.beta;
  const GridSpec& g = field.grid();
  Uniform u(seed);
  double min_uyy = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = beta * std::exp(-u(0.0, g.r_max));
    const double h = u(0.0, g.h_max);
    const double z = u(0.0, 2.0);
    min_uyy = std::min(min_uyy, field.u_hat(y, h, z).u_yy);
  }
  CheckResult out;
  out.name = "strict dual convexity (u_hat_yy > 0)";
  out.pass = min_uyy > 0.0;
  out.detail = "min u_hat_yy = " + fmt(min_uyy) + " over " +
               fmt(double(n)) + " points";
  return out;
}

CheckResult check_field_residuals(const DualField& field, double floor_tol) {
  const ResidualReport rep = verify_pde_residuals(field, 5, 5, 3, floor_tol);
  CheckResult out;
  out.name = "full PDE residual (MC tolerance budget)";
  out.pass = rep.pass;
  out.detail = rep.to_string();
  return out;
}

CheckResult check_policy_consistency(const DualField& field,
                                     std::uint64_t seed, std::size_t n_pairs) {
  const ModelParams& mp = field.params();
  const double beta = mp.preferences.beta;
  const GridSpec& g = field.grid();
  Uniform u(seed);
  std::ostringstream os;
  bool pass = true;

  // round trip: x := -u_hat_y(y0), invert back to y0
  double worst_rt = 0.0;
  for (double y0 : {0.5 * beta, 0.25 * beta, 0.9 * beta}) {
    for (double h : {0.0, 0.2, 0.5}) {
      const double x = -field.u_hat(y0, h, 0.8).u_y;
      const InvertResult inv = invert_dual(field, x, h, 0.8);
      worst_rt = std::max(worst_rt, std::abs(inv.y_star - y0));
    }
  }
  if (worst_rt > 1e-9) {
    pass = false;
    os << " round-trip dev " << worst_rt << ";";
  }

  // u_x = y* by central differences of the primal value
  double worst_fd = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const double x = u(0.05, 2.0);
    const double h = u(0.0, 0.8 * g.h_max);
    const double z = u(0.0, 1.5);
    const double dx = 1e-4;
    const double fd = (primal_value(field, x + dx, h, z) -
                       primal_value(field, x - dx, h, z)) /
                      (2.0 * dx);
    const double y = invert_dual(field, x, h, z).y_star;
    const double dev = std::abs(fd - y) / (1e-3 * (1.0 + std::abs(y)));
    worst_fd = std::max(worst_fd, dev);
  }
  if (worst_fd > 1.0) {
    pass = false;
    os << " u_x vs y* dev " << worst_fd << "x tolerance;";
  }

  // Lipschitz bounds on random pairs
  const double rho = mp.preferences.rho;
  const double mu_Z = mp.benchmark.mu_Z;
  const double sZ2 = mp.benchmark.sigma_Z * mp.benchmark.sigma_Z;
  const double zcoef =
      beta * (sZ2 + std::abs(mu_Z) / (rho - mu_Z) +
              3.0 / (rho - 2.0 * mu_Z - sZ2));
  double worst_lip = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double x1 = u(0.0, 2.0), x2 = u(0.0, 2.0);
    const double h1 = u(0.0, g.h_max), h2 = u(0.0, g.h_max);
    const double z1 = u(0.0, 1.5), z2 = u(0.0, 1.5);
    const double u1 = primal_value(field, x1, h1, z1);
    const double u2 = primal_value(field, x2, h2, z2);
    const double q1se = field.query(0.0, h1, z1).se_v;
    const double q2se = field.query(0.0, h2, z2).se_v;
    const double bound = beta * (std::abs(x1 - x2) + std::abs(h1 - h2)) +
                         zcoef * std::abs(z1 - z2) +
                         5.0 * (q1se + q2se) + 1e-9;
    const double gap = std::abs(u1 - u2) - bound;
    worst_lip = std::max(worst_lip, gap);
  }
  if (worst_lip > 0.0) {
    pass = false;
    os << " Lipschitz excess " << worst_lip << ";";
  }

  // consumption growth bound c* <= Cq (1 + x)
  const double Cq = mp.derived.Cq;
  double worst_c = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double x = u(0.0, 3.0);
    const double h = u(0.0, g.h_max);
    const double z = u(0.0, 1.5);
    const PolicyEvaluation ev = feedback_controls(field, x, h, z);
    worst_c = std::max(worst_c, ev.c_star / (Cq * (1.0 + x)));
  }
  if (worst_c > 1.0) {
    pass = false;
    os << " c* bound ratio " << worst_c << ";";
  }

  CheckResult out;
  out.name = "policy consistency";
  out.pass = pass;
  out.detail = "round-trip " + fmt(worst_rt) + ", u_x fd ratio " +
               fmt(worst_fd) + ", Lipschitz margin " + fmt(-worst_lip) +
               ", c*/bound " + fmt(worst_c) + os.str();
  return out;
}

CheckResult check_verification_equality(const DualField& field,
                                        const McConfig& cfg, double x,
                                        double h, double z,
                                        double disc_allowance) {
  const ControlledResult opt =
      simulate_controlled(field, cfg, x, h, z, PolicyMode::Optimal, 0);
  const double tol = 3.0 * (opt.J.std_error + opt.u_reference_se +
                            disc_allowance) +
                     opt.J.truncation_bound;
  const double dev = std::abs(opt.J.value - opt.u_reference);
  bool pass = dev <= tol;
  std::ostringstream os;
  os << "J = " << opt.J.value << " +- " << opt.J.std_error
     << ", u = " << opt.u_reference << " (dev " << dev << ", tol " << tol
     << ")";

  for (PolicyMode mode : {PolicyMode::ZeroInvestment,
                          PolicyMode::HalfConsumption,
                          PolicyMode::NoConsumption}) {
    const ControlledResult sub =
        simulate_controlled(field, cfg, x, h, z, mode, 0);
    const double excess = sub.J.value -
                          (opt.u_reference + 3.0 * sub.J.std_error +
                           sub.J.truncation_bound + 3.0 * opt.u_reference_se);
    os << "; suboptimal J = " << sub.J.value;
    if (excess > 0.0) {
      pass = false;
      os << " EXCEEDS u";
    }
  }
  CheckResult out;
  out.name = "verification equality and objective dominance";
  out.pass = pass;
  out.detail = os.str();
  return out;
}

CheckResult check_injection_bounds(const DualField& field, const McConfig& cfg,
                                   double v0, double m0, double z0,
                                   double b0) {
  const InjectionResult a = estimate_injection(field, cfg, v0, m0, z0, b0);
  McConfig doubled = cfg;
  doubled.horizon = 2.0 * cfg.horizon;
  const InjectionResult b = estimate_injection(field, doubled, v0, m0, z0, b0);

  const double inj = a.discounted_injection.value;
  const double se = a.discounted_injection.std_error;
  bool pass = true;
  std::ostringstream os;
  os << "injection = " << inj << " +- " << se << ", bound = "
     << a.lower_bound;
  if (inj < 0.0) {
    pass = false;
    os << " NEGATIVE";
  }
  if (inj + 3.0 * se + a.discounted_injection.truncation_bound <
      a.lower_bound) {
    pass = false;
    os << " BELOW lower bound";
  }
  const double drift = std::abs(b.discounted_injection.value - inj);
  const double slack = 3.0 * (se + b.discounted_injection.std_error) +
                       a.discounted_injection.truncation_bound +
                       b.discounted_injection.truncation_bound;
  os << "; horizon doubling drift = " << drift << " (slack " << slack << ")";
  if (drift > slack) {
    pass = false;
    os << " UNSTABLE";
  }
  CheckResult out;
  out.name = "injection positivity, lower bound, and stability";
  out.pass = pass;
  out.detail = os.str();
  return out;
}

CheckResult check_benchmark_moment(const ModelParams& mp,
                                   const McConfig& cfg) {
  const BenchmarkResult res = simulate_benchmark(mp, cfg, 64);
  const auto& b = mp.benchmark;
  // closed-form mean of M at the horizon for sigma_B = 0:
  //   m_T = max(m0 v b0, b0 + mu_B T), E[Z_T] = z0 e^{mu_Z T}
  const double T = cfg.horizon;
  double mean_m;
  if (b.sigma_B == 0.0) {
    mean_m = std::max(std::max(b.m0, b.b0),
                      b.b0 + std::max(b.mu_B, 0.0) * T);
  } else {
    mean_m = -1.0;  // no closed form used here
  }
  bool mono = true;
  for (const auto& path : res.m) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      if (path[i] < path[i - 1] - 1e-15) mono = false;
    }
  }
  CheckResult out;
  out.name = "benchmark moment and monotonicity";
  if (mean_m >= 0.0) {
    const double expect = mean_m + b.z0 * std::exp(b.mu_Z * T);
    const double dev = std::abs(res.mean_M_T.value - expect);
    out.pass = mono && dev <= 3.0 * res.mean_M_T.std_error;
    out.detail = "mean M_T = " + fmt(res.mean_M_T.value) + " +- " +
                 fmt(res.mean_M_T.std_error) + ", expected " + fmt(expect) +
                 (mono ? ", m paths monotone" : ", m NOT monotone");
  } else {
    out.pass = mono;
    out.detail = "mean M_T = " + fmt(res.mean_M_T.value) + " +- " +
                 fmt(res.mean_M_T.std_error) +
                 (mono ? ", m paths monotone" : ", m NOT monotone");
  }
  return out;
}

}  // namespace benchtrack
