#include "benchtrack/mc_engine.hpp"

#include <gsl/gsl_interp2d.h>
#include <gsl/gsl_spline2d.h>

#include <algorithm>
#include <cmath>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/densities.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/parallel.hpp"
#include "benchtrack/quadrature.hpp"
#include "benchtrack/special.hpp"

namespace benchtrack {

namespace {

enum : std::uint64_t {
  kStreamL = 0x101,
  kStreamPsi = 0x102,
  kStreamPhi = 0x103,
  kStreamPhiDeriv = 0x104,
  kStreamXi = 0x105,
  kStreamPhiRhMc = 0x106,
  kStreamReflected = 0x107,
};

// Scalar step constants shared by every estimator loop.
struct Kernel {
  double dt, sdt;
  double rho;
  double mu_tilde_dt;  // (rho - alpha^2/2) dt, drift of the R-driver
  double alpha_sdt;
  double muB_dt, sigB_sdt;
  double rho1, c1;  // H-driver noise weights on (z1, z0)
  double muZadj_dt, sigZ_sdt;
  double rho2, c2;  // Z-noise weights on (z1, z2)
  double beta, kappa1, kappa2, mu_Z, mu_B, sigma_B;
  double a;  // p/(1-p)
  bool bridge;
  double scW, scK;  // 2 sigma^2 dt of the two reflecting drivers

  Kernel(const ModelParams& mp, const McConfig& cfg) {
    const auto& d = mp.derived;
    const auto& b = mp.benchmark;
    dt = cfg.dt;
    sdt = std::sqrt(cfg.dt);
    rho = mp.preferences.rho;
    mu_tilde_dt = (rho - 0.5 * d.alpha * d.alpha) * dt;
    alpha_sdt = d.alpha * sdt;
    muB_dt = b.mu_B * dt;
    sigB_sdt = b.sigma_B * sdt;
    rho1 = d.rho1;
    c1 = std::sqrt(std::max(0.0, 1.0 - d.rho1 * d.rho1));
    muZadj_dt = (b.mu_Z - 0.5 * b.sigma_Z * b.sigma_Z) * dt;
    sigZ_sdt = b.sigma_Z * sdt;
    rho2 = d.rho2;
    c2 = std::sqrt(std::max(0.0, 1.0 - d.rho2 * d.rho2));
    beta = mp.preferences.beta;
    kappa1 = d.kappa1;
    kappa2 = d.kappa2;
    mu_Z = b.mu_Z;
    mu_B = b.mu_B;
    sigma_B = b.sigma_B;
    a = mp.preferences.p / (1.0 - mp.preferences.p);
    bridge = cfg.bridge_max;
    scW = 2.0 * d.alpha * d.alpha * dt;
    scK = 2.0 * b.sigma_B * b.sigma_B * dt;
  }
};

PathRng make_rng(const McConfig& cfg, std::uint64_t stream, std::size_t pi) {
  if (cfg.antithetic) return PathRng(cfg.seed, stream, pi / 2, (pi & 1) != 0);
  return PathRng(cfg.seed, stream, pi, false);
}

// Running-max update over one step with endpoints a -> b, driver variance
// sc = 2 sigma^2 dt, current running max mx (>= a). Samples the bridge
// maximum by inverting its conditional law; one uniform per call.
inline double bridge_max_update(double a, double b, double mx, double sc,
                                PathRng& rng) {
  double u = rng.u01();
  if (u <= 0.0) u = 1e-300;
  const double t = -sc * std::log(u);
  const double g1 = mx - a;
  const double g2 = mx - b;
  if (g2 >= 0.0 && t <= 4.0 * g1 * g2) return mx;
  const double d = b - a;
  const double m = 0.5 * (a + b + std::sqrt(d * d + t));
  return m > mx ? m : mx;
}

Estimate reduce(std::vector<double>& vals, bool antithetic, double trunc) {
  Estimate e =
      antithetic ? mean_estimate_antithetic(vals) : mean_estimate(vals);
  e.truncation_bound = trunc;
  return e;
}

// Deterministic envelope for the discarded tail of a dK-integral:
// E[K_{T+u}-K_T] <= mu_B^+ u + sigma_B sqrt(2u/pi), so
// int_T^inf e^{-rho s} dK <= e^{-rho T} (mu_B^+/rho + sigma_B/sqrt(2 rho)).
double dk_tail_bound(const Kernel& k, double horizon) {
  return k.beta * std::exp(-k.rho * horizon) *
         (std::max(k.mu_B, 0.0) / k.rho + k.sigma_B / std::sqrt(2.0 * k.rho));
}

}  // namespace

void McConfig::validate() const {
  if (n_paths < 2) throw ConfigError("n_paths must be >= 2");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(horizon > dt)) throw ConfigError("horizon must exceed dt");
  if (antithetic && (n_paths % 2) != 0) {
    throw ConfigError("antithetic runs need an even n_paths");
  }
}

std::size_t McConfig::n_steps() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

ReflectedPathSet simulate_reflected(const ModelParams& mp,
                                    const McConfig& cfg, double r, double h,
                                    double z, bool correlated) {
  cfg.validate();
  if (r < 0.0 || h < 0.0 || z < 0.0) {
    throw ConfigError("simulate_reflected: r, h, z must be >= 0");
  }
  if (mp.benchmark.sigma_B <= 0.0 && h > 0.0) {
    // H never moves without noise or drift; allowed, but flag the common
    // misconfiguration of asking for the H-system with sigma_B = 0.
    if (mp.benchmark.mu_B == 0.0) {
      throw ConfigError("simulate_reflected: degenerate H-driver");
    }
  }
  const std::size_t steps = cfg.n_steps();
  const double budget =
      static_cast<double>(cfg.n_paths) * static_cast<double>(steps + 1) * 5.0;
  if (budget > 5e7) {
    throw ConfigError(
        "simulate_reflected materializes full paths; this configuration is "
        "too large - use the streaming estimators instead");
  }
  const Kernel k(mp, cfg);

  ReflectedPathSet out;
  out.times.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) out.times[i] = k.dt * i;
  auto alloc = [&](std::vector<std::vector<double>>& m) {
    m.assign(cfg.n_paths, std::vector<double>(steps + 1, 0.0));
  };
  alloc(out.R);
  alloc(out.H);
  alloc(out.N);
  alloc(out.dL);
  alloc(out.dK);

  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamReflected, pi);
      double wtil = 0.0, maxw = 0.0, kdrv = 0.0, maxk = 0.0, logN = 0.0;
      const bool has_z = z > 0.0;
      if (has_z) logN = std::log(z);
      out.R[pi][0] = r;
      out.H[pi][0] = h;
      out.N[pi][0] = z;
      double prevL = 0.0, prevK = 0.0;
      for (std::size_t i = 1; i <= steps; ++i) {
        const double z1 = rng.normal();
        const double z0 = rng.normal();
        const double z2 = rng.normal();
        const double wprev = wtil;
        wtil += k.mu_tilde_dt - k.alpha_sdt * z1;
        if (k.bridge) {
          maxw = bridge_max_update(wprev, wtil, maxw, k.scW, rng);
        } else if (wtil > maxw) {
          maxw = wtil;
        }
        const double L = maxw > r ? maxw - r : 0.0;
        out.R[pi][i] = (r > maxw ? r : maxw) - wtil;
        out.dL[pi][i] = L - prevL;
        prevL = L;
        const double db3 = correlated ? k.rho1 * z1 + k.c1 * z0 : z0;
        const double kprev = kdrv;
        kdrv += k.muB_dt + k.sigB_sdt * db3;
        if (k.bridge) {
          maxk = bridge_max_update(kprev, kdrv, maxk, k.scK, rng);
        } else if (kdrv > maxk) {
          maxk = kdrv;
        }
        const double K = maxk > h ? maxk - h : 0.0;
        out.H[pi][i] = (h > maxk ? h : maxk) - kdrv;
        out.dK[pi][i] = K - prevK;
        prevK = K;
        if (has_z) {
          logN += k.muZadj_dt + k.sigZ_sdt * (k.rho2 * z1 + k.c2 * z2);
          out.N[pi][i] = std::exp(logN);
        }
      }
    }
  });
  return out;
}

Estimate estimate_l(const ModelParams& mp, const McConfig& cfg, double r,
                    double z) {
  cfg.validate();
  if (r < 0.0 || z < 0.0) throw ConfigError("estimate_l: r, z >= 0");
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  const double p = mp.preferences.p;
  const double pref1 = (1.0 - p) / p * std::pow(k.beta, -k.a);
  const double pref2 = k.beta * (k.kappa2 - k.mu_Z);
  const bool has_z = z > 0.0;

  std::vector<double> vals(cfg.n_paths), truncs(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamL, pi);
      double wtil = 0.0, maxw = 0.0;
      double logN = has_z ? std::log(z) : 0.0;
      // trapezoid, integrand at s=0
      double acc1 = 0.5 * k.dt * std::exp(k.a * r);
      double acc2 = has_z ? 0.5 * k.dt * std::exp(-r) * z : 0.0;
      double f1 = 0.0, f2 = 0.0;
      for (std::size_t i = 1; i <= steps; ++i) {
        const double z1 = rng.normal();
        const double wprev = wtil;
        wtil += k.mu_tilde_dt - k.alpha_sdt * z1;
        if (k.bridge) {
          maxw = bridge_max_update(wprev, wtil, maxw, k.scW, rng);
        } else if (wtil > maxw) {
          maxw = wtil;
        }
        const double R = (r > maxw ? r : maxw) - wtil;
        const double s = k.dt * static_cast<double>(i);
        const double w = i == steps ? 0.5 * k.dt : k.dt;
        f1 = std::exp(k.a * R - k.rho * s);
        acc1 += w * f1;
        if (has_z) {
          const double z2 = rng.normal();
          logN += k.muZadj_dt + k.sigZ_sdt * (k.rho2 * z1 + k.c2 * z2);
          f2 = std::exp(logN - k.rho * s - R);
          acc2 += w * f2;
        }
      }
      vals[pi] = pref1 * acc1 + pref2 * acc2;
      const double rho_z = std::max(k.rho - std::max(k.mu_Z, 0.0), 0.25 * k.rho);
      truncs[pi] = std::abs(pref1) * f1 / k.rho + std::abs(pref2) * f2 / rho_z;
    }
  });
  const double trunc = pairwise_sum(truncs) / static_cast<double>(cfg.n_paths);
  return reduce(vals, cfg.antithetic, trunc);
}

namespace {

// Shared loop for the local-time estimators. Computes, per path, the full
// dK-integral, its tau_r-stopped version, the first-passage discount, and
// the first-passage discount restricted to {zeta_h < tau_r}.
struct LocalTimeAcc {
  double full = 0.0;      // sum e^{-rho s - R} dK
  double stopped = 0.0;   // same, while the R-driver max stays below r
  double hit_disc = 0.0;  // e^{-rho zeta - R_zeta}, 0 if no passage by T
  double hit_before_tau = 0.0;
  bool hit = false;
};

LocalTimeAcc local_time_path(const Kernel& k, std::size_t steps, double r,
                             double h, bool correlated, PathRng& rng) {
  LocalTimeAcc acc;
  double wtil = 0.0, maxw = 0.0, kdrv = 0.0, maxk = 0.0;
  if (h <= 0.0) {  // zeta_0 = 0: discount at time zero is e^{-r}
    acc.hit = true;
    acc.hit_disc = std::exp(-r);
    if (r > 0.0) acc.hit_before_tau = acc.hit_disc;
  }
  for (std::size_t i = 1; i <= steps; ++i) {
    const double z1 = rng.normal();
    const double z0 = rng.normal();
    const double wprev = wtil;
    wtil += k.mu_tilde_dt - k.alpha_sdt * z1;
    if (k.bridge) {
      maxw = bridge_max_update(wprev, wtil, maxw, k.scW, rng);
    } else if (wtil > maxw) {
      maxw = wtil;
    }
    const double db3 = correlated ? k.rho1 * z1 + k.c1 * z0 : z0;
    const double kprev = kdrv;
    kdrv += k.muB_dt + k.sigB_sdt * db3;
    double newmax = maxk;
    if (k.bridge) {
      newmax = bridge_max_update(kprev, kdrv, maxk, k.scK, rng);
    } else if (kdrv > maxk) {
      newmax = kdrv;
    }
    if (newmax > maxk) {
      const double prev = maxk;
      maxk = newmax;
      if (maxk > h) {
        const double dK = maxk - (h > prev ? h : prev);
        const double R = (r > maxw ? r : maxw) - wtil;
        const double disc =
            std::exp(-k.rho * k.dt * static_cast<double>(i) - R);
        acc.full += disc * dK;
        if (maxw < r) acc.stopped += disc * dK;
        if (!acc.hit) {
          acc.hit = true;
          acc.hit_disc = disc;
          if (maxw < r) acc.hit_before_tau = disc;
        }
      }
    }
  }
  return acc;
}

}  // namespace

Estimate estimate_psi(const ModelParams& mp, const McConfig& cfg, double r,
                      double h) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_psi requires sigma_B > 0");
  }
  if (r < 0.0 || h < 0.0) throw ConfigError("estimate_psi: r, h >= 0");
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  std::vector<double> vals(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamPsi, pi);
      vals[pi] = -k.beta * local_time_path(k, steps, r, h, true, rng).full;
    }
  });
  return reduce(vals, cfg.antithetic, dk_tail_bound(k, cfg.horizon));
}

Estimate estimate_phi(const ModelParams& mp, const McConfig& cfg, double r,
                      double h) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_phi requires sigma_B > 0");
  }
  if (r < 0.0 || h < 0.0) throw ConfigError("estimate_phi: r, h >= 0");
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  std::vector<double> vals(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamPhi, pi);
      vals[pi] = -k.beta * local_time_path(k, steps, r, h, false, rng).full;
    }
  });
  return reduce(vals, cfg.antithetic, dk_tail_bound(k, cfg.horizon));
}

PhiDerivatives estimate_phi_derivatives(const ModelParams& mp,
                                        const McConfig& cfg, double r,
                                        double h) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_phi_derivatives requires sigma_B > 0");
  }
  if (r < 0.0 || h < 0.0) {
    throw ConfigError("estimate_phi_derivatives: r, h >= 0");
  }
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  std::vector<double> vr(cfg.n_paths), vh(cfg.n_paths), misses(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamPhiDeriv, pi);
      const LocalTimeAcc acc = local_time_path(k, steps, r, h, false, rng);
      vr[pi] = k.beta * acc.stopped;
      vh[pi] = k.beta * acc.hit_disc;
      misses[pi] = acc.hit ? 0.0 : 1.0;
    }
  });
  PhiDerivatives out;
  out.phi_r = reduce(vr, cfg.antithetic, dk_tail_bound(k, cfg.horizon));
  const double miss_frac =
      pairwise_sum(misses) / static_cast<double>(cfg.n_paths);
  out.phi_h = reduce(vh, cfg.antithetic,
                     k.beta * std::exp(-k.rho * cfg.horizon) * miss_frac);
  double err = 0.0;
  const double q = phi_rh_quadrature(mp, r, h, &err);
  out.phi_rh = Estimate{q, err, 0, 0.0};
  return out;
}

Estimate estimate_phi_rh_mc(const ModelParams& mp, const McConfig& cfg,
                            double r, double h) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_phi_rh_mc requires sigma_B > 0");
  }
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  std::vector<double> vals(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamPhiRhMc, pi);
      vals[pi] =
          -k.beta * local_time_path(k, steps, r, h, false, rng).hit_before_tau;
    }
  });
  return reduce(vals, cfg.antithetic,
                k.beta * std::exp(-k.rho * cfg.horizon));
}

// ---------------------------------------------------------------------------
// phi_rh quadrature and table

namespace {

// Piecewise adaptive integration over [0, s_cut] with breakpoints at the
// natural time scales of the integrand (first-passage spikes can sit many
// orders of magnitude below s_cut and would otherwise be missed).
QuadResult integrate_scaled(const std::function<double(double)>& f,
                            std::vector<double> scales, double s_cut,
                            double abs_tol, double rel_tol) {
  std::vector<double> pts{0.0};
  for (double s : scales) {
    for (double m : {0.1, 1.0, 10.0}) {
      const double v = s * m;
      if (v > 0.0 && v < s_cut) pts.push_back(v);
    }
  }
  pts.push_back(s_cut);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  QuadResult total{0.0, 0.0};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    QuadResult piece;
    if (pts[i] == 0.0) {
      piece = integrate_sqrt_origin(f, pts[i + 1], abs_tol, rel_tol);
    } else {
      const auto shifted = [&](double u) { return f(pts[i] + u); };
      piece = integrate(shifted, 0.0, pts[i + 1] - pts[i], abs_tol, rel_tol);
    }
    total.value += piece.value;
    total.abs_error += piece.abs_error;
  }
  return total;
}

}  // namespace

double phi_rh_quadrature(const ModelParams& mp, double r, double h,
                         double* abs_err) {
  if (r < 0.0 || h < 0.0) throw DomainError("phi_rh_quadrature: r, h >= 0");
  const double beta = mp.preferences.beta;
  if (abs_err) *abs_err = 0.0;
  if (r == 0.0) return 0.0;
  if (h == 0.0) return -beta * std::exp(-r);
  if (mp.benchmark.sigma_B <= 0.0) {
    throw DomainError("phi_rh_quadrature requires sigma_B > 0");
  }
  const double rho = mp.preferences.rho;
  const double mu_B = mp.benchmark.mu_B;
  const double sigma_B = mp.benchmark.sigma_B;
  const double alpha = mp.derived.alpha;
  const DriftSpec spec = DriftSpec::dual_log_driver(mp);

  const auto inner = [&](double s) {
    // e^{-r} int_0^r (int e^x phi1 dx) dy, the mass of paths whose running
    // max stays below r, weighted by e^{-R}.
    if (s <= 0.0) return 0.0;
    const double f2 = phi2(s, h, mu_B, sigma_B);
    if (f2 < 1e-280) return 0.0;
    const auto g = [&](double y) {
      return phi1_weighted_x_integral(s, y, 1.0, spec);
    };
    const double Y = integrate(g, 0.0, r, 1e-12, 1e-8).value;
    return std::exp(-rho * s - r) * f2 * Y;
  };
  const double s_cut = 42.0 / rho;
  const double s_race = (r / alpha) * (r / alpha);
  const double s_hit = (h / sigma_B) * (h / sigma_B);
  const double s_drift = mu_B > 0.0 ? h / mu_B : s_cut;
  const QuadResult q = integrate_scaled(inner, {s_race, s_hit, s_drift},
                                        s_cut, 1e-12, 1e-8);
  if (abs_err) *abs_err = q.abs_error;
  const double v = -beta * q.value;
  return v < 0.0 ? v : 0.0;
}

double phi_factorized_quadrature(const ModelParams& mp, double r, double h,
                                 double* abs_err) {
  if (r < 0.0 || h < 0.0) {
    throw DomainError("phi_factorized_quadrature: r, h >= 0");
  }
  if (mp.benchmark.sigma_B <= 0.0) {
    throw DomainError("phi_factorized_quadrature requires sigma_B > 0");
  }
  const double rho = mp.preferences.rho;
  const double alpha = mp.derived.alpha;
  const double driftR = 0.5 * alpha * alpha - rho;
  const double mu_B = mp.benchmark.mu_B;
  const double sigma_B = mp.benchmark.sigma_B;
  const double beta = mp.preferences.beta;

  const auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double rate = expected_local_time_rate(s, h, mu_B, sigma_B);
    if (rate <= 0.0) return 0.0;
    return std::exp(-rho * s) * rdbm_exp_neg_moment(s, r, driftR, alpha) *
           rate;
  };
  const double s_cut = 42.0 / rho;
  const double s_hit = (h / sigma_B) * (h / sigma_B);
  const double s_drift = mu_B > 0.0 ? h / mu_B : s_cut;
  const QuadResult q =
      integrate_scaled(f, {s_hit, s_drift}, s_cut, 1e-12, 1e-8);
  if (abs_err) *abs_err = q.abs_error;
  return -beta * q.value;
}

// The surface has a genuine boundary layer: the (0,0) corner value depends
// on the direction of approach (a first-passage race between the two
// drivers), and the reflected dual state spends most of its time within
// 1e-2 of r = 0. Axes are therefore refined geometrically toward zero and
// interpolation is bilinear (monotone, no overshoot near the cliff).
namespace {

// Common driver of the dG-weighted quadratures: integrates
// weight(s) * dE[G_s^h] over s with the spike-scale breakpoints.
double dg_weighted_quadrature(const ModelParams& mp, double r, double h,
                              const std::function<double(double)>& weight,
                              double* abs_err) {
  if (r < 0.0 || h < 0.0) throw DomainError("quadrature: r, h >= 0");
  if (mp.benchmark.sigma_B <= 0.0) {
    throw DomainError("quadrature requires sigma_B > 0");
  }
  const double rho = mp.preferences.rho;
  const double mu_B = mp.benchmark.mu_B;
  const double sigma_B = mp.benchmark.sigma_B;
  const auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double rate = expected_local_time_rate(s, h, mu_B, sigma_B);
    if (rate <= 0.0) return 0.0;
    return weight(s) * rate;
  };
  const double s_cut = 42.0 / rho;
  const double alpha = mp.derived.alpha;
  const double s_race = (r / alpha) * (r / alpha);
  const double s_hit = (h / sigma_B) * (h / sigma_B);
  const double s_drift = mu_B > 0.0 ? h / mu_B : s_cut;
  const QuadResult q = integrate_scaled(f, {s_race, s_hit, s_drift}, s_cut,
                                        1e-12, 1e-8);
  if (abs_err) *abs_err = q.abs_error;
  return q.value;
}

}  // namespace

double phi_r_quadrature(const ModelParams& mp, double r, double h,
                        double* abs_err) {
  const double beta = mp.preferences.beta;
  if (r == 0.0) {
    if (abs_err) *abs_err = 0.0;
    return 0.0;  // tau_0 = 0
  }
  const double rho = mp.preferences.rho;
  const DriftSpec spec = DriftSpec::dual_log_driver(mp);
  // E[e^{-R_s} 1{s < tau_r}] = e^{-r} int_0^r (int e^x phi1 dx) dy
  const auto weight = [&](double s) {
    const auto g = [&](double y) {
      return phi1_weighted_x_integral(s, y, 1.0, spec);
    };
    const double Y = integrate(g, 0.0, r, 1e-12, 1e-8).value;
    return std::exp(-rho * s - r) * Y;
  };
  return beta * dg_weighted_quadrature(mp, r, h, weight, abs_err);
}

double phi_rr_plus_phi_r_quadrature(const ModelParams& mp, double r, double h,
                                    double* abs_err) {
  const double beta = mp.preferences.beta;
  const double rho = mp.preferences.rho;
  const DriftSpec spec = DriftSpec::dual_log_driver(mp);
  // beta int e^{-rho s - r} (int_{-inf}^r e^x phi1(s, x, r) dx) dE[G_s]
  const auto weight = [&](double s) {
    return std::exp(-rho * s - r) *
           phi1_weighted_x_integral(s, r, 1.0, spec);
  };
  const double v = beta * dg_weighted_quadrature(mp, r, h, weight, abs_err);
  return v > 0.0 ? v : 0.0;
}

double phi_h_quadrature(const ModelParams& mp, double r, double h,
                        double* abs_err) {
  const double beta = mp.preferences.beta;
  if (abs_err) *abs_err = 0.0;
  if (h == 0.0) return beta * std::exp(-r);
  if (mp.benchmark.sigma_B <= 0.0) {
    throw DomainError("phi_h_quadrature requires sigma_B > 0");
  }
  const double rho = mp.preferences.rho;
  const double mu_B = mp.benchmark.mu_B;
  const double sigma_B = mp.benchmark.sigma_B;
  const double alpha = mp.derived.alpha;
  const double driftR = 0.5 * alpha * alpha - rho;
  // eta_h independent of R: beta int phi2(s,h) E[e^{-rho s - R_s}] ds
  const auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double fp = phi2(s, h, mu_B, sigma_B);
    if (fp < 1e-280) return 0.0;
    return fp * std::exp(-rho * s) *
           rdbm_exp_neg_moment(s, r, driftR, alpha);
  };
  const double s_cut = 42.0 / rho;
  const double s_hit = (h / sigma_B) * (h / sigma_B);
  const double s_drift = mu_B > 0.0 ? h / mu_B : s_cut;
  const QuadResult q =
      integrate_scaled(f, {s_hit, s_drift}, s_cut, 1e-12, 1e-8);
  if (abs_err) *abs_err = q.abs_error;
  return beta * q.value;
}

struct PhiRhTable::Impl {
  std::vector<double> ra, ha, za;  // za: h-major [j * nr + i]
  double r_max = 0.0, h_max = 0.0;

  static std::size_t cell(const std::vector<double>& axis, double x) {
    // largest k with axis[k] <= x, clamped to a valid cell start
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - axis.begin());
    if (k == 0) return 0;
    return std::min(k - 1, axis.size() - 2);
  }

  double eval_clamped(double r, double h) const {
    const std::size_t i = cell(ra, r);
    const std::size_t j = cell(ha, h);
    const double tr = (r - ra[i]) / (ra[i + 1] - ra[i]);
    const double th = (h - ha[j]) / (ha[j + 1] - ha[j]);
    const std::size_t nr = ra.size();
    const double v00 = za[j * nr + i];
    const double v10 = za[j * nr + i + 1];
    const double v01 = za[(j + 1) * nr + i];
    const double v11 = za[(j + 1) * nr + i + 1];
    return (1.0 - th) * ((1.0 - tr) * v00 + tr * v10) +
           th * ((1.0 - tr) * v01 + tr * v11);
  }
};

PhiRhTable::PhiRhTable() : impl_(new Impl) {}
PhiRhTable::PhiRhTable(PhiRhTable&&) noexcept = default;
PhiRhTable& PhiRhTable::operator=(PhiRhTable&&) noexcept = default;
PhiRhTable::~PhiRhTable() = default;

double PhiRhTable::r_max() const { return impl_->r_max; }
double PhiRhTable::h_max() const { return impl_->h_max; }

double PhiRhTable::eval(double r, double h) const {
  const Impl& im = *impl_;
  double scale = 1.0;
  if (r < 0.0) r = 0.0;
  if (h < 0.0) h = 0.0;
  if (r > im.r_max) {
    scale = std::exp(-(r - im.r_max));  // |phi_rh| <= beta e^{-r} envelope
    r = im.r_max;
  }
  if (h > im.h_max) h = im.h_max;
  return scale * im.eval_clamped(r, h);
}

namespace {

// {0} followed by a geometric ladder from x_min to x_max.
std::vector<double> refined_axis(double x_max, std::size_t n, double x_min) {
  std::vector<double> axis(n, 0.0);
  const double q =
      std::pow(x_max / x_min, 1.0 / static_cast<double>(n - 2));
  double v = x_min;
  for (std::size_t k = 1; k < n; ++k) {
    axis[k] = std::min(v, x_max);
    v *= q;
  }
  axis.back() = x_max;
  return axis;
}

}  // namespace

PhiRhTable build_phi_rh_table(const ModelParams& mp, double r_max,
                              double h_max, std::size_t nr, std::size_t nh) {
  if (nr < 4 || nh < 4 || !(r_max > 0.0) || !(h_max > 0.0)) {
    throw GridError("phi_rh table needs nr, nh >= 4 and positive extents");
  }
  PhiRhTable table;
  auto& im = *table.impl_;
  im.r_max = r_max;
  im.h_max = h_max;
  // resolve r down to a small fraction of the dual driver's stationary
  // scale and h down to a few per mille of the driver volatility
  const double alpha = mp.derived.alpha;
  const double rho = mp.preferences.rho;
  const double r_scale = alpha * alpha / (2.0 * rho) + 1e-6;
  im.ra = refined_axis(r_max, nr, std::min(0.25 * r_scale, 1e-3));
  im.ha = refined_axis(h_max, nh, 1e-3);
  im.za.assign(nr * nh, 0.0);

  parallel_for(nr * nh, [&](std::size_t b, std::size_t e) {
    for (std::size_t idx = b; idx < e; ++idx) {
      const std::size_t i = idx % nr;
      const std::size_t j = idx / nr;
      im.za[j * nr + i] = phi_rh_quadrature(mp, im.ra[i], im.ha[j]);
    }
  });
  return table;
}

Estimate estimate_xi(const ModelParams& mp, const McConfig& cfg, double r,
                     double h, const PhiRhTable& table) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_xi requires sigma_B > 0");
  }
  if (r < 0.0 || h < 0.0) throw ConfigError("estimate_xi: r, h >= 0");
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();

  std::vector<double> disc(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    disc[i] = std::exp(-k.rho * k.dt * static_cast<double>(i));
  }

  std::vector<double> vals(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = make_rng(cfg, kStreamXi, pi);
      double wtil = 0.0, maxw = 0.0, kdrv = 0.0, maxk = 0.0;
      double acc = 0.5 * k.dt * table.eval(r, h);
      for (std::size_t i = 1; i <= steps; ++i) {
        const double z1 = rng.normal();
        const double z0 = rng.normal();
        const double wprev = wtil;
        wtil += k.mu_tilde_dt - k.alpha_sdt * z1;
        if (k.bridge) {
          maxw = bridge_max_update(wprev, wtil, maxw, k.scW, rng);
        } else if (wtil > maxw) {
          maxw = wtil;
        }
        const double kprev = kdrv;
        kdrv += k.muB_dt + k.sigB_sdt * (k.rho1 * z1 + k.c1 * z0);
        if (k.bridge) {
          maxk = bridge_max_update(kprev, kdrv, maxk, k.scK, rng);
        } else if (kdrv > maxk) {
          maxk = kdrv;
        }
        const double R = (r > maxw ? r : maxw) - wtil;
        const double H = (h > maxk ? h : maxk) - kdrv;
        const double w = i == steps ? 0.5 * k.dt : k.dt;
        acc += w * disc[i] * table.eval(R, H);
      }
      vals[pi] = -k.kappa1 * acc;
    }
  });
  // |phi_rh| <= beta, so the tail is below |kappa1| beta e^{-rho T} / rho.
  const double trunc =
      std::abs(k.kappa1) * k.beta * std::exp(-k.rho * cfg.horizon) / k.rho;
  return reduce(vals, cfg.antithetic, trunc);
}

PsiNodeEstimates estimate_psi_node(const ModelParams& mp, const McConfig& cfg,
                                   double r, double h, std::uint64_t stream) {
  cfg.validate();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("estimate_psi_node requires sigma_B > 0");
  }
  const Kernel k(mp, cfg);
  const std::size_t steps = cfg.n_steps();
  const std::size_t n = cfg.n_paths;
  std::vector<double> v_psi(n), v_psir(n), v_psih(n), v_psirh(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t pi = b; pi < e; ++pi) {
      PathRng rng = cfg.antithetic
                        ? PathRng(cfg.seed, stream, pi / 2, (pi & 1) != 0)
                        : PathRng(cfg.seed, stream, pi, false);
      const LocalTimeAcc acc = local_time_path(k, steps, r, h, true, rng);
      v_psi[pi] = -k.beta * acc.full;
      v_psir[pi] = k.beta * acc.stopped;
      v_psih[pi] = k.beta * acc.hit_disc;
      v_psirh[pi] = -k.beta * acc.hit_before_tau;
    }
  });
  PsiNodeEstimates out;
  const double tail = dk_tail_bound(k, cfg.horizon);
  out.psi = reduce(v_psi, cfg.antithetic, tail);
  out.psi_r = reduce(v_psir, cfg.antithetic, tail);
  out.psi_h = reduce(v_psih, cfg.antithetic,
                     k.beta * std::exp(-k.rho * cfg.horizon));
  out.psi_rh = reduce(v_psirh, cfg.antithetic,
                      k.beta * std::exp(-k.rho * cfg.horizon));
  return out;
}

}  // namespace benchtrack
