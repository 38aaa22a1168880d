#include "benchtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/parallel.hpp"

namespace benchtrack {

namespace {

enum : std::uint64_t {
  kStreamBenchmark = 0x201,
  kStreamControlled = 0x202,
};

PathRng path_rng(const McConfig& cfg, std::uint64_t stream, std::size_t pi,
                 std::uint64_t salt) {
  if (cfg.antithetic) {
    return PathRng(cfg.seed ^ salt, stream, pi / 2, (pi & 1) != 0);
  }
  return PathRng(cfg.seed ^ salt, stream, pi, false);
}

}  // namespace

BenchmarkResult simulate_benchmark(const ModelParams& mp, const McConfig& cfg,
                                   std::size_t store_cap) {
  cfg.validate();
  const auto& b = mp.benchmark;
  const std::size_t steps = cfg.n_steps();
  const std::size_t n = cfg.n_paths;
  const std::size_t stored = std::min(store_cap, n);

  // corr(W^gamma, W^eta) = gamma . eta for unit-norm weights
  double rge = 0.0;
  for (std::size_t i = 0; i < mp.benchmark.gamma.size(); ++i) {
    rge += b.gamma[i] * b.eta[i];
  }
  rge = std::clamp(rge, -1.0, 1.0);
  const double cge = std::sqrt(std::max(0.0, 1.0 - rge * rge));

  const double sdt = std::sqrt(cfg.dt);
  const double muZadj = (b.mu_Z - 0.5 * b.sigma_Z * b.sigma_Z) * cfg.dt;

  BenchmarkResult out;
  out.n_paths = n;
  out.times.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) out.times[i] = cfg.dt * i;
  out.B.assign(stored, std::vector<double>(steps + 1, 0.0));
  out.m.assign(stored, std::vector<double>(steps + 1, 0.0));
  out.Z.assign(stored, std::vector<double>(steps + 1, 0.0));
  out.M.assign(stored, std::vector<double>(steps + 1, 0.0));

  std::vector<double> m_final(n);
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t pi = lo; pi < hi; ++pi) {
      PathRng rng = path_rng(cfg, kStreamBenchmark, pi, 0);
      double B = b.b0;
      double m = std::max(b.m0, b.b0);
      double logZ = b.z0 > 0.0 ? std::log(b.z0) : 0.0;
      const bool has_z = b.z0 > 0.0;
      const bool keep = pi < stored;
      if (keep) {
        out.B[pi][0] = B;
        out.m[pi][0] = m;
        out.Z[pi][0] = b.z0;
        out.M[pi][0] = m + b.z0;
      }
      for (std::size_t i = 1; i <= steps; ++i) {
        const double zg = rng.normal();
        const double ze = rng.normal();
        B += b.mu_B * cfg.dt + b.sigma_B * sdt * zg;
        if (B > m) m = B;
        double Z = 0.0;
        if (has_z) {
          logZ += muZadj + b.sigma_Z * sdt * (rge * zg + cge * ze);
          Z = std::exp(logZ);
        }
        if (keep) {
          out.B[pi][i] = B;
          out.m[pi][i] = m;
          out.Z[pi][i] = Z;
          out.M[pi][i] = m + Z;
        }
        if (i == steps) {
          m_final[pi] = m + Z;
        }
      }
    }
  });
  out.mean_M_T = cfg.antithetic ? mean_estimate_antithetic(m_final)
                                : mean_estimate(m_final);
  return out;
}

namespace {

struct ControlledAccums {
  std::vector<double> J, util, inj, xT, iT, zT, extrap;
};

}  // namespace

ControlledResult simulate_controlled(const DualField& field,
                                     const McConfig& cfg, double x, double h,
                                     double z, PolicyMode mode,
                                     std::size_t store_cap) {
  cfg.validate();
  if (x < 0.0 || h < 0.0 || z < 0.0) {
    throw ConfigError("simulate_controlled: x, h, z >= 0");
  }
  const ModelParams& mp = field.params();
  if (mp.benchmark.sigma_B <= 0.0) {
    throw ConfigError("simulate_controlled requires sigma_B > 0 "
                      "(benchmark-only mode handles sigma_B = 0)");
  }
  const double p = mp.preferences.p;
  if (mode == PolicyMode::NoConsumption && p <= 0.0) {
    throw ConfigError("zero consumption has utility -inf for p < 0");
  }
  const auto& b = mp.benchmark;
  const int d = mp.market.d;
  const std::size_t steps = cfg.n_steps();
  const std::size_t n = cfg.n_paths;
  const std::size_t stored_n = std::min(store_cap, n);
  const double beta = mp.preferences.beta;
  const double rho = mp.preferences.rho;
  const double sdt = std::sqrt(cfg.dt);
  const double muZadj = (b.mu_Z - 0.5 * b.sigma_Z * b.sigma_Z) * cfg.dt;
  const bool has_z = z > 0.0;

  std::vector<double> disc(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    disc[i] = std::exp(-rho * cfg.dt * static_cast<double>(i));
  }

  ControlledAccums acc;
  acc.J.resize(n);
  acc.util.resize(n);
  acc.inj.resize(n);
  acc.xT.resize(n);
  acc.iT.resize(n);
  acc.zT.resize(n);
  acc.extrap.resize(n);

  ControlledResult out;
  out.stored.resize(stored_n);

  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> theta(d), sig_theta(d), dw(d);
    for (std::size_t pi = lo; pi < hi; ++pi) {
      PathRng rng = path_rng(cfg, kStreamControlled,
                             pi, static_cast<std::uint64_t>(mode));
      PolicySession session(field);
      double X = x;
      double Idrv = h;   // h - mu_B t - sigma_B W^gamma
      double C = 0.0;    // running-max regulator of the I-driver (= m - m0)
      double I = h;
      double logZ = has_z ? std::log(z) : 0.0;
      double Z = z;
      double V = x + h + z;  // canonical primal start: m0 = h, b0 = 0
      double m = h;
      double A = 0.0;
      double util = 0.0, inj = 0.0;
      std::size_t extrap_steps = 0;

      PathRecord* rec = pi < stored_n ? &out.stored[pi] : nullptr;
      if (rec) {
        rec->t.resize(steps + 1);
        rec->X.resize(steps + 1);
        rec->I.resize(steps + 1);
        rec->Z.resize(steps + 1);
        rec->m.resize(steps + 1);
        rec->V.resize(steps + 1);
        rec->A_star.resize(steps + 1);
        rec->L_X.assign(steps + 1, 0.0);
        rec->c.resize(steps + 1);
        rec->theta.resize((steps + 1) * d);
        rec->t[0] = 0.0;
        rec->X[0] = X;
        rec->I[0] = I;
        rec->Z[0] = Z;
        rec->m[0] = m;
        rec->V[0] = V;
        rec->A_star[0] = A;
      }

      for (std::size_t i = 1; i <= steps; ++i) {
        const auto ctl = session.controls(X, I, Z, theta);
        if (ctl.r_star > field.grid().r_max) ++extrap_steps;
        double c_rate, u_c;
        switch (mode) {
          case PolicyMode::Optimal:
            c_rate = ctl.c_star;
            u_c = std::exp(p * ctl.log_c_star) / p;
            break;
          case PolicyMode::ZeroInvestment:
            std::fill(theta.begin(), theta.end(), 0.0);
            c_rate = ctl.c_star;
            u_c = std::exp(p * ctl.log_c_star) / p;
            break;
          case PolicyMode::HalfConsumption: {
            c_rate = 0.5 * ctl.c_star;
            u_c = std::exp(p * (ctl.log_c_star + std::log(0.5))) / p;
            break;
          }
          case PolicyMode::NoConsumption:
            c_rate = 0.0;
            u_c = 0.0;
            break;
        }
        util += disc[i - 1] * u_c * cfg.dt;

        for (int k = 0; k < d; ++k) dw[k] = sdt * rng.normal();
        double zg = 0.0, zeta = 0.0;
        for (int k = 0; k < d; ++k) {
          zg += b.gamma[k] * dw[k];
          zeta += b.eta[k] * dw[k];
        }
        // sigma' theta, then theta' sigma dW
        double drift = 0.0, noise = 0.0;
        for (int k = 0; k < d; ++k) drift += theta[k] * mp.market.mu[k];
        for (int jj = 0; jj < d; ++jj) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += theta[k] * mp.market.sigma[k * d + jj];
          noise += s * dw[jj];
        }
        const double dV = drift * cfg.dt + noise - c_rate * cfg.dt;
        V += dV;

        double Znew = 0.0, dZ = 0.0;
        if (has_z) {
          logZ += muZadj + b.sigma_Z * zeta;
          Znew = std::exp(logZ);
          dZ = Znew - Z;
        }
        Idrv += -b.mu_B * cfg.dt - b.sigma_B * zg;
        const double Cnew = std::max(C, -(Idrv - h));  // max(0, max(-(Idrv-h)))
        const double dm = Cnew - C;
        C = Cnew;
        I = Idrv + C;
        m = h + C;

        const double Xprop = X + dV - dZ - dm;
        double dL = 0.0;
        if (Xprop < 0.0) {
          dL = -Xprop;
          X = 0.0;
        } else {
          X = Xprop;
        }
        inj += disc[i] * dL;
        Z = Znew;
        A = std::max(A, m + Z - V);
        if (A < 0.0) A = 0.0;

        if (rec) {
          rec->t[i] = cfg.dt * static_cast<double>(i);
          rec->X[i] = X;
          rec->I[i] = I;
          rec->Z[i] = Z;
          rec->m[i] = m;
          rec->V[i] = V;
          rec->A_star[i] = A;
          rec->L_X[i] = dL;
          rec->c[i - 1] = c_rate;
          for (int k = 0; k < d; ++k) rec->theta[(i - 1) * d + k] = theta[k];
        }
      }
      if (rec) {
        rec->c[steps] = rec->c[steps - 1];
        for (int k = 0; k < d; ++k) {
          rec->theta[steps * d + k] = rec->theta[(steps - 1) * d + k];
        }
        rec->discounted_utility = util;
        rec->discounted_injection = inj;
      }
      acc.util[pi] = util;
      acc.inj[pi] = inj;
      acc.J[pi] = util - beta * inj;
      acc.xT[pi] = X;
      acc.iT[pi] = I;
      acc.zT[pi] = Z;
      acc.extrap[pi] = static_cast<double>(extrap_steps) /
                       static_cast<double>(steps);
    }
  });

  out.J = cfg.antithetic ? mean_estimate_antithetic(acc.J)
                         : mean_estimate(acc.J);
  out.utility = cfg.antithetic ? mean_estimate_antithetic(acc.util)
                               : mean_estimate(acc.util);
  out.injection = cfg.antithetic ? mean_estimate_antithetic(acc.inj)
                                 : mean_estimate(acc.inj);
  out.extrapolated_fraction =
      pairwise_sum(acc.extrap) / static_cast<double>(n);

  // Lipschitz envelope for the discarded tail of the value integral.
  const double ell = mp.derived.ell;
  const double xT = pairwise_sum(acc.xT) / static_cast<double>(n);
  const double iT = pairwise_sum(acc.iT) / static_cast<double>(n);
  const double zT = pairwise_sum(acc.zT) / static_cast<double>(n);
  const double u000 = primal_value(field, 0.0, 0.0, 0.0);
  const double tail = std::exp(-rho * cfg.horizon) *
                      (beta * (xT + iT) + beta / ell * zT + std::abs(u000));
  out.J.truncation_bound = tail;
  out.utility.truncation_bound = tail;
  out.injection.truncation_bound = tail / beta;

  const InvertResult inv = invert_dual(field, x, h, z);
  const auto q0 = field.query(inv.r_star, h, z);
  out.u_reference = q0.v + x * inv.y_star;
  out.u_reference_se = q0.se_v;
  return out;
}

InjectionResult estimate_injection(const DualField& field, const McConfig& cfg,
                                   double v0, double m0, double z0,
                                   double b0) {
  if (v0 < 0.0 || m0 < 0.0 || z0 < 0.0) {
    throw ConfigError("estimate_injection: v0, m0, z0 >= 0");
  }
  const double mb = std::max(m0, b0);
  const double h0 = mb - b0;
  const double x0 = std::max(v0 - mb - z0, 0.0);

  const ControlledResult sim =
      simulate_controlled(field, cfg, x0, h0, z0, PolicyMode::Optimal, 0);

  InjectionResult out;
  out.discounted_injection = sim.injection;
  out.immediate_injection = std::max(mb + z0 - v0, 0.0);
  out.lower_bound =
      z0 > 0.0 ? tilde_w(v0, z0, field.params().derived.ell) : 0.0;
  out.u_reference = sim.u_reference;
  return out;
}

namespace {
void put(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void write_paths_csv(std::ostream& os, const ControlledResult& result, int d) {
  os << "path_id,t,X,I,Z,m,M,V,A_star";
  for (int k = 1; k <= d; ++k) os << ",theta_" << k;
  os << ",c,L_X\n";
  for (std::size_t pi = 0; pi < result.stored.size(); ++pi) {
    const PathRecord& r = result.stored[pi];
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      os << pi << ',';
      put(os, r.t[i]);
      for (const double* col : {&r.X[i], &r.I[i], &r.Z[i], &r.m[i]}) {
        os << ',';
        put(os, *col);
      }
      os << ',';
      put(os, r.m[i] + r.Z[i]);
      os << ',';
      put(os, r.V[i]);
      os << ',';
      put(os, r.A_star[i]);
      for (int k = 0; k < d; ++k) {
        os << ',';
        put(os, r.theta[i * d + k]);
      }
      os << ',';
      put(os, r.c[i]);
      os << ',';
      put(os, r.L_X[i]);
      os << '\n';
    }
  }
}

void write_benchmark_csv(std::ostream& os, const BenchmarkResult& result) {
  os << "path_id,t,B,m,Z,M\n";
  for (std::size_t pi = 0; pi < result.B.size(); ++pi) {
    for (std::size_t i = 0; i < result.times.size(); ++i) {
      os << pi << ',';
      put(os, result.times[i]);
      os << ',';
      put(os, result.B[pi][i]);
      os << ',';
      put(os, result.m[pi][i]);
      os << ',';
      put(os, result.Z[pi][i]);
      os << ',';
      put(os, result.M[pi][i]);
      os << '\n';
    }
  }
}

}  // namespace benchtrack
