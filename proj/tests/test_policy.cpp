#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "benchtrack/dual_field.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/policy.hpp"
#include "benchtrack/rng.hpp"
#include "benchtrack/verification.hpp"
#include "oracles.hpp"

using namespace benchtrack;

namespace {

const DualField& shared_field() {
  static const DualField field = [] {
    McConfig cfg;
    cfg.n_paths = 2'000;
    cfg.dt = 2e-3;
    cfg.horizon = 6.0;
    cfg.seed = 0xF1E1D;
    return build_dual_field(testutil::base_params(), cfg,
                            GridSpec{4.0, 1.5, 13, 9});
  }();
  return field;
}

}  // namespace

TEST_CASE("inversion basics") {
  const DualField& f = shared_field();
  const double beta = f.params().preferences.beta;

  SUBCASE("zero wealth maps to the boundary point") {
    const InvertResult inv = invert_dual(f, 0.0, 0.3, 0.8);
    CHECK(inv.y_star == beta);
    CHECK(inv.r_star == 0.0);
  }
  SUBCASE("monotone in x") {
    double prev = beta + 1e-9;
    for (double x : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0}) {
      const double y = invert_dual(f, x, 0.3, 0.8).y_star;
      CHECK(y <= prev + 1e-12);
      CHECK(y > 0.0);
      CHECK(y <= beta);
      prev = y;
    }
  }
  SUBCASE("round trip through the dual slope") {
    for (double y0 : {0.9 * beta, 0.5 * beta, 0.25 * beta}) {
      for (double h : {0.0, 0.2, 0.7}) {
        const double x = -f.u_hat(y0, h, 0.8).u_y;
        const InvertResult inv = invert_dual(f, x, h, 0.8);
        CHECK(std::abs(inv.y_star - y0) < 1e-9);
      }
    }
  }
  SUBCASE("negative wealth rejected, coverage overflow reported") {
    CHECK_THROWS_AS(invert_dual(f, -1.0, 0.0, 0.0), DomainError);
    CHECK_THROWS_AS(invert_dual(f, 1e50, 0.0, 0.0), BracketError);
  }
}

TEST_CASE("primal value shape") {
  const DualField& f = shared_field();
  const double beta = f.params().preferences.beta;
  PathRng rng(11, 5, 0);

  SUBCASE("nondecreasing and beta-Lipschitz in x") {
    for (int i = 0; i < 40; ++i) {
      const double h = 1.2 * rng.u01();
      const double z = 1.5 * rng.u01();
      const double x1 = 3.0 * rng.u01();
      const double x2 = 3.0 * rng.u01();
      const double lo = std::min(x1, x2), hi = std::max(x1, x2);
      const double ulo = primal_value(f, lo, h, z);
      const double uhi = primal_value(f, hi, h, z);
      CHECK(uhi >= ulo - 1e-10);
      CHECK(uhi - ulo <= beta * (hi - lo) + 1e-10);
    }
  }
  SUBCASE("midpoint concavity") {
    for (int i = 0; i < 100; ++i) {
      const double h = 1.2 * rng.u01();
      const double z = 1.5 * rng.u01();
      const double x1 = 3.0 * rng.u01();
      const double x2 = 3.0 * rng.u01();
      const double mid = primal_value(f, 0.5 * (x1 + x2), h, z);
      const double avg = 0.5 * (primal_value(f, x1, h, z) +
                                primal_value(f, x2, h, z));
      CHECK(mid >= avg - 1e-9);
    }
  }
  SUBCASE("marginal value equals the inverted dual point") {
    for (double x : {0.1, 0.7, 1.8}) {
      const double dx = 1e-4;
      const double fd = (primal_value(f, x + dx, 0.3, 0.8) -
                         primal_value(f, x - dx, 0.3, 0.8)) /
                        (2.0 * dx);
      const double y = invert_dual(f, x, 0.3, 0.8).y_star;
      CHECK(std::abs(fd - y) <= 1e-3 * (1.0 + std::abs(y)));
    }
  }
}

TEST_CASE("original-coordinate value map") {
  const DualField& f = shared_field();
  const double beta = f.params().preferences.beta;
  const double m = 0.0, b = 1.0, z = 0.8;
  const double seam = std::max(m, b) + z;  // 1.8

  SUBCASE("branches agree at the seam") {
    const double w1 = original_value(f, seam, m, z, b);
    const double w2 = primal_value(f, 0.0, std::max(m, b) - b, z);
    CHECK(w1 == doctest::Approx(w2).epsilon(1e-12));
  }
  SUBCASE("linear shortfall below the seam") {
    const double at_seam = original_value(f, seam, m, z, b);
    for (double d : {0.1, 0.5, 1.0}) {
      CHECK(original_value(f, seam - d, m, z, b) ==
            doctest::Approx(at_seam - beta * d).epsilon(1e-12));
    }
  }
  SUBCASE("above the seam maps into the auxiliary value") {
    CHECK(original_value(f, 2.0, m, z, b) ==
          doctest::Approx(primal_value(f, 0.2, 0.0, z)).epsilon(1e-12));
  }
}

TEST_CASE("feedback controls") {
  const DualField& f = shared_field();
  const ModelParams& mp = f.params();
  const double beta = mp.preferences.beta;
  const double p = mp.preferences.p;

  SUBCASE("boundary consumption") {
    const PolicyEvaluation ev = feedback_controls(f, 0.0, 0.3, 0.8);
    CHECK(ev.c_star ==
          doctest::Approx(std::pow(beta, 1.0 / (p - 1.0))).epsilon(1e-12));
    CHECK(ev.y_star == beta);
  }
  SUBCASE("consumption is nondecreasing in x and bounded") {
    const double Cq = mp.derived.Cq;
    double prev = 0.0;
    for (double x : {0.0, 0.3, 0.8, 1.5, 3.0}) {
      const PolicyEvaluation ev = feedback_controls(f, x, 0.3, 0.8);
      CHECK(ev.c_star >= prev - 1e-12);
      CHECK(ev.c_star <= Cq * (1.0 + x));
      prev = ev.c_star;
    }
  }
  SUBCASE("dual second-order relations against finite differences") {
    const double x = 1.0, h = 0.5, z = 0.8, d = 1e-3;
    const PolicyEvaluation ev = feedback_controls(f, x, h, z);
    const auto yat = [&](double xx, double hh, double zz) {
      return invert_dual(f, xx, hh, zz).y_star;
    };
    const double u_xx_fd = (yat(x + d, h, z) - yat(x - d, h, z)) / (2 * d);
    const double u_xh_fd = (yat(x, h + d, z) - yat(x, h - d, z)) / (2 * d);
    const double u_xz_fd = (yat(x, h, z + d) - yat(x, h, z - d)) / (2 * d);
    const double u_x = ev.y_star;
    // rebuild theta* from the finite-difference curvature and compare
    const auto& dd = mp.derived;
    const double num_fd =
        dd.iss_mu[0] * u_x - mp.benchmark.sigma_B * dd.iss_sgamma[0] * u_xh_fd +
        mp.benchmark.sigma_Z * dd.iss_seta[0] * z * (u_xx_fd - u_xz_fd);
    const double theta_fd = -num_fd / u_xx_fd;
    INFO("theta*=", ev.theta_star[0], " theta_fd=", theta_fd);
    CHECK(std::abs(theta_fd - ev.theta_star[0]) <=
          0.05 * (1.0 + std::abs(ev.theta_star[0])));
    CHECK(u_xx_fd < 0.0);
  }
  SUBCASE("policy consistency bundle") {
    const CheckResult r = check_policy_consistency(f, 0x1234, 50);
    INFO(r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("warm session matches the bisection path") {
  const DualField& f = shared_field();
  PolicySession session(f);
  std::vector<double> theta;
  PathRng rng(13, 6, 0);
  double x = 0.7;
  for (int i = 0; i < 200; ++i) {
    x = std::max(0.0, x + 0.2 * rng.normal());
    const double h = 1.2 * rng.u01();
    const double z = 1.5 * rng.u01();
    const auto ctl = session.controls(x, h, z, theta);
    const InvertResult inv = invert_dual(f, x, h, z);
    CHECK(std::abs(ctl.y_star - inv.y_star) <= 1e-9 * (1.0 + inv.y_star));
    const PolicyEvaluation ev = feedback_controls(f, x, h, z);
    CHECK(std::abs(ctl.c_star - ev.c_star) <=
          1e-8 * (1.0 + std::abs(ev.c_star)));
    CHECK(std::abs(theta[0] - ev.theta_star[0]) <=
          1e-6 * (1.0 + std::abs(ev.theta_star[0])));
  }
}
