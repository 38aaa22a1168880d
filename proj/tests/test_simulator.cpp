#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/simulator.hpp"
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

McConfig sim_cfg(std::size_t n, double dt = 2e-3, double T = 6.0,
                 std::uint64_t seed = 0x51A1) {
  McConfig cfg;
  cfg.n_paths = n;
  cfg.dt = dt;
  cfg.horizon = T;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("benchmark paths") {
  SUBCASE("deterministic GBM when sigma_Z = 0") {
    ModelParams mp = testutil::growth_params();
    mp.benchmark.sigma_Z = 0.0;
    mp.derived = derive_constants(mp.market, mp.benchmark, mp.preferences);
    const McConfig cfg = sim_cfg(8, 1e-2, 1.0);
    const BenchmarkResult res = simulate_benchmark(mp, cfg, 8);
    for (const auto& path : res.Z) {
      for (std::size_t i = 0; i < res.times.size(); ++i) {
        CHECK(path[i] == doctest::Approx(
                             0.8 * std::exp(2.0 * res.times[i]))
                             .epsilon(1e-10));
      }
    }
  }
  SUBCASE("running maximum is nondecreasing and the moment matches") {
    const McConfig cfg = sim_cfg(4'000, 1e-3, 1.0);
    const CheckResult r = check_benchmark_moment(testutil::growth_params(), cfg);
    INFO(r.detail);
    CHECK(r.pass);
  }
  SUBCASE("deterministic drifted part") {
    // sigma_B = 0: m_t = max(m0 v b0, b0 + mu_B t) exactly
    const ModelParams mp = testutil::growth_params();
    const McConfig cfg = sim_cfg(4, 1e-2, 1.0);
    const BenchmarkResult res = simulate_benchmark(mp, cfg, 4);
    for (const auto& path : res.m) {
      for (std::size_t i = 0; i < res.times.size(); ++i) {
        CHECK(path[i] ==
              doctest::Approx(std::max(1.0, 1.0 + 2.0 * res.times[i]))
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("controlled system invariants") {
  const DualField& f = shared_field();
  const McConfig cfg = sim_cfg(40, 2e-3, 4.0);
  const ControlledResult res =
      simulate_controlled(f, cfg, 1.0, 0.5, 0.8, PolicyMode::Optimal, 40);
  REQUIRE(res.stored.size() == 40);

  const double x0 = 1.0, h0 = 0.5, z0 = 0.8;
  const double v0 = x0 + h0 + z0;
  for (const PathRecord& r : res.stored) {
    double prevA = -1.0, prevm = -1.0;
    double maxD = 0.0;
    double compl_sum = 0.0;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
      CHECK(r.X[i] >= 0.0);
      CHECK(r.I[i] >= -1e-12);
      CHECK(r.Z[i] > 0.0);
      CHECK(r.A_star[i] >= prevA - 1e-12);
      CHECK(r.m[i] >= prevm - 1e-12);
      prevA = r.A_star[i];
      prevm = r.m[i];
      compl_sum += r.X[i] * r.L_X[i];

      // running-max reconstruction of the auxiliary state from the stored
      // primal columns: exact on the grid by construction
      const double D = (r.m[i] + r.Z[i] - h0 - z0) - (r.V[i] - v0);
      maxD = std::max(maxD, D - x0);
      const double Xrec = x0 - D + std::max(0.0, maxD);
      CHECK(std::abs(Xrec - r.X[i]) < 1e-9);
      const double Arec = std::max(0.0, (r.m[i] + r.Z[i]) - r.V[i]);
      CHECK(r.A_star[i] >= Arec - 1e-9);
    }
    CHECK(compl_sum < 1e-10);  // reflection only acts at the boundary
    // discounted regulator increments match the stored accumulator
    double inj = 0.0;
    const double rho = f.params().preferences.rho;
    for (std::size_t i = 1; i < r.t.size(); ++i) {
      inj += std::exp(-rho * r.t[i]) * r.L_X[i];
    }
    CHECK(inj == doctest::Approx(r.discounted_injection).epsilon(1e-12));
  }
}

TEST_CASE("objective dominance of the feedback policy") {
  const DualField& f = shared_field();
  const McConfig cfg = sim_cfg(4'000, 2e-3, 6.0);
  const ControlledResult opt =
      simulate_controlled(f, cfg, 1.0, 0.5, 0.8, PolicyMode::Optimal, 0);
  INFO("J* = ", opt.J.value, " u = ", opt.u_reference);
  for (PolicyMode mode : {PolicyMode::ZeroInvestment,
                          PolicyMode::HalfConsumption,
                          PolicyMode::NoConsumption}) {
    const ControlledResult sub =
        simulate_controlled(f, cfg, 1.0, 0.5, 0.8, mode, 0);
    INFO("mode ", static_cast<int>(mode), ": J = ", sub.J.value);
    CHECK(sub.J.value <= opt.u_reference + 3.0 * sub.J.std_error +
                             3.0 * opt.u_reference_se +
                             sub.J.truncation_bound);
  }
}

TEST_CASE("no-consumption mode needs positive risk aversion exponent") {
  McConfig cfg = sim_cfg(64, 4e-3, 2.0);
  const ModelParams mp = testutil::base_params(3.0, -1.0);
  const DualField f =
      build_dual_field(mp, sim_cfg(500, 4e-3, 4.0), GridSpec{4.0, 1.0, 5, 5});
  CHECK_THROWS_AS(
      simulate_controlled(f, cfg, 1.0, 0.2, 0.8, PolicyMode::NoConsumption, 0),
      ConfigError);
  // the optimal mode itself runs fine for p < 0
  const ControlledResult res =
      simulate_controlled(f, cfg, 1.0, 0.2, 0.8, PolicyMode::Optimal, 0);
  CHECK(std::isfinite(res.J.value));
}

TEST_CASE("injection estimates") {
  const DualField& f = shared_field();
  const double ell = f.params().derived.ell;
  const McConfig cfg = sim_cfg(4'000, 2e-3, 6.0);

  SUBCASE("positivity and the explicit lower bound") {
    const InjectionResult inj = estimate_injection(f, cfg, 0.8, 0.0, 0.8, 0.0);
    INFO("injection = ", inj.discounted_injection.value,
         " bound = ", inj.lower_bound);
    CHECK(inj.discounted_injection.value >= 0.0);
    CHECK(inj.lower_bound == doctest::Approx(tilde_w(0.8, 0.8, ell)));
    CHECK(inj.discounted_injection.value +
              3.0 * inj.discounted_injection.std_error +
              inj.discounted_injection.truncation_bound >=
          inj.lower_bound);
    CHECK(inj.immediate_injection == 0.0);
  }
  SUBCASE("immediate injection below the floor") {
    const InjectionResult inj = estimate_injection(f, cfg, 0.3, 0.0, 0.8, 0.0);
    CHECK(inj.immediate_injection == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("csv export") {
  const DualField& f = shared_field();
  const McConfig cfg = sim_cfg(3, 1e-2, 0.05);
  const ControlledResult res =
      simulate_controlled(f, cfg, 1.0, 0.5, 0.8, PolicyMode::Optimal, 3);
  std::ostringstream os;
  write_paths_csv(os, res, 1);
  const std::string text = os.str();
  CHECK(text.rfind("path_id,t,X,I,Z,m,M,V,A_star,theta_1,c,L_X\n", 0) == 0);
  std::size_t rows = 0;
  for (char c : text) rows += c == '\n';
  CHECK(rows == 1 + 3 * (cfg.n_steps() + 1));

  // byte-identical reruns
  const ControlledResult res2 =
      simulate_controlled(f, cfg, 1.0, 0.5, 0.8, PolicyMode::Optimal, 3);
  std::ostringstream os2;
  write_paths_csv(os2, res2, 1);
  CHECK(os2.str() == text);

  const BenchmarkResult bres =
      simulate_benchmark(testutil::growth_params(), cfg, 2);
  std::ostringstream bs;
  write_benchmark_csv(bs, bres);
  CHECK(bs.str().rfind("path_id,t,B,m,Z,M\n", 0) == 0);
}

TEST_CASE("state domain errors") {
  const DualField& f = shared_field();
  const McConfig cfg = sim_cfg(16, 1e-2, 0.1);
  CHECK_THROWS_AS(
      simulate_controlled(f, cfg, -1.0, 0.0, 0.0, PolicyMode::Optimal, 0),
      ConfigError);
  CHECK_THROWS_AS(estimate_injection(f, cfg, -0.1, 0.0, 0.8, 0.0),
                  ConfigError);
}
