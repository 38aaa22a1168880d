#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "benchtrack/dual_field.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/rng.hpp"
#include "benchtrack/verification.hpp"
#include "oracles.hpp"

using namespace benchtrack;

namespace {

McConfig field_cfg() {
  McConfig cfg;
  cfg.n_paths = 2'000;
  cfg.dt = 2e-3;
  cfg.horizon = 6.0;
  cfg.seed = 0xF1E1D;
  return cfg;
}

const DualField& shared_field() {
  static const DualField field = build_dual_field(
      testutil::base_params(), field_cfg(), GridSpec{4.0, 1.5, 13, 9});
  return field;
}

}  // namespace

TEST_CASE("grid suggestion and validation") {
  const ModelParams mp = testutil::base_params();
  const GridSpec g = GridSpec::suggest(mp, 8.0);
  CHECK(g.r_max >= 4.0);
  CHECK(g.h_max >= 1.0);
  const GridSpec bad1{0.0, 1.0, 8, 8};
  CHECK_THROWS_AS(bad1.validate(), GridError);
  const GridSpec bad2{1.0, 1.0, 3, 8};
  CHECK_THROWS_AS(bad2.validate(), GridError);
  CHECK_THROWS_AS(
      build_dual_field(testutil::growth_params(), field_cfg(), GridSpec{}),
      ConfigError);  // sigma_B = 0
}

TEST_CASE("boundary identities") {
  const CheckResult r = check_field_boundaries(shared_field());
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("exact affine dependence on z") {
  const DualField& f = shared_field();
  const double beta = f.params().preferences.beta;
  const double ell = f.params().derived.ell;
  PathRng rng(5, 1, 0);
  for (int i = 0; i < 20; ++i) {
    const double r = 4.0 * rng.u01();
    const double h = 1.5 * rng.u01();
    const double z1 = 2.0 * rng.u01();
    const double z2 = z1 + 1.3;
    const double coef =
        beta * std::exp(-r) - beta / ell * std::exp(-ell * r);
    CHECK(f.query(r, h, z2).v - f.query(r, h, z1).v ==
          doctest::Approx((z2 - z1) * coef).epsilon(1e-10));
  }
}

TEST_CASE("dual transform identities") {
  const DualField& f = shared_field();
  const double beta = f.params().preferences.beta;
  CHECK(std::abs(f.u_hat(beta, 0.3, 0.8).u_y) < 1e-12);

  PathRng rng(6, 2, 0);
  for (int i = 0; i < 100; ++i) {
    const double y = beta * std::exp(-4.0 * rng.u01());
    const double h = 1.5 * rng.u01();
    const double z = 2.0 * rng.u01();
    const auto u = f.u_hat(y, h, z);
    CHECK(u.u_yy > 0.0);
    CHECK(u.u_y <= 1e-12);
  }
  CHECK_THROWS_AS(f.u_hat(0.0, 0.1, 0.1), DomainError);
  CHECK_THROWS_AS(f.u_hat(2.0 * beta, 0.1, 0.1), DomainError);
}

TEST_CASE("table sign and envelope checks") {
  const DualField& f = shared_field();
  const GridSpec& g = f.grid();
  const double beta = f.params().preferences.beta;
  const auto& psi = f.table("psi");
  const auto& psi_se = f.table_se("psi");
  const auto& psi_h = f.table("psi_h");
  const auto& psi_h_se = f.table_se("psi_h");
  const auto& psi_rh = f.table("psi_rh");
  const auto& psi_rh_se = f.table_se("psi_rh");
  for (std::size_t j = 0; j < g.nh; ++j) {
    for (std::size_t i = 0; i < g.nr; ++i) {
      const std::size_t node = j * g.nr + i;
      const double r =
          g.r_max * static_cast<double>(i) / static_cast<double>(g.nr - 1);
      CHECK(psi[node] <= 3.0 * psi_se[node] + 1e-12);
      CHECK(psi_h[node] >= -3.0 * psi_h_se[node] - 1e-12);
      CHECK(std::abs(psi_rh[node]) <=
            beta * std::exp(-r) + 5.0 * psi_rh_se[node] + 1e-12);
    }
  }
}

TEST_CASE("dual slope blows up towards y = 0") {
  const DualField& f = shared_field();
  auto F = [&](double r) {
    double v_r, v_rr;
    f.query_vr_vrr(r, 0.2, 0.8, v_r, v_rr);
    return std::exp(r) * v_r;
  };
  const double rm = f.grid().r_max;
  CHECK(F(rm) > F(0.5 * rm));
  CHECK(F(0.5 * rm) > 0.0);
  CHECK(F(rm) > 10.0);
}

TEST_CASE("serialization round trip") {
  const DualField& f = shared_field();
  const std::string text = f.to_json();
  const DualField g = DualField::from_json(text);
  PathRng rng(7, 3, 0);
  for (int i = 0; i < 25; ++i) {
    const double r = 4.0 * rng.u01();
    const double h = 1.5 * rng.u01();
    const double z = 2.0 * rng.u01();
    const auto qa = f.query(r, h, z);
    const auto qb = g.query(r, h, z);
    CHECK(qa.v == qb.v);
    CHECK(qa.v_r == qb.v_r);
    CHECK(qa.v_rr == qb.v_rr);
    CHECK(qa.v_h == qb.v_h);
    CHECK(qa.se_v == qb.se_v);
  }
  CHECK(g.to_json() == text);  // byte-identical re-serialization

  const char* path = "field_roundtrip_test.json";
  f.save(path);
  const DualField h2 = DualField::load(path);
  CHECK(h2.to_json() == text);
  std::remove(path);

  CHECK_THROWS_AS(DualField::from_json("{"), ParseError);
  CHECK_THROWS_AS(DualField::from_json(R"({"schema_version": 99})"),
                  ParseError);
}

TEST_CASE("PDE residuals") {
  SUBCASE("closed-form component at machine precision") {
    const CheckResult r =
        check_closed_form_residual(testutil::base_params());
    INFO(r.detail);
    CHECK(r.pass);
  }
  SUBCASE("full equation within the noise budget") {
    const ResidualReport rep = verify_pde_residuals(shared_field(), 5, 5, 3);
    INFO(rep.to_string());
    CHECK(rep.pass);
  }
}

TEST_CASE("extrapolation flag and coverage") {
  const DualField& f = shared_field();
  CHECK(!f.query(1.0, 0.5, 0.8).extrapolated);
  CHECK(f.query(6.0, 0.5, 0.8).extrapolated);
  CHECK(f.query(1.0, 2.5, 0.8).extrapolated);
  CHECK_THROWS_AS(f.query(-0.1, 0.0, 0.0), DomainError);
}

TEST_CASE("grid refinement consistency") {
  const ModelParams mp = testutil::base_params();
  const DualField fine =
      build_dual_field(mp, field_cfg(), GridSpec{4.0, 1.5, 25, 17});
  const DualField& coarse = shared_field();
  PathRng rng(8, 4, 0);
  for (int i = 0; i < 20; ++i) {
    const double r = 0.2 + 3.6 * rng.u01();
    const double h = 0.05 + 1.3 * rng.u01();
    const auto qa = coarse.query(r, h, 0.8);
    const auto qb = fine.query(r, h, 0.8);
    // noise plus the coarse grid's own interpolation-error scale
    const double tol = 6.0 * (qa.se_v + qb.se_v) + 3e-3;
    CHECK(std::abs(qa.v - qb.v) <= tol);
  }
}
