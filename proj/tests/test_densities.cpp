#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "benchtrack/densities.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/quadrature.hpp"
#include "benchtrack/rng.hpp"
#include "benchtrack/special.hpp"
#include "oracles.hpp"

using namespace benchtrack;

TEST_CASE("special function helpers") {
  for (double x : {0.1, 1.0, 5.0, 10.0, 24.0}) {
    CHECK(erfcx(x) ==
          doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-12));
  }
  // asymptotic branch against the identity erfcx(x) ~ 1/(x sqrt(pi))
  CHECK(erfcx(30.0) == doctest::Approx(1.0 / (30.0 * std::sqrt(M_PI)))
                           .epsilon(1e-3));
  for (double a : {0.0, 5.0, -3.0}) {
    for (double c : {-2.0, 0.0, 1.0, 4.0}) {
      CHECK(exp_mul_norm_sf(a, c) ==
            doctest::Approx(std::exp(a) * norm_sf(c)).epsilon(1e-12));
    }
  }
  // the cancellation regime: e^{800} sf(40) must stay finite and accurate
  const double v = exp_mul_norm_sf(800.0, 40.0);
  CHECK(v > 0.0);
  CHECK(std::isfinite(v));
}

TEST_CASE("quadrature sanity") {
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0).value ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(integrate_upper([](double x) { return std::exp(-x); }, 0.0).value ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(integrate_sqrt_origin([](double x) { return 1.0 / std::sqrt(x); },
                              1.0)
            .value == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("ziggurat normals are standard") {
  PathRng rng(kDefaultSeed, 0x77, 0);
  const std::size_t n = 2'000'000;
  double s1 = 0, s2 = 0, s4 = 0, tail = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
    if (std::abs(x) > 3.0) tail += 1.0;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(double(n)));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(5e-3));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(2e-2));
  CHECK(tail / n == doctest::Approx(0.0026998).epsilon(0.08));
}

TEST_CASE("joint endpoint/maximum density: analytics") {
  SUBCASE("marginal of the maximum is the folded normal when driftless") {
    const DriftSpec spec{0.0, 1.0};
    for (double y : {0.0, 0.4, 1.3, 2.5}) {
      CHECK(phi1_weighted_x_integral(1.0, y, 0.0, spec) ==
            doctest::Approx(2.0 * norm_pdf(y)).epsilon(1e-10));
    }
  }
  SUBCASE("normalization, driftless") {
    const DriftSpec spec{0.0, 1.0};
    const double mass =
        integrate([&](double y) {
          return phi1_weighted_x_integral(1.0, y, 0.0, spec);
        }, 0.0, 12.0).value;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("normalization over random drift/vol/horizon") {
    PathRng rng(123, 0x88, 0);
    for (int k = 0; k < 8; ++k) {
      const DriftSpec spec{-1.0 + 2.0 * rng.u01(), 0.3 + 1.2 * rng.u01()};
      const double s = 0.3 + 2.0 * rng.u01();
      const double hi =
          spec.mu_hat * s + 8.0 * spec.sigma_hat * std::sqrt(s) + 1.0;
      const double mass =
          integrate([&](double y) {
            return phi1_weighted_x_integral(s, y, 0.0, spec);
          }, 0.0, std::max(hi, 1.0)).value;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("closed-form weighted integral against raw quadrature") {
    const DriftSpec spec{2.995, 0.1};  // dual driver at the base parameters
    for (double y : {0.05, 0.4, 1.1}) {
      for (double s : {0.1, 0.5}) {
        const double lo = std::min(0.0, spec.mu_hat * s) -
                          10.0 * spec.sigma_hat * std::sqrt(s) - 1.0;
        const double raw =
            integrate([&](double x) {
              return std::exp(x) * phi1(s, x, y, spec);
            }, lo, y, 1e-12, 1e-10).value;
        CHECK(phi1_weighted_x_integral(s, y, 1.0, spec) ==
              doctest::Approx(raw).epsilon(1e-7));
      }
    }
  }
  SUBCASE("domain") {
    const DriftSpec spec{0.0, 1.0};
    CHECK_THROWS_AS(phi1(1.0, 0.5, 0.2, spec), DomainError);
    CHECK_THROWS_AS(phi1(1.0, -0.5, -0.2, spec), DomainError);
    CHECK_THROWS_AS(phi1(0.0, 0.0, 0.0, spec), DomainError);
  }
}

TEST_CASE("joint endpoint/maximum density: simulation histogram") {
  // Exact-in-law sampler for (W_s, max W): pins the drift convention.
  for (const DriftSpec spec : {DriftSpec{0.5, 0.8}, DriftSpec{2.995, 0.1}}) {
    const double s = 1.0;
    const double sd = spec.sigma_hat * std::sqrt(s);
    const double m = spec.mu_hat * s;
    const double x_lo = m - 4.0 * sd, x_hi = m + 4.0 * sd;
    const double y_hi = std::max(m, 0.0) + 4.0 * sd;
    const int nx = 6, ny = 6;
    std::vector<double> counts(nx * ny, 0.0);
    PathRng rng(31415, 0x99, 0);
    const std::size_t n = 200'000;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [w, mx] =
          testutil::sample_endpoint_max(rng, s, spec.mu_hat, spec.sigma_hat);
      const int ix = static_cast<int>((w - x_lo) / (x_hi - x_lo) * nx);
      const int iy = static_cast<int>(mx / y_hi * ny);
      if (ix >= 0 && ix < nx && iy >= 0 && iy < ny) counts[iy * nx + ix] += 1;
    }
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const double xa = x_lo + (x_hi - x_lo) * ix / nx;
        const double xb = x_lo + (x_hi - x_lo) * (ix + 1) / nx;
        const double ya = y_hi * iy / ny;
        const double yb = y_hi * (iy + 1) / ny;
        const double prob =
            integrate([&](double y) {
              const double xu = std::min(xb, y);
              if (xu <= xa) return 0.0;
              return integrate([&](double x) { return phi1(s, x, y, spec); },
                               xa, xu, 1e-10, 1e-8)
                  .value;
            }, ya, yb, 1e-9, 1e-7).value;
        const double expect = n * prob;
        if (expect < 25.0) continue;  // skip starved cells
        const double se = std::sqrt(expect * (1.0 - prob));
        CHECK(std::abs(counts[iy * nx + ix] - expect) <= 4.0 * se);
      }
    }
  }
}

TEST_CASE("first passage density") {
  SUBCASE("total mass, upward drift") {
    const double mass = integrate_sqrt_origin(
        [&](double s) { return phi2(s, 1.0, 0.1, 0.1); }, 400.0, 1e-10,
        1e-8).value;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("defective mass under downward drift") {
    const double mass = integrate_sqrt_origin(
        [&](double s) { return phi2(s, 0.5, -0.2, 1.0); }, 4000.0, 1e-10,
        1e-8).value;
    CHECK(mass == doctest::Approx(std::exp(2.0 * -0.2 * 0.5)).epsilon(1e-6));
  }
  SUBCASE("unimodal in s") {
    double prev = phi2(0.05, 1.0, 0.1, 0.1);
    bool rising = true;
    int flips = 0;
    for (double s = 0.1; s < 60.0; s += 0.05) {
      const double cur = phi2(s, 1.0, 0.1, 0.1);
      if (rising && cur < prev) {
        rising = false;
        ++flips;
      }
      CHECK(cur >= 0.0);
      if (!rising) CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    CHECK(flips == 1);
  }
  SUBCASE("hitting-time histogram against the inverse-Gaussian sampler") {
    PathRng rng(2718, 0xAA, 0);
    const std::size_t n = 100'000;
    const double h = 1.0, mu = 0.1, sig = 0.1;
    const int nb = 12;
    const double t_hi = 25.0;
    std::vector<double> counts(nb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = testutil::sample_first_passage(rng, h, mu, sig);
      const int ib = static_cast<int>(t / t_hi * nb);
      if (ib >= 0 && ib < nb) counts[ib] += 1;
    }
    for (int ib = 0; ib < nb; ++ib) {
      const double a = t_hi * ib / nb;
      const double b = t_hi * (ib + 1) / nb;
      const double prob =
          integrate([&](double s) { return phi2(s, h, mu, sig); },
                    std::max(a, 1e-8), b, 1e-11, 1e-9).value;
      const double expect = n * prob;
      if (expect < 25.0) continue;
      CHECK(std::abs(counts[ib] - expect) <=
            4.0 * std::sqrt(expect * (1.0 - prob)));
    }
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(phi2(1.0, 0.0, 0.1, 0.1), DomainError);
    CHECK_THROWS_AS(phi2(1.0, 1.0, 0.1, 0.0), DomainError);
  }
}

TEST_CASE("reflected transition density") {
  SUBCASE("normalization") {
    for (double s : {0.5, 1.0, 2.0}) {
      for (double x0 : {0.0, 0.3, 1.0}) {
        const double mass =
            integrate([&](double x) {
              return rdbm_density(s, x0, x, -0.1, 0.1);
            }, 0.0, 10.0, 1e-10, 1e-8).value;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
  SUBCASE("driftless case folds the Gaussian") {
    for (double x : {0.0, 0.2, 0.9}) {
      const double expect = norm_pdf((x - 0.3) / 0.5) / 0.5 +
                            norm_pdf((x + 0.3) / 0.5) / 0.5;
      CHECK(rdbm_density(0.25, 0.3, x, 0.0, 1.0) ==
            doctest::Approx(expect).epsilon(1e-10));
    }
  }
  SUBCASE("histogram against the exact reflected sampler") {
    PathRng rng(555, 0xBB, 0);
    const std::size_t n = 400'000;
    const double s = 1.0, x0 = 0.3, drift = -0.4, vol = 0.5;
    const int nb = 10;
    const double hi = 2.2;
    std::vector<double> counts(nb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x =
          testutil::sample_reflected_endpoint(rng, s, x0, drift, vol);
      const int ib = static_cast<int>(x / hi * nb);
      if (ib >= 0 && ib < nb) counts[ib] += 1;
    }
    for (int ib = 0; ib < nb; ++ib) {
      const double a = hi * ib / nb;
      const double b = hi * (ib + 1) / nb;
      const double prob =
          integrate([&](double x) {
            return rdbm_density(s, x0, x, drift, vol);
          }, a, b, 1e-10, 1e-8).value;
      const double expect = n * prob;
      if (expect < 25.0) continue;
      CHECK(std::abs(counts[ib] - expect) <=
            4.0 * std::sqrt(expect * (1.0 - prob)));
    }
  }
  SUBCASE("exponential moment closed form") {
    for (double s : {0.2, 0.7, 3.0}) {
      for (double x0 : {0.0, 0.5, 2.0}) {
        const double direct =
            integrate([&](double x) {
              return std::exp(-x) * rdbm_density(s, x0, x, -2.995, 0.1);
            }, 0.0, 12.0, 1e-12, 1e-10).value;
        CHECK(rdbm_exp_neg_moment(s, x0, -2.995, 0.1) ==
              doctest::Approx(direct).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("expected local time") {
  SUBCASE("zero horizon") {
    CHECK(expected_local_time(0.0, 0.5, 0.1, 0.1) == 0.0);
  }
  SUBCASE("far level never touched") {
    CHECK(expected_local_time(1.0, 10.0, 0.1, 0.1) < 1e-12);
  }
  SUBCASE("exact sampler at the boundary start") {
    PathRng rng(777, 0xCC, 0);
    const std::size_t n = 400'000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [w, mx] = testutil::sample_endpoint_max(rng, 1.0, 0.1, 0.1);
      (void)w;
      sum += mx;
      sumsq += mx * mx;
    }
    const double mean = sum / n;
    const double se =
        std::sqrt((sumsq / n - mean * mean) / static_cast<double>(n));
    CHECK(std::abs(expected_local_time(1.0, 0.0, 0.1, 0.1) - mean) <=
          3.0 * se);
  }
  SUBCASE("exact sampler away from the boundary") {
    PathRng rng(778, 0xCD, 0);
    const std::size_t n = 400'000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [w, mx] = testutil::sample_endpoint_max(rng, 1.0, 0.1, 0.1);
      (void)w;
      const double g = mx > 0.1 ? mx - 0.1 : 0.0;
      sum += g;
      sumsq += g * g;
    }
    const double mean = sum / n;
    const double se =
        std::sqrt((sumsq / n - mean * mean) / static_cast<double>(n));
    CHECK(std::abs(expected_local_time(1.0, 0.1, 0.1, 0.1) - mean) <=
          3.0 * se);
  }
  SUBCASE("monotone in s and h") {
    double prev = 0.0;
    for (double s : {0.25, 0.5, 1.0, 2.0}) {
      const double cur = expected_local_time(s, 0.2, 0.1, 0.1);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
    prev = 1e300;
    for (double h : {0.0, 0.1, 0.3, 0.8}) {
      const double cur = expected_local_time(1.0, h, 0.1, 0.1);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}
