// Microbenchmarks for the hot paths: driver stepping, density evaluation,
// field queries, and the dual inversion.

#include <benchmark/benchmark.h>

#include <vector>

#include "benchtrack/closed_form.hpp"
#include "benchtrack/densities.hpp"
#include "benchtrack/dual_field.hpp"
#include "benchtrack/mc_engine.hpp"
#include "benchtrack/params.hpp"
#include "benchtrack/policy.hpp"
#include "benchtrack/rng.hpp"

namespace {

using namespace benchtrack;

ModelParams base_params() {
  MarketParams m{1, {0.1}, {1.0}};
  BenchmarkParams b;
  b.mu_Z = 0.1;
  b.sigma_Z = 0.1;
  b.mu_B = 0.1;
  b.sigma_B = 0.1;
  b.gamma = {1.0};
  b.eta = {1.0};
  b.z0 = 0.8;
  b.m0 = 0.0;
  b.b0 = -0.5;
  PreferenceParams pref{0.5, 3.0, 1.0};
  return make_model(m, b, pref);
}

const DualField& bench_field() {
  static const DualField field = [] {
    McConfig cfg;
    cfg.n_paths = 1'000;
    cfg.dt = 4e-3;
    cfg.horizon = 6.0;
    cfg.seed = 1;
    return build_dual_field(base_params(), cfg, GridSpec{4.0, 1.5, 13, 9});
  }();
  return field;
}

void BM_normal_draws(benchmark::State& state) {
  PathRng rng(1, 2, 3);
  double acc = 0.0;
  for (auto _ : state) acc += rng.normal();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_normal_draws);

void BM_path_steps_l_estimator(benchmark::State& state) {
  const ModelParams mp = base_params();
  McConfig cfg;
  cfg.n_paths = 16;
  cfg.dt = 1e-3;
  cfg.horizon = static_cast<double>(state.range(0)) * cfg.dt;
  cfg.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_l(mp, cfg, 0.5, 0.8));
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_paths * cfg.n_steps());
}
BENCHMARK(BM_path_steps_l_estimator)->Arg(1000);

void BM_local_time_steps(benchmark::State& state) {
  const ModelParams mp = base_params();
  McConfig cfg;
  cfg.n_paths = 16;
  cfg.dt = 2e-3;
  cfg.horizon = static_cast<double>(state.range(0)) * cfg.dt;
  cfg.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_psi(mp, cfg, 0.5, 0.2));
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_paths * cfg.n_steps());
}
BENCHMARK(BM_local_time_steps)->Arg(1000);

void BM_closed_form_partials(benchmark::State& state) {
  const ClosedFormL l(base_params());
  double r = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(l.partials(r, 0.8));
    r = r < 3.0 ? r + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_closed_form_partials);

void BM_density_rdbm(benchmark::State& state) {
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdbm_density(0.7, 0.5, x, -2.995, 0.1));
    x = x < 2.0 ? x + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_density_rdbm);

void BM_field_query(benchmark::State& state) {
  const DualField& f = bench_field();
  double r = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.query(r, 0.3, 0.8));
    r = r < 3.5 ? r + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_field_query);

void BM_dual_inversion_cold(benchmark::State& state) {
  const DualField& f = bench_field();
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(invert_dual(f, x, 0.3, 0.8));
    x = x < 2.0 ? x + 1e-2 : 0.1;
  }
}
BENCHMARK(BM_dual_inversion_cold);

void BM_dual_inversion_warm(benchmark::State& state) {
  const DualField& f = bench_field();
  PolicySession session(f);
  std::vector<double> theta;
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(session.controls(x, 0.3, 0.8, theta));
    x = x < 2.0 ? x + 1e-3 : 0.1;
  }
}
BENCHMARK(BM_dual_inversion_warm);

}  // namespace

BENCHMARK_MAIN();
