// benchtrack: value function, feedback policy, and path simulation for
// benchmark tracking with capital injection.
//
// Subcommands: validate, solve, policy, simulate, verify, bench.
// Exit codes: 0 success, 1 input error, 2 validation/verification failure,
// 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "benchtrack/dual_field.hpp"
#include "benchtrack/errors.hpp"
#include "benchtrack/mc_engine.hpp"
#include "benchtrack/parallel.hpp"
#include "benchtrack/params.hpp"
#include "benchtrack/policy.hpp"
#include "benchtrack/simulator.hpp"
#include "benchtrack/verification.hpp"

namespace {

using namespace benchtrack;
namespace fs = std::filesystem;

struct CommonOpts {
  std::string params_path;
  std::string out_dir;
  std::uint64_t seed = kDefaultSeed;
  std::size_t paths = 10'000;
  double dt = 1e-3;
  double horizon = 10.0;
  bool antithetic = false;
  bool no_bridge = false;
  std::string grid;  // "rmax,hmax,nr,nh"
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_params = true) {
  cmd->set_help_flag("--help", "print help");
  auto* p = cmd->add_option("--params", o.params_path,
                            "JSON parameter file");
  if (needs_params) p->required();
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "base seed (all randomness derives "
                  "from it)");
  cmd->add_option("--paths", o.paths, "Monte Carlo path count");
  cmd->add_option("--dt", o.dt, "time step");
  cmd->add_option("--horizon", o.horizon, "horizon truncation T");
  cmd->add_flag("--antithetic", o.antithetic, "antithetic path pairs");
  cmd->add_flag("--no-bridge", o.no_bridge,
                "disable the Brownian-bridge running-max correction");
  cmd->add_option("--grid", o.grid, "field grid as rmax,hmax,nr,nh");
}

McConfig mc_config(const CommonOpts& o) {
  McConfig cfg;
  cfg.n_paths = o.paths;
  cfg.dt = o.dt;
  cfg.horizon = o.horizon;
  cfg.seed = o.seed;
  cfg.antithetic = o.antithetic;
  cfg.bridge_max = !o.no_bridge;
  return cfg;
}

GridSpec parse_grid(const std::string& text, const ModelParams& mp,
                    double horizon) {
  if (text.empty()) return GridSpec::suggest(mp, horizon);
  GridSpec g;
  char comma;
  std::istringstream is(text);
  if (!(is >> g.r_max >> comma >> g.h_max >> comma >> g.nr >> comma >> g.nh)) {
    throw ParseError("--grid expects rmax,hmax,nr,nh");
  }
  g.validate();
  return g;
}

void ensure_out(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create output directory " + dir);
}

void write_file(const std::string& dir, const std::string& name,
                const std::string& text) {
  const fs::path p = fs::path(dir.empty() ? "." : dir) / name;
  std::ofstream out(p);
  if (!out) throw ParseError("cannot write " + p.string());
  out << text;
}

nlohmann::json estimate_json(const Estimate& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"n", e.n},
          {"truncation_bound", e.truncation_bound}};
}

int run_validate(const CommonOpts& o, bool as_json) {
  const ModelParams mp = load_params_json(o.params_path);
  const ValidationReport rep = validate_assumptions(mp);
  if (as_json) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["all_pass"] = rep.all_pass();
    for (const auto& c : rep.checks) {
      j["checks"].push_back({{"name", c.name},
                             {"checked", c.checked},
                             {"pass", c.pass},
                             {"detail", c.detail}});
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << rep.to_string();
  }
  return rep.all_pass() ? 0 : 2;
}

int run_solve(const CommonOpts& o) {
  const ModelParams mp = load_params_json(o.params_path);
  const ValidationReport rep = validate_assumptions(mp);
  if (!rep.dual_solver_ok()) {
    std::cerr << rep.to_string();
    std::cerr << "solve: standing assumptions failed\n";
    return 2;
  }
  const McConfig cfg = mc_config(o);
  const GridSpec grid = parse_grid(o.grid, mp, cfg.horizon);
  std::cerr << "building field on " << grid.nr << "x" << grid.nh
            << " grid over [0," << grid.r_max << "]x[0," << grid.h_max
            << "], " << cfg.n_paths << " paths/node\n";
  const auto t0 = std::chrono::steady_clock::now();
  const DualField field = build_dual_field(mp, cfg, grid);
  const auto dtv = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  std::cerr << "field built in " << dtv << " s\n";
  ensure_out(o.out_dir);
  write_file(o.out_dir, "field.json", field.to_json() + "\n");
  std::cout << (fs::path(o.out_dir.empty() ? "." : o.out_dir) / "field.json")
                   .string()
            << "\n";
  return 0;
}

DualField field_for(const CommonOpts& o, const std::string& field_path) {
  if (!field_path.empty()) return DualField::load(field_path);
  const ModelParams mp = load_params_json(o.params_path);
  const McConfig cfg = mc_config(o);
  const GridSpec grid = parse_grid(o.grid, mp, cfg.horizon);
  return build_dual_field(mp, cfg, grid);
}

int run_policy(const CommonOpts& o, const std::string& field_path, double x,
               double h, double z) {
  const DualField field = field_for(o, field_path);
  const PolicyEvaluation ev = feedback_controls(field, x, h, z);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["x"] = x;
  j["h"] = h;
  j["z"] = z;
  j["y_star"] = ev.y_star;
  j["u"] = ev.u_value;
  j["theta_star"] = ev.theta_star;
  j["c_star"] = ev.c_star;
  j["diagnostics"] = {{"iterations", ev.iterations},
                      {"residual", ev.residual},
                      {"extrapolated", ev.extrapolated}};
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!o.out_dir.empty()) {
    ensure_out(o.out_dir);
    write_file(o.out_dir, "policy.json", text);
  }
  return 0;
}

int run_simulate(const CommonOpts& o, const std::string& field_path,
                 const std::string& mode, double x, double h, double z,
                 std::optional<double> v0, std::size_t csv_paths) {
  const ModelParams mp = load_params_json(o.params_path);
  const McConfig cfg = mc_config(o);
  ensure_out(o.out_dir);

  if (mode == "benchmark") {
    const BenchmarkResult res = simulate_benchmark(mp, cfg, csv_paths);
    std::ostringstream csv;
    write_benchmark_csv(csv, res);
    write_file(o.out_dir, "benchmark_paths.csv", csv.str());
    nlohmann::json j;
    j["schema_version"] = 1;
    j["mode"] = "benchmark";
    j["mean_M_T"] = estimate_json(res.mean_M_T);
    j["n_paths"] = res.n_paths;
    j["horizon"] = cfg.horizon;
    const std::string text = j.dump(2) + "\n";
    write_file(o.out_dir, "summary.json", text);
    std::cout << text;
    return 0;
  }
  if (mode != "controlled") {
    throw ParseError("--mode must be benchmark or controlled");
  }

  const DualField field = field_for(o, field_path);
  const auto& b = field.params().benchmark;
  double hh = h, zz = z, xx = x;
  if (hh < 0.0) hh = std::max(b.m0, b.b0) - b.b0;
  if (zz < 0.0) zz = b.z0;
  const double mb = std::max(b.m0, b.b0);
  if (v0) {
    xx = std::max(*v0 - mb - zz, 0.0);
  }
  const ControlledResult res =
      simulate_controlled(field, cfg, xx, hh, zz, PolicyMode::Optimal,
                          csv_paths);
  std::ostringstream csv;
  write_paths_csv(csv, res, field.params().market.d);
  write_file(o.out_dir, "controlled_paths.csv", csv.str());

  const double v_start = v0 ? *v0 : xx + mb + zz;
  const InjectionResult inj =
      estimate_injection(field, cfg, v_start, b.m0, zz, b.b0);

  nlohmann::json j;
  j["schema_version"] = 1;
  j["mode"] = "controlled";
  j["start"] = {{"x", xx}, {"h", hh}, {"z", zz}, {"v0", v_start}};
  j["J"] = estimate_json(res.J);
  j["utility"] = estimate_json(res.utility);
  j["injection"] = estimate_json(res.injection);
  j["u_reference"] = res.u_reference;
  j["u_reference_se"] = res.u_reference_se;
  j["injection_estimate"] = estimate_json(inj.discounted_injection);
  j["immediate_injection"] = inj.immediate_injection;
  j["injection_lower_bound"] = inj.lower_bound;
  j["extrapolated_fraction"] = res.extrapolated_fraction;
  const std::string text = j.dump(2) + "\n";
  write_file(o.out_dir, "summary.json", text);
  std::cout << text;
  return 0;
}

int run_verify(const CommonOpts& o, const std::string& level) {
  const ModelParams mp = load_params_json(o.params_path);
  const bool full = level == "full";
  if (!full && level != "quick") {
    throw ParseError("--level must be quick or full");
  }

  std::vector<CheckResult> results;
  auto run = [&](CheckResult r) {
    results.push_back(std::move(r));
    const CheckResult& c = results.back();
    std::cout << (c.pass ? "[pass] " : "[FAIL] ") << c.name << ": "
              << c.detail << "\n";
  };

  const ValidationReport rep = validate_assumptions(mp);
  std::cout << rep.to_string();

  run(check_closed_form_residual(mp));
  run(check_quadratic_roots(o.seed));

  McConfig lcfg = mc_config(o);
  lcfg.n_paths = full ? 100'000 : 10'000;
  lcfg.dt = full ? 1e-3 : 2e-3;
  lcfg.horizon = std::min(o.horizon, 10.0);
  run(check_l_vs_mc(mp, lcfg, full ? 10 : 3, o.seed + 1, 3.0, 0.02));

  if (rep.dual_solver_ok()) {
    McConfig pcfg = mc_config(o);
    pcfg.n_paths = full ? 40'000 : 10'000;
    pcfg.dt = full ? 1e-3 : 2e-3;
    pcfg.horizon = 8.0;
    const std::vector<RhPoint> fpts = full
        ? std::vector<RhPoint>{{0.25, 0.1}, {0.5, 0.25}, {1.0, 0.5},
                               {2.0, 0.1}, {0.0, 0.05}}
        : std::vector<RhPoint>{{0.5, 0.1}, {1.0, 0.3}};
    run(check_factorization(mp, pcfg, fpts));
    if (full) {
      const std::vector<RhPoint> hpts{{0.5, 0.5}, {1.0, 1.0}};
      run(check_homogenization(mp, pcfg, hpts));
    }

    McConfig bcfg = mc_config(o);
    bcfg.n_paths = full ? 8'000 : 3'000;
    bcfg.dt = 2e-3;
    bcfg.horizon = 8.0;
    GridSpec grid;
    if (!o.grid.empty()) {
      grid = parse_grid(o.grid, mp, bcfg.horizon);
    } else if (full) {
      grid = GridSpec{4.0, 2.0, 17, 13};
    } else {
      grid = GridSpec{4.0, 1.5, 13, 9};
    }
    const DualField field = build_dual_field(mp, bcfg, grid);
    run(check_field_boundaries(field));
    run(check_dual_convexity(field, 100, o.seed + 2));
    run(check_field_residuals(field));
    run(check_policy_consistency(field, o.seed + 3, full ? 100 : 25));

    if (full) {
      McConfig scfg = mc_config(o);
      scfg.n_paths = 10'000;
      scfg.dt = 1e-3;
      scfg.horizon = 10.0;
      run(check_verification_equality(field, scfg, 1.0, 0.5, 0.8,
                                      std::sqrt(scfg.dt)));
      run(check_injection_bounds(field, scfg, mp.benchmark.z0, 0.0,
                                 std::max(mp.benchmark.z0, 0.1), 0.0));
    }
  } else {
    std::cout << "[ -- ] dual-field checks skipped: assumptions failed "
                 "(degenerate benchmark?)\n";
  }

  bool all = true;
  for (const auto& c : results) all = all && c.pass;
  std::cout << (all ? "verification passed" : "verification FAILED") << "\n";
  return all ? 0 : 2;
}

int run_bench(const CommonOpts& o) {
  const ModelParams mp = load_params_json(o.params_path);
  McConfig cfg = mc_config(o);
  cfg.n_paths = std::max<std::size_t>(cfg.n_paths, 2000);
  const auto t0 = std::chrono::steady_clock::now();
  const Estimate e = estimate_l(mp, cfg, 0.5, mp.benchmark.z0);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  const double steps = static_cast<double>(cfg.n_paths) *
                       static_cast<double>(cfg.n_steps());
  nlohmann::json j;
  j["schema_version"] = 1;
  j["threads"] = thread_count();
  j["paths"] = cfg.n_paths;
  j["steps_per_path"] = cfg.n_steps();
  j["seconds"] = secs;
  j["path_steps_per_second"] = steps / secs;
  j["estimate"] = estimate_json(e);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark tracking with capital injection: dual solver, "
               "feedback policy, and simulators"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  CommonOpts o;
  bool as_json = false;
  std::string field_path, mode = "controlled", level = "quick";
  double x = 1.0, h = -1.0, z = -1.0;
  std::optional<double> v0;
  std::size_t csv_paths = 10;

  auto* c_validate = app.add_subcommand(
      "validate", "check the standing assumptions of a parameter file");
  add_common(c_validate, o);
  c_validate->add_flag("--json", as_json, "machine-readable report");

  auto* c_solve = app.add_subcommand(
      "solve", "build the dual field and export it as JSON");
  add_common(c_solve, o);

  auto* c_policy = app.add_subcommand(
      "policy", "evaluate the feedback policy at one auxiliary state");
  add_common(c_policy, o);
  c_policy->add_option("--field", field_path, "load a solved field");
  c_policy->add_option("--x", x, "auxiliary wealth state")->required();
  c_policy->add_option("--h", h, "benchmark gap state")->required();
  c_policy->add_option("--z", z, "GBM state")->required();

  auto* c_sim = app.add_subcommand("simulate",
                                   "simulate benchmark or controlled paths");
  add_common(c_sim, o);
  c_sim->add_option("--field", field_path, "load a solved field");
  c_sim->add_option("--mode", mode, "benchmark|controlled");
  c_sim->add_option("--x", x, "auxiliary wealth start (controlled mode)");
  c_sim->add_option("--h", h, "gap start; default from the parameter file");
  c_sim->add_option("--z", z, "GBM start; default from the parameter file");
  c_sim->add_option("--v0", v0, "initial wealth in original coordinates");
  c_sim->add_option("--csv-paths", csv_paths,
                    "number of paths written to CSV");

  auto* c_verify = app.add_subcommand("verify", "run the verification suite");
  add_common(c_verify, o);
  c_verify->add_option("--level", level, "quick|full");

  auto* c_bench = app.add_subcommand("bench", "measure simulation throughput");
  add_common(c_bench, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (c_validate->parsed()) return run_validate(o, as_json);
    if (c_solve->parsed()) return run_solve(o);
    if (c_policy->parsed()) return run_policy(o, field_path, x, h, z);
    if (c_sim->parsed()) {
      return run_simulate(o, field_path, mode, x, h, z, v0, csv_paths);
    }
    if (c_verify->parsed()) return run_verify(o, level);
    if (c_bench->parsed()) return run_bench(o);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const SingularSigma& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const ZeroMu& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const AssumptionViolated& e) {
    std::cerr << "assumption violated: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
