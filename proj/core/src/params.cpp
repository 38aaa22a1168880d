#include "benchtrack/params.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "benchtrack/errors.hpp"

namespace benchtrack {

namespace {

Eigen::MatrixXd sigma_matrix(const MarketParams& m) {
  Eigen::MatrixXd S(m.d, m.d);
  for (int i = 0; i < m.d; ++i)
    for (int j = 0; j < m.d; ++j) S(i, j) = m.sigma[i * m.d + j];
  return S;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<long>(v.size()));
}

std::vector<double> from_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void normalize_weights(std::vector<double>& w, const char* name, int d) {
  if (static_cast<int>(w.size()) != d) {
    throw DomainError(std::string(name) + " must have length d");
  }
  double nrm2 = 0.0;
  for (double x : w) nrm2 += x * x;
  if (nrm2 <= 0.0) {
    throw DomainError(std::string(name) + " must be a nonzero weight vector");
  }
  const double inv = 1.0 / std::sqrt(nrm2);
  for (double& x : w) x *= inv;
}

}  // namespace

double ell_quadratic_residual(double ell, double alpha, double rho,
                              double kappa2, double mu_Z) {
  return 0.5 * alpha * alpha * ell * ell +
         (rho - kappa2 - 0.5 * alpha * alpha) * ell + mu_Z - rho;
}

DerivedConstants derive_constants(const MarketParams& market,
                                  const BenchmarkParams& bench,
                                  const PreferenceParams& pref) {
  const int d = market.d;
  if (d < 1) throw DomainError("market.d must be >= 1");
  if (static_cast<int>(market.mu.size()) != d ||
      static_cast<int>(market.sigma.size()) != d * d) {
    throw DomainError("mu must be length d and sigma d x d");
  }

  const Eigen::VectorXd mu = to_vec(market.mu);
  if (mu.lpNorm<Eigen::Infinity>() == 0.0) {
    throw ZeroMu("mu is the zero vector");
  }

  const Eigen::MatrixXd S = sigma_matrix(market);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(d - 1);
  if (!(smin > 0.0) || smin / smax < 1e-10) {
    throw SingularSigma("sigma numerically singular (tolerance 1e-10)");
  }

  const Eigen::MatrixXd A = S * S.transpose();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    throw SingularSigma("sigma sigma' factorization failed");
  }

  DerivedConstants out;
  out.sigma_cond = smax / smin;

  const Eigen::VectorXd x = ldlt.solve(mu);
  const Eigen::VectorXd sg = S * to_vec(bench.gamma);
  const Eigen::VectorXd se = S * to_vec(bench.eta);
  const Eigen::VectorXd ysg = ldlt.solve(sg);
  const Eigen::VectorXd yse = ldlt.solve(se);

  const double alpha2 = mu.dot(x);
  out.alpha = std::sqrt(alpha2);
  out.kappa1 = bench.sigma_B * x.dot(sg);
  out.kappa2 = bench.sigma_Z * x.dot(se);
  out.rho1 = x.dot(sg) / out.alpha;
  out.rho2 = x.dot(se) / out.alpha;
  out.iss_mu = from_vec(x);
  out.iss_sgamma = from_vec(ysg);
  out.iss_seta = from_vec(yse);

  // Positive root of (alpha^2/2) L^2 + (rho - kappa2 - alpha^2/2) L
  //                 + (mu_Z - rho) = 0, evaluated in the cancellation-free
  // branch.
  const double b = pref.rho - out.kappa2 - 0.5 * alpha2;
  const double disc = b * b + 2.0 * alpha2 * (pref.rho - bench.mu_Z);
  if (disc < 0.0) {
    throw AssumptionViolated("ell quadratic has no real root");
  }
  const double sq = std::sqrt(disc);
  out.ell = (b > 0.0) ? 2.0 * (pref.rho - bench.mu_Z) / (sq + b)
                      : (sq - b) / alpha2;

  const double p = pref.p;
  const double omp = 1.0 - p;
  const double denom = 2.0 * pref.rho * omp - alpha2 * p;
  out.C1 = 2.0 * omp * omp * omp / (p * denom);
  out.C2 = 2.0 * omp * omp / denom * std::pow(pref.beta, -1.0 / omp);
  out.Cq = std::pow(pref.beta, -1.0 / omp) * std::exp(1.0 / omp) +
           denom / (2.0 * omp) / (1.0 - std::exp(-1.0 / omp));
  return out;
}

ModelParams make_model(MarketParams market, BenchmarkParams bench,
                       PreferenceParams pref) {
  if (bench.sigma_Z < 0.0 || bench.sigma_B < 0.0) {
    throw DomainError("sigma_Z and sigma_B must be >= 0");
  }
  if (bench.z0 < 0.0 || bench.m0 < 0.0) {
    throw DomainError("z0 and m0 must be >= 0");
  }
  if (pref.p == 0.0 || pref.p >= 1.0) {
    throw DomainError("p must lie in (-inf,0) or (0,1)");
  }
  if (pref.rho <= 0.0) throw DomainError("rho must be > 0");
  if (pref.beta <= 0.0) throw DomainError("beta must be > 0");

  normalize_weights(bench.gamma, "gamma", market.d);
  normalize_weights(bench.eta, "eta", market.d);

  ModelParams mp;
  mp.market = std::move(market);
  mp.benchmark = std::move(bench);
  mp.preferences = pref;
  mp.derived = derive_constants(mp.market, mp.benchmark, mp.preferences);
  return mp;
}

bool ValidationReport::all_pass() const {
  for (const auto& c : checks)
    if (c.checked && !c.pass) return false;
  return true;
}

bool ValidationReport::dual_solver_ok() const { return all_pass(); }

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.checked ? (c.pass ? "[pass] " : "[FAIL] ") : "[ -- ] ") << c.name;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

ValidationReport validate_assumptions(const ModelParams& mp) {
  const auto& d = mp.derived;
  const auto& b = mp.benchmark;
  const auto& p = mp.preferences;
  ValidationReport rep;
  auto add = [&rep](std::string name, bool pass, std::string detail) {
    rep.checks.push_back({std::move(name), true, pass, std::move(detail)});
  };
  std::ostringstream os;

  const double lhs_a = 2.0 * b.mu_Z + b.sigma_Z * b.sigma_Z;
  os << "rho=" << p.rho << " vs 2*mu_Z+sigma_Z^2=" << lhs_a;
  add("discounting dominates benchmark growth: rho > 2*mu_Z + sigma_Z^2",
      lhs_a <= 0.0 || p.rho > lhs_a, os.str());

  os.str("");
  const double lhs_b =
      d.alpha * d.alpha * std::abs(p.p) / (2.0 * (1.0 - p.p)) + b.mu_Z;
  os << "rho=" << p.rho << " vs alpha^2|p|/(2(1-p))+mu_Z=" << lhs_b;
  add("dual integrability: rho > alpha^2*|p|/(2*(1-p)) + mu_Z", p.rho > lhs_b,
      os.str());

  os.str("");
  os << "mu_Z=" << b.mu_Z << " vs kappa2=" << d.kappa2;
  add("benchmark drift dominates cross term: mu_Z > kappa2", b.mu_Z > d.kappa2,
      os.str());

  os.str("");
  os << "sigma_B=" << b.sigma_B;
  add("dual-solver mode requires sigma_B > 0 "
      "(sigma_B = 0 allowed in benchmark path simulation only)",
      b.sigma_B > 0.0, os.str());

  rep.checks.push_back(
      {"transversality gate rho > rho_0: not checked -- see documentation",
       false, false,
       "rho_0 depends on suprema of improper integrals; left to the user"});
  return rep;
}

namespace {

ModelParams params_from_json(const nlohmann::json& j) {
  try {
    MarketParams market;
    const auto& jm = j.at("market");
    market.d = jm.at("d").get<int>();
    market.mu = jm.at("mu").get<std::vector<double>>();
    const auto& js = jm.at("sigma");
    if (!js.is_array() || static_cast<int>(js.size()) != market.d) {
      throw ParseError("sigma must be a d x d array of rows");
    }
    market.sigma.reserve(static_cast<std::size_t>(market.d * market.d));
    for (const auto& row : js) {
      const auto r = row.get<std::vector<double>>();
      if (static_cast<int>(r.size()) != market.d) {
        throw ParseError("sigma row has wrong length");
      }
      market.sigma.insert(market.sigma.end(), r.begin(), r.end());
    }

    BenchmarkParams bench;
    const auto& jb = j.at("benchmark");
    bench.mu_Z = jb.at("mu_Z").get<double>();
    bench.sigma_Z = jb.at("sigma_Z").get<double>();
    bench.mu_B = jb.at("mu_B").get<double>();
    bench.sigma_B = jb.at("sigma_B").get<double>();
    bench.gamma = jb.at("gamma").get<std::vector<double>>();
    bench.eta = jb.at("eta").get<std::vector<double>>();
    bench.z0 = jb.at("z0").get<double>();
    bench.m0 = jb.at("m0").get<double>();
    bench.b0 = jb.at("b0").get<double>();

    PreferenceParams pref;
    const auto& jp = j.at("preferences");
    pref.p = jp.at("p").get<double>();
    pref.rho = jp.at("rho").get<double>();
    pref.beta = jp.at("beta").get<double>();

    return make_model(std::move(market), std::move(bench), pref);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("parameter file: ") + e.what());
  }
}

}  // namespace

ModelParams parse_params_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("parameter file: ") + e.what());
  }
  return params_from_json(j);
}

ModelParams load_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open parameter file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_params_json(ss.str());
}

}  // namespace benchtrack
