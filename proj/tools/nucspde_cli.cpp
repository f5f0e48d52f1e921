#include "nucspde/suites.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace nucspde;
namespace fs = std::filesystem;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> steps;
  std::string out;
  std::string format = "csv";
  int threads = 0;
  std::string suite;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario load(const Options& o) {
  Scenario sc;
  if (o.config.empty()) {
    sc = default_scenario();
  } else {
    if (!fs::exists(o.config)) throw UsageError("config file not found: " + o.config);
    sc = load_scenario(o.config);
  }
  if (o.seed) sc.seed = *o.seed;
  if (o.paths) {
    if (*o.paths == 0) throw UsageError("--paths must be positive");
    sc.paths = *o.paths;
  }
  if (o.steps) {
    if (*o.steps == 0) throw UsageError("--grid-steps must be positive");
    sc.steps = *o.steps;
  }
  return sc;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

void emit(const Options& o, const std::string& file, const std::string& body) {
  if (o.out.empty()) {
    std::cout << body;
    return;
  }
  fs::create_directories(o.out);
  const fs::path p = fs::path(o.out) / file;
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << body;
  std::cerr << "wrote " << p.string() << "\n";
}

void emit_report(const Options& o, const VerificationReport& r, const std::string& stem) {
  if (o.out.empty()) {
    std::cout << (o.format == "json" ? r.to_json() : r.to_csv());
  } else {
    emit(o, stem + ".json", r.to_json());
    emit(o, stem + ".csv", r.to_csv());
  }
  std::cerr << r.suite << ": " << r.checks.size() << " checks, " << r.failures().size() << " failed\n";
  for (const auto& f : r.failures()) std::cerr << "  FAIL " << f << "\n";
}

void require_ensemble(std::size_t n) {
  if (n < 2) throw UsageError("ensembles need at least 2 paths");
}

int cmd_verify(const Options& o) {
  if (!is_suite(o.suite) && o.suite != "all" && o.suite != "empty") throw UsageError("unknown suite '" + o.suite + "'");
  const Scenario sc = load(o);
  require_ensemble(sc.paths);
  const VerificationReport r = run_suite(sc, o.suite, ExecutionConfig{o.threads});
  emit_report(o, r, "report-" + o.suite);
  return r.passed() ? kPass : kFail;
}

MildSolver scenario_solver(const Scenario& sc) {
  const MvmSpec spec = sc.spec();
  return MildSolver(sc.coefficients(sc.equation, spec), sc.semigroup(), spec, sc.family(), sc.picard, sc.horizon,
                    sc.seed);
}

int cmd_constants(const Options& o) {
  const Scenario sc = load(o);
  const MildSolver solver = scenario_solver(sc);
  const ContractionReport& c = solver.contraction();
  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["damping"] = c.damping;
    j["horizon"] = c.horizon;
    j["a_integral"] = c.a_integral;
    j["b_integral"] = c.b_integral;
    j["M"] = c.bound.M;
    j["theta"] = c.bound.theta;
    j["C1"] = c.c1;
    j["C2"] = c.c2;
    j["C"] = c.combined;
    j["contracts"] = c.contracts();
    emit(o, "constants.json", j.dump(2) + "\n");
  } else {
    std::string s = "quantity,value\n";
    s += "damping," + fmt(c.damping) + "\n";
    s += "horizon," + fmt(c.horizon) + "\n";
    s += "a_integral," + fmt(c.a_integral) + "\n";
    s += "b_integral," + fmt(c.b_integral) + "\n";
    s += "M," + fmt(c.bound.M) + "\n";
    s += "theta," + fmt(c.bound.theta) + "\n";
    s += "C1," + fmt(c.c1) + "\n";
    s += "C2," + fmt(c.c2) + "\n";
    s += "C," + fmt(c.combined) + "\n";
    emit(o, "constants.csv", s);
  }
  return kPass;
}

int cmd_simulate(const Options& o) {
  Scenario sc = load(o);
  const std::size_t n = o.paths ? *o.paths : 4;
  const MvmSpec spec = sc.spec();
  const auto grid = sc.grid();
  const MildSolver solver = scenario_solver(sc);
  const DualVector z0(sc.equation.z0);
  const std::size_t d = sc.dim;
  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["seed"] = sc.seed;
    j["times"] = grid->times();
    auto& arr = j["paths"] = nlohmann::ordered_json::array();
    for (std::size_t id = 0; id < n; ++id) {
      const NoisePath path = simulate_path(spec, grid, sc.seed, id);
      const SolutionPath sol = solver.solve(z0, path);
      nlohmann::ordered_json p;
      p["id"] = id;
      auto& w = p["wiener"] = nlohmann::ordered_json::array();
      auto& x = p["solution"] = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k <= grid->steps(); ++k) {
        const Vector wk = path.wiener(k);
        w.push_back(std::vector<double>(wk.data(), wk.data() + wk.size()));
        const Vector xk = sol.states.col(static_cast<Eigen::Index>(k));
        x.push_back(std::vector<double>(xk.data(), xk.data() + xk.size()));
      }
      auto& js = p["jumps"] = nlohmann::ordered_json::array();
      for (const Jump& jp : path.jumps()) js.push_back({{"time", jp.time}, {"atom", jp.atom}});
      p["iterations"] = sol.iterations;
      arr.push_back(std::move(p));
    }
    emit(o, "paths.json", j.dump(1) + "\n");
    return kPass;
  }
  std::string s = "path,time";
  for (std::size_t i = 0; i < d; ++i) s += ",W[e" + std::to_string(i) + "]";
  for (std::size_t i = 0; i < d; ++i) s += ",X[e" + std::to_string(i) + "]";
  s += "\n";
  std::string jumps = "path,time,atom\n";
  for (std::size_t id = 0; id < n; ++id) {
    const NoisePath path = simulate_path(spec, grid, sc.seed, id);
    const SolutionPath sol = solver.solve(z0, path);
    for (std::size_t k = 0; k <= grid->steps(); ++k) {
      s += std::to_string(id) + "," + fmt(grid->time(k));
      for (std::size_t i = 0; i < d; ++i) s += "," + fmt(path.wiener(k)(static_cast<Eigen::Index>(i)));
      for (std::size_t i = 0; i < d; ++i)
        s += "," + fmt(sol.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
      s += "\n";
    }
    for (const Jump& jp : path.jumps())
      jumps += std::to_string(id) + "," + fmt(jp.time) + "," + std::to_string(jp.atom) + "\n";
  }
  emit(o, "paths.csv", s);
  if (!o.out.empty()) emit(o, "jumps.csv", jumps);
  return kPass;
}

int cmd_solve(const Options& o) {
  Scenario sc = load(o);
  const std::size_t n = o.paths ? *o.paths : sc.pathwise_paths;
  require_ensemble(n);
  const MvmSpec spec = sc.spec();
  const auto grid = sc.grid();
  const MildSolver solver = scenario_solver(sc);
  const Coefficients coeffs = sc.coefficients(sc.equation, spec);
  const DualVector z0(sc.equation.z0);
  const std::size_t d = sc.dim, K = grid->steps();
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < d; ++j) labels.push_back("X_T[e" + std::to_string(j) + "]");
  labels.push_back("iterations");
  const EnsembleTable t = run_ensemble(labels, n, [&](std::uint64_t id, std::span<double> row) {
    const SolutionPath sol = solver.solve(z0, simulate_path(spec, grid, sc.seed, id));
    for (std::size_t j = 0; j < d; ++j) row[j] = sol.states(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(K));
    row[d] = sol.iterations;
  }, ExecutionConfig{o.threads});
  const Matrix mean = mean_flow(coeffs, sc.semigroup(), spec, z0, *grid);
  VerificationReport r;
  r.suite = "solve";
  r.seed = sc.seed;
  r.paths = n;
  r.steps = K;
  r.checks.push_back(range_check("solve/contraction", "combined contraction constant below 1", "closed-form",
                                 solver.contraction().combined, 0.0, 1.0));
  for (std::size_t j = 0; j < d; ++j)
    r.checks.push_back(statistical_check("solve/mean/e" + std::to_string(j), "E X_T[e_j] against the mean recursion",
                                         "scheme", sc.horizon, t.estimate(j),
                                         mean(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(K))));
  double worst = 0.0;
  for (double v : t.column(d)) worst = std::max(worst, v);
  r.checks.push_back(range_check("solve/iterations", "Picard iterations within max_iter", "exact", worst, 1.0,
                                 static_cast<double>(sc.picard.max_iter)));
  emit_report(o, r, "solve");
  return r.passed() ? kPass : kFail;
}

int cmd_plot_data(const Options& o) {
  Scenario sc = load(o);
  const std::size_t n = o.paths ? *o.paths : sc.pathwise_paths;
  require_ensemble(n);
  const MvmSpec spec = sc.spec();
  const auto grid = sc.grid();
  const MildSolver solver = scenario_solver(sc);
  const Coefficients coeffs = sc.coefficients(sc.equation, spec);
  const DualVector z0(sc.equation.z0);
  const std::size_t d = sc.dim, K = grid->steps();
  const std::size_t per = 2 * d + 1;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t j = 0; j < d; ++j) labels.push_back("X[e" + std::to_string(j) + "]@" + std::to_string(k));
    for (std::size_t j = 0; j < d; ++j) labels.push_back("X[e" + std::to_string(j) + "]^2@" + std::to_string(k));
    labels.push_back("W[e0]^2@" + std::to_string(k));
  }
  const EnsembleTable t = run_ensemble(labels, n, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath path = simulate_path(spec, grid, sc.seed, id);
    const SolutionPath sol = solver.solve(z0, path);
    for (std::size_t k = 0; k <= K; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        const double x = sol.states(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        row[k * per + j] = x;
        row[k * per + d + j] = x * x;
      }
      const double w = spec.has_wiener() ? path.wiener(k)(0) : 0.0;
      row[k * per + 2 * d] = w * w;
    }
  }, ExecutionConfig{o.threads});
  const Matrix mean = mean_flow(coeffs, sc.semigroup(), spec, z0, *grid);
  const double q00 = spec.has_wiener() ? spec.covariance()(0, 0) : 0.0;
  std::string s = "time,statistic,mean,stderr,n,target,pass\n";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  auto add = [&](double time, const std::string& stat, const McEstimate& e, double target) {
    std::string pass;
    if (!std::isnan(target)) pass = std::abs(e.mean - target) <= 4.0 * e.std_error + 1e-12 * std::abs(target) ? "true" : "false";
    s += fmt(time) + "," + stat + "," + fmt(e.mean) + "," + fmt(e.std_error) + "," + std::to_string(e.n) + "," +
         fmt(target) + "," + pass + "\n";
    nlohmann::ordered_json r;
    r["time"] = time;
    r["statistic"] = stat;
    r["mean"] = e.mean;
    r["stderr"] = e.std_error;
    r["n"] = e.n;
    r["target"] = std::isnan(target) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(target);
    rows.push_back(std::move(r));
  };
  for (std::size_t k = 0; k <= K; ++k) {
    const double tk = grid->time(k);
    for (std::size_t j = 0; j < d; ++j)
      add(tk, "E X[e" + std::to_string(j) + "]", t.estimate(k * per + j),
          mean(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
    for (std::size_t j = 0; j < d; ++j) add(tk, "E X[e" + std::to_string(j) + "]^2", t.estimate(k * per + d + j), NAN);
    add(tk, "E W[e0]^2", t.estimate(k * per + 2 * d), q00 * tk);
  }
  if (o.format == "json")
    emit(o, "plot-data.json", rows.dump(1) + "\n");
  else
    emit(o, "plot-data.csv", s);
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo verification of stochastic integrals and SPDE solvers on nuclear spaces"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "scenario JSON (default: built-in scenario)");
    c->add_option("--seed", o.seed, "master seed");
    c->add_option("--paths", o.paths, "number of Monte Carlo paths");
    c->add_option("--grid-steps", o.steps, "time steps on [0, T]");
    c->add_option("--out", o.out, "output directory (default: stdout)");
    c->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    c->add_option("--threads", o.threads, "worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  };
  auto* verify = app.add_subcommand("verify", "run a check suite");
  verify->add_option("suite", o.suite, "isometry | mvm-axioms | fubini | strong | convolution | solver | levy-patch | all")
      ->required();
  common(verify);
  auto* simulate = app.add_subcommand("simulate", "emit noise and solution paths");
  common(simulate);
  auto* solve = app.add_subcommand("solve", "ensemble solve of the scenario equation");
  common(solve);
  auto* constants = app.add_subcommand("constants", "print the contraction constants");
  common(constants);
  auto* plot = app.add_subcommand("plot-data", "emit time-vs-moment tables");
  common(plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    if (*verify) return cmd_verify(o);
    if (*simulate) return cmd_simulate(o);
    if (*solve) return cmd_solve(o);
    if (*constants) return cmd_constants(o);
    if (*plot) return cmd_plot_data(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
