#include "nucspde/scenario.hpp"
#include "nucspde/suites.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace nucspde;

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }
bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct Criterion {
  int id;
  std::string title;
  std::function<bool(const std::string&)> selects;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "weak isometry", [](const std::string& n) { return starts_with(n, "isometry/"); }},
      {2, "mvm axioms",
       [](const std::string& n) { return starts_with(n, "mvm-axioms/") && !starts_with(n, "mvm-axioms/poisson/"); }},
      {3, "compensated Poisson second moments",
       [](const std::string& n) { return starts_with(n, "mvm-axioms/poisson/"); }},
      {4, "stochastic Fubini",
       [](const std::string& n) {
         return n == "fubini/general-family" || n == "fubini/simple-family" || n == "fubini/simple-routes";
       }},
      {5, "strong isometry and weak-strong compatibility",
       [](const std::string& n) {
         return starts_with(n, "strong/") && (ends_with(n, "/weak-strong") || contains(n, "/isometry") ||
                                              contains(n, "/factorization-"));
       }},
      {6, "stopped, restricted, pushforward and sum identities",
       [](const std::string& n) {
         return n == "fubini/stopped" || n == "fubini/restricted" || n == "fubini/sum-decomposition" ||
                starts_with(n, "fubini/localization-") ||
                (starts_with(n, "strong/") &&
                 (ends_with(n, "/pushforward") || ends_with(n, "/stopped") || ends_with(n, "/restricted")));
       }},
      {7, "OU benchmarks and stochastic convolution",
       [](const std::string& n) {
         return ((starts_with(n, "solver/ou/") || starts_with(n, "solver/gou/")) && !ends_with(n, "/iterations")) ||
                starts_with(n, "convolution/");
       }},
      {8, "Picard contraction",
       [](const std::string& n) {
         return starts_with(n, "solver/constants/") || n == "solver/contraction-constant" ||
                starts_with(n, "solver/picard-ratio/") || n == "solver/fixed-point-residual" ||
                (starts_with(n, "solver/") && ends_with(n, "/iterations"));
       }},
      {9, "weak-mild equivalence",
       [](const std::string& n) { return starts_with(n, "solver/weak-residual/"); }},
      {10, "Levy localization and patching", [](const std::string& n) { return starts_with(n, "levy-patch/"); }},
  };
  return list;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::size_t repro_paths = 2000;
  std::optional<std::size_t> paths;
  app.add_option("--paths", paths, "override ensemble.paths for criteria 1-10");
  app.add_option("--repro-paths", repro_paths, "ensemble.paths for the reproducibility runs");
  CLI11_PARSE(app, argc, argv);

  Scenario base = default_scenario();
  if (paths) base.paths = *paths;

  std::vector<CheckResult> checks;
  for (const auto& suite : suite_names()) {
    const auto t0 = std::chrono::steady_clock::now();
    const VerificationReport r = run_suite(base, suite);
    std::fprintf(stderr, "suite %-12s %3zu checks %7.1fs\n", suite.c_str(), r.checks.size(), seconds_since(t0));
    checks.insert(checks.end(), r.checks.begin(), r.checks.end());
  }

  bool all_pass = true;
  std::vector<bool> claimed(checks.size(), false);
  for (const auto& c : criteria()) {
    std::size_t n = 0;
    std::vector<std::string> failed;
    for (std::size_t i = 0; i < checks.size(); ++i) {
      if (!c.selects(checks[i].name)) continue;
      claimed[i] = true;
      ++n;
      if (!checks[i].pass) failed.push_back(checks[i].name);
    }
    const bool pass = n > 0 && failed.empty();
    all_pass = all_pass && pass;
    std::printf("%s criterion %2d: %s (%zu checks", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), n);
    if (!failed.empty()) std::printf(", failed: %s%s", failed.front().c_str(), failed.size() > 1 ? ", ..." : "");
    std::printf(")\n");
  }
  for (std::size_t i = 0; i < checks.size(); ++i)
    if (!claimed[i]) {
      std::printf("FAIL unassigned check %s\n", checks[i].name.c_str());
      all_pass = false;
    }

  {
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json j = default_scenario_json();
    j["ensemble"]["paths"] = repro_paths;
    j["ensemble"]["pathwise_paths"] = 200;
    j["ensemble"]["residual_paths"] = 200;
    const Scenario s = parse_scenario(j);
    const std::string first = run_suite(s, "all", ExecutionConfig{1}).to_json();
    bool same = run_suite(s, "all", ExecutionConfig{1}).to_json() == first;
    for (int threads : {4, 8}) same = same && run_suite(s, "all", ExecutionConfig{threads}).to_json() == first;
    all_pass = all_pass && same;
    std::fprintf(stderr, "reproducibility %7.1fs\n", seconds_since(t0));
    std::printf("%s criterion 11: reproducibility across runs and 1/4/8 threads (%zu paths, %zu bytes)\n",
                same ? "PASS" : "FAIL", repro_paths, first.size());
  }
  return all_pass ? 0 : 1;
}
