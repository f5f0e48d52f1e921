#include "nucspde/ensemble.hpp"
#include "nucspde/report.hpp"
#include "nucspde/rng.hpp"
#include "nucspde/scenario.hpp"
#include "nucspde/suites.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nucspde;
using namespace nucspde::testing;

namespace {

void gaussian_stat(std::uint64_t id, std::span<double> out) {
  Philox4x32 gen(99, id, StreamTag::samples);
  std::normal_distribution<double> n;
  out[0] = n(gen);
  out[1] = out[0] * out[0];
}

std::string error_of(const nlohmann::json& j) {
  try {
    parse_scenario(j);
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "";
}

}  // namespace

TEST_CASE("estimates") {
  const std::vector<double> c(10, 2.5);
  const McEstimate e = estimate("c", c);
  CHECK(e.mean == 2.5);
  CHECK(e.std_error == 0.0);
  CHECK(e.n == 10);
  const std::vector<double> v{1, 2, 3, 4};
  const McEstimate f = estimate("v", v);
  CHECK(f.mean == 2.5);
  CHECK(f.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK_THROWS_AS(estimate("one", std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("ensembles") {
  const EnsembleTable a = run_ensemble({"x", "x2"}, 4000, gaussian_stat);
  const EnsembleTable b = run_ensemble_serial({"x", "x2"}, 4000, gaussian_stat);
  CHECK(a.data() == b.data());
  CHECK(run_ensemble({"x", "x2"}, 4000, gaussian_stat, ExecutionConfig{3}).data() == a.data());
  CHECK(a.estimate("x").mean == b.estimate("x").mean);
  CHECK(a.estimate("x").std_error == b.estimate("x").std_error);
  CHECK(within_mc(a.estimate("x2"), 1.0));
  CHECK_THROWS_AS(a.index("y"), std::out_of_range);

  const EnsembleTable big = run_ensemble({"x", "x2"}, 8000, gaussian_stat);
  CHECK(big.estimate(0).std_error / a.estimate(0).std_error == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));

  CHECK_THROWS_AS(run_ensemble({"x"}, 1, [](std::uint64_t, std::span<double> o) { o[0] = 0; }), std::invalid_argument);
  try {
    run_ensemble({"bad"}, 16, [](std::uint64_t id, std::span<double> o) { o[0] = id == 7 ? std::nan("") : 1.0; });
    FAIL("expected a non-finite error");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("path 7") != std::string::npos);
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
}

TEST_CASE("checks and reports") {
  const McEstimate e{"m", 1.0, 0.1, 100};
  CHECK(statistical_check("a", "p", "closed-form", 1.0, e, 1.35).pass);
  CHECK_FALSE(statistical_check("a", "p", "closed-form", 1.0, e, 1.45).pass);
  CHECK(statistical_check("a", "p", "closed-form", 1.0, e, 1.45, 0.1).pass);
  CHECK(bound_check("b", "p", "closed-form", 1.0, e, 0.7).pass);
  CHECK_FALSE(bound_check("b", "p", "closed-form", 1.0, e, 0.5).pass);
  CHECK(pathwise_check("c", "p", 1e-12, 1e-10, 5).pass);
  CHECK_FALSE(exact_check("d", "p", "exact", 1.0, 1.1, 0.05).pass);
  CHECK(range_check("r", "p", "exact", 3.0, 1.0, 12.0).pass);

  VerificationReport r{"unit", 7, 100, 16, {}};
  r.checks.push_back(statistical_check("a", "p", "closed-form", 0.5, e, 1.0));
  r.checks.push_back(exact_check("d", "p", "exact", 1.0, 1.1, 0.05));
  CHECK_FALSE(r.passed());
  CHECK(r.failures() == std::vector<std::string>{"d"});
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("time,statistic,mean,stderr,n,target,pass\n", 0) == 0);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["suite"] == "unit");
  CHECK(j["checks"].size() == 2);
  CHECK(j["checks"][1]["pass"] == false);
  CHECK(r.to_json() == r.to_json());
}

TEST_CASE("scenario parsing") {
  const Scenario s = default_scenario();
  CHECK(s.dim == 8);
  CHECK(s.paths == 100000);
  CHECK(s.seed == 7);

  CHECK(error_of({{"grid", {{"steps", -3}}}}) == "/grid/steps");
  CHECK(error_of({{"space", {{"dimension", 0}}}}) == "/space/dimension");
  CHECK(error_of({{"bogus", 1}}) == "/bogus");
  CHECK(error_of({{"noise", {{"atoms", {{{"point", 1.0}, {"rate", -1.0}}}}}}}) == "/noise/atoms/0/rate");
  CHECK(error_of({{"version", "2"}}) == "/version");
  CHECK(error_of({{"noise", {{"covariance", {{1, 2}, {3, 4}}}}}}).rfind("/noise/covariance", 0) == 0);

  CHECK(parse_vector(0.5, 3, "/v") == dual({0.5, 0.5, 0.5}).coeffs());
  CHECK(parse_vector({{"basis", 1}, {"scale", 2.0}}, 3, "/v") == dual({0, 2, 0}).coeffs());
  CHECK_THROWS_AS(parse_vector({1, 2}, 3, "/v"), ConfigError);
  CHECK(parse_matrix("identity", 2, 2, "/m") == Matrix::Identity(2, 2));
  CHECK(parse_matrix(2.0, 2, 2, "/m") == Matrix(2.0 * Matrix::Identity(2, 2)));
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), std::exception);
}

TEST_CASE("suites") {
  const Scenario s = default_scenario();
  const VerificationReport empty = run_suite(s, "empty");
  CHECK(empty.passed());
  CHECK(empty.checks.empty());
  CHECK_THROWS_AS(run_suite(s, "nonsense"), std::invalid_argument);
  CHECK(suite_names().size() == 7);
  CHECK(is_suite("isometry"));
  CHECK(is_suite("empty"));
  CHECK(is_suite("all"));
  CHECK_FALSE(is_suite("nonsense"));

  nlohmann::json j = default_scenario_json();
  j["grid"]["steps"] = 30;
  CHECK_THROWS_AS(run_suite(parse_scenario(j), "fubini"), ConfigError);
}

TEST_CASE("small isometry suite is reproducible") {
  nlohmann::json j = default_scenario_json();
  j["ensemble"]["paths"] = 1000;
  j["grid"]["steps"] = 32;
  const Scenario s = parse_scenario(j);
  const VerificationReport a = run_suite(s, "mvm-axioms");
  const VerificationReport b = run_suite(s, "mvm-axioms", ExecutionConfig{2});
  CHECK(a.to_json() == b.to_json());
  CHECK_FALSE(a.checks.empty());
}
