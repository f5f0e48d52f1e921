#include "nucspde/report.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace nucspde {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json jnum(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

const char* to_string(CheckKind kind) {
  switch (kind) {
    case CheckKind::statistical: return "statistical";
    case CheckKind::bound: return "bound";
    case CheckKind::pathwise: return "pathwise";
    case CheckKind::exact: return "exact";
  }
  return "unknown";
}

CheckResult statistical_check(std::string name, std::string property, std::string source, double time,
                              const McEstimate& est, double target, double bias) {
  CheckResult c{std::move(name), std::move(property), std::move(source), CheckKind::statistical, time, target, est, bias};
  c.tolerance = 4.0 * est.std_error + std::abs(bias);
  c.pass = std::abs(est.mean - target) <= c.tolerance;
  return c;
}

CheckResult bound_check(std::string name, std::string property, std::string source, double time,
                        const McEstimate& est, double bound, double bias) {
  CheckResult c{std::move(name), std::move(property), std::move(source), CheckKind::bound, time, bound, est, bias};
  c.tolerance = 4.0 * est.std_error + std::abs(bias);
  c.pass = est.mean <= bound + c.tolerance;
  return c;
}

CheckResult pathwise_check(std::string name, std::string property, double max_deviation, double tol, std::size_t n) {
  CheckResult c;
  c.name = name;
  c.property = std::move(property);
  c.target_source = "exact";
  c.kind = CheckKind::pathwise;
  c.target = 0.0;
  c.estimate = {std::move(name), max_deviation, 0.0, n};
  c.tolerance = tol;
  c.pass = std::isfinite(max_deviation) && max_deviation <= tol;
  return c;
}

CheckResult exact_check(std::string name, std::string property, std::string source, double value, double target,
                        double tol) {
  CheckResult c;
  c.name = name;
  c.property = std::move(property);
  c.target_source = std::move(source);
  c.kind = CheckKind::exact;
  c.target = target;
  c.estimate = {std::move(name), value, 0.0, 1};
  c.tolerance = tol;
  c.pass = std::abs(value - target) <= tol;
  return c;
}

CheckResult range_check(std::string name, std::string property, std::string source, double value, double lo,
                        double hi) {
  CheckResult c = exact_check(std::move(name), std::move(property), std::move(source), value, 0.5 * (lo + hi),
                              0.5 * (hi - lo));
  c.pass = value >= lo && value <= hi;
  return c;
}

bool VerificationReport::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::vector<std::string> VerificationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.pass) out.push_back(c.name);
  return out;
}

void VerificationReport::append(const VerificationReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

std::string VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["seed"] = seed;
  j["paths"] = paths;
  j["steps"] = steps;
  j["passed"] = passed();
  j["failures"] = failures();
  auto& arr = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["property"] = c.property;
    e["kind"] = to_string(c.kind);
    e["target_source"] = c.target_source;
    e["time"] = jnum(c.time);
    e["target"] = jnum(c.target);
    e["mean"] = jnum(c.estimate.mean);
    e["stderr"] = jnum(c.estimate.std_error);
    e["n"] = c.estimate.n;
    e["bias"] = jnum(c.bias);
    e["tolerance"] = jnum(c.tolerance);
    e["pass"] = c.pass;
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string VerificationReport::to_csv() const {
  std::string out = "time,statistic,mean,stderr,n,target,pass\n";
  for (const auto& c : checks)
    out += num(c.time) + "," + c.name + "," + num(c.estimate.mean) + "," + num(c.estimate.std_error) + "," +
           std::to_string(c.estimate.n) + "," + num(c.target) + "," + (c.pass ? "true" : "false") + "\n";
  return out;
}

}  // namespace nucspde
