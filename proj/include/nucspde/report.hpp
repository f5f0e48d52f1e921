#pragma once

#include "nucspde/ensemble.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace nucspde {

enum class CheckKind { statistical, bound, pathwise, exact };

struct CheckResult {
  std::string name;
  std::string property;       // what is being verified
  std::string target_source;  // closed-form | exact | quadrature | scheme
  CheckKind kind = CheckKind::statistical;
  double time = std::numeric_limits<double>::quiet_NaN();
  double target = 0.0;
  McEstimate estimate;
  double bias = 0.0;  // declared deterministic bias, part of the tolerance
  double tolerance = 0.0;
  bool pass = false;
};

// |mean - target| <= 4 stderr + |bias|
CheckResult statistical_check(std::string name, std::string property, std::string source, double time,
                              const McEstimate& est, double target, double bias = 0.0);
// mean <= bound + 4 stderr + |bias|
CheckResult bound_check(std::string name, std::string property, std::string source, double time,
                        const McEstimate& est, double bound, double bias = 0.0);
// Largest deviation over n coupled evaluations <= tol.
CheckResult pathwise_check(std::string name, std::string property, double max_deviation, double tol, std::size_t n);
// |value - target| <= tol for a deterministic quantity.
CheckResult exact_check(std::string name, std::string property, std::string source, double value, double target,
                        double tol);
// lo <= value <= hi.
CheckResult range_check(std::string name, std::string property, std::string source, double value, double lo,
                        double hi);

struct VerificationReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::vector<std::string> failures() const;
  void append(const VerificationReport& other);
  std::string to_json() const;
  // Columns: time,statistic,mean,stderr,n,target,pass
  std::string to_csv() const;
};

const char* to_string(CheckKind kind);

}  // namespace nucspde
