#pragma once

#include "nucspde/noise.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nucspde {

class AnticipationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Where an integrand is evaluated. A grid instant stands for the step
// (t_k, t_{k+1}] and sees F_{t_k}; a jump instant at tau sees F_{tau-}.
struct Instant {
  double time = 0.0;
  std::size_t step = 0;
  bool at_jump = false;
};

// Instant lies in (s, t].
bool in_interval(const Instant& r, double s, double t);
// Instant lies in [0, sigma].
bool up_to(const Instant& r, double sigma);

// Path data observable at an instant. Reading past it throws AnticipationError.
class History {
 public:
  // Grid points t_k <= t and jumps with time <= t.
  History(const NoisePath& path, double t);
  static History at(const NoisePath& path, const Instant& r);

  double time() const { return time_; }
  std::size_t last_index() const { return last_; }
  const TimeGrid& grid() const { return path_->grid(); }
  std::size_t dim() const { return path_->dim(); }

  Vector wiener(std::size_t k) const;
  double wiener_pairing(std::size_t k, const TestFunction& phi) const;
  Vector wiener_now() const { return wiener(last_); }
  std::span<const Jump> jumps() const;
  std::size_t jump_count(AtomMask atoms) const;

  History truncated_to(double s) const;

 private:
  History(const NoisePath* path, double time, std::size_t last, std::size_t n_jumps)
      : path_(path), time_(time), last_(last), n_jumps_(n_jumps) {}
  const NoisePath* path_;
  double time_;
  std::size_t last_;
  std::size_t n_jumps_;
};

struct MarkView {
  std::size_t atom = 0;
  const DualVector* point = nullptr;

  bool wiener() const { return point == nullptr; }
  static MarkView wiener_mark() { return {}; }
};

enum class MomentClass { square, local };

using WeakEvaluator = std::function<TestFunction(const Instant&, const History&, const MarkView&)>;
using Event = std::function<bool(const History&)>;

struct WeakIntegrand {
  WeakEvaluator eval;
  MomentClass moment = MomentClass::square;
};

WeakIntegrand deterministic_integrand(std::function<TestFunction(double, const MarkView&)> f);
WeakIntegrand stopped(const WeakIntegrand& x, double sigma);
WeakIntegrand restricted(const WeakIntegrand& x, double s0, double t0, Event f0);
WeakIntegrand linear_combination(std::vector<std::pair<double, WeakIntegrand>> terms);

struct SimpleTerm {
  RingSet set;
  TestFunction phi;
};

struct SimpleBlock {
  double s = 0.0;
  double t = 0.0;
  Event event;  // empty means the whole sample space
  std::optional<double> probability;
  std::vector<SimpleTerm> terms;
};

class SimpleIntegrand {
 public:
  SimpleIntegrand(std::size_t dim, std::vector<SimpleBlock> blocks);

  std::size_t dim() const { return dim_; }
  const std::vector<SimpleBlock>& blocks() const { return blocks_; }

  // Events of blocks sharing an interval must be disjoint on the path.
  void check_normalized(const NoisePath& path) const;
  bool event_holds(std::size_t block, const NoisePath& path) const;
  // Exact ||X||^2_{w,T}; every event needs a declared probability.
  double norm_squared(const MvmSpec& spec) const;
  WeakIntegrand as_weak() const;

 private:
  std::size_t dim_;
  std::vector<SimpleBlock> blocks_;
};

double integrate_simple(const SimpleIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t);

struct WeakIntegralPath {
  std::vector<double> values;  // at grid points 0..K
};

// Left-point scheme; jumps enter at their exact times.
WeakIntegralPath integrate_path(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path);
double integrate(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t);

// Integrates against `path` while the integrand observes `observed` (the
// filtration of a larger measure); atoms of `spec` are shown as atom + offset.
WeakIntegralPath integrate_path_observed(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path,
                                         const NoisePath& observed, std::size_t atom_offset,
                                         std::size_t last_step);

// True at grid time when the level-n localization stops.
using StoppingRule = std::function<bool(const History&, unsigned level)>;

struct LocalizedIntegral {
  std::vector<double> stopping_times;  // tau_1..tau_N, capped at T
  std::vector<double> stopped_values;  // I_t(1_{[0,tau_n]} X)
  std::optional<double> value;         // I_t(X) if t <= tau_N
  double compatibility_gap = 0.0;      // max over m<=n and grid s<=t, tau_m
};

LocalizedIntegral integrate_localized(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t,
                                      const StoppingRule& rule, unsigned levels);

struct PathwiseComparison {
  double lhs = 0.0;
  double rhs = 0.0;
  double deviation() const { return std::abs(lhs - rhs); }
  bool holds(double tol) const { return deviation() <= tol; }
};

PathwiseComparison stopped_integral_identity_check(const WeakIntegrand& x, const MvmSpec& spec,
                                                   const NoisePath& path, double sigma, double t);
PathwiseComparison subinterval_restriction_check(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path,
                                                 double s0, double t0, const Event& f0, double t);
PathwiseComparison sum_decomposition_check(const WeakIntegrand& x, const SumMvm& sum, const MvmSpec& spec1,
                                           const MvmSpec& spec2, const NoisePath& p1, const NoisePath& p2, double t);
PathwiseComparison fubini_check(const std::vector<std::pair<double, WeakIntegrand>>& family, const MvmSpec& spec,
                                const NoisePath& path, double t);

}  // namespace nucspde
