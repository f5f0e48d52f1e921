#include "nucspde/weak_integral.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace nucspde {

namespace {

constexpr double kSlack = 1e-12;

std::size_t jumps_before(const NoisePath& path, double t) {
  const auto& js = path.jumps();
  auto it = std::lower_bound(js.begin(), js.end(), t, [](const Jump& j, double x) { return j.time < x; });
  return static_cast<std::size_t>(it - js.begin());
}

}  // namespace

bool in_interval(const Instant& r, double s, double t) {
  if (r.at_jump) return r.time > s && r.time <= t;
  return r.time >= s - kSlack && r.time < t - kSlack;
}

bool up_to(const Instant& r, double sigma) {
  if (r.at_jump) return r.time <= sigma;
  return r.time < sigma - kSlack;
}

History::History(const NoisePath& path, double t)
    : History(&path, t, path.grid().floor_index(t), path.jumps_upto(t)) {}

History History::at(const NoisePath& path, const Instant& r) {
  if (!r.at_jump) return History(&path, r.time, r.step, path.jumps_upto(r.time));
  return History(&path, r.time, r.step, jumps_before(path, r.time));
}

Vector History::wiener(std::size_t k) const {
  if (k > last_) throw AnticipationError("integrand read the Wiener path beyond t=" + std::to_string(time_));
  return path_->wiener(k);
}

double History::wiener_pairing(std::size_t k, const TestFunction& phi) const {
  if (k > last_) throw AnticipationError("integrand read the Wiener path beyond t=" + std::to_string(time_));
  return path_->wiener(k).dot(phi.coeffs());
}

std::span<const Jump> History::jumps() const { return {path_->jumps().data(), n_jumps_}; }

std::size_t History::jump_count(AtomMask atoms) const {
  std::size_t n = 0;
  for (const Jump& j : jumps())
    if (has_atom(atoms, j.atom)) ++n;
  return n;
}

History History::truncated_to(double s) const {
  if (s > time_ + kSlack) throw AnticipationError("history truncation beyond the current time");
  return History(path_, s, std::min(last_, path_->grid().floor_index(s)),
                 std::min(n_jumps_, path_->jumps_upto(s)));
}

WeakIntegrand deterministic_integrand(std::function<TestFunction(double, const MarkView&)> f) {
  return {[f = std::move(f)](const Instant& r, const History&, const MarkView& m) { return f(r.time, m); },
          MomentClass::square};
}

WeakIntegrand stopped(const WeakIntegrand& x, double sigma) {
  return {[x, sigma](const Instant& r, const History& h, const MarkView& m) {
            return up_to(r, sigma) ? x.eval(r, h, m) : TestFunction::zero(h.dim());
          },
          x.moment};
}

WeakIntegrand restricted(const WeakIntegrand& x, double s0, double t0, Event f0) {
  return {[x, s0, t0, f0 = std::move(f0)](const Instant& r, const History& h, const MarkView& m) {
            if (!in_interval(r, s0, t0) || (f0 && !f0(h.truncated_to(s0)))) return TestFunction::zero(h.dim());
            return x.eval(r, h, m);
          },
          x.moment};
}

WeakIntegrand linear_combination(std::vector<std::pair<double, WeakIntegrand>> terms) {
  MomentClass moment = MomentClass::square;
  for (const auto& t : terms)
    if (t.second.moment == MomentClass::local) moment = MomentClass::local;
  return {[terms = std::move(terms)](const Instant& r, const History& h, const MarkView& m) {
            Vector v = Vector::Zero(static_cast<Eigen::Index>(h.dim()));
            for (const auto& [w, x] : terms) v += w * x.eval(r, h, m).coeffs();
            return TestFunction(std::move(v));
          },
          moment};
}

SimpleIntegrand::SimpleIntegrand(std::size_t dim, std::vector<SimpleBlock> blocks)
    : dim_(dim), blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) {
    if (!(b.s >= 0.0 && b.s < b.t)) throw StructuralError("simple block needs 0 <= s < t");
    if (b.probability && !(*b.probability >= 0.0 && *b.probability <= 1.0))
      throw StructuralError("event probability outside [0,1]");
    for (const auto& term : b.terms)
      if (term.phi.dim() != dim_) throw DimensionError("simple term dimension mismatch");
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    for (std::size_t j = i + 1; j < blocks_.size(); ++j) {
      const auto& a = blocks_[i];
      const auto& b = blocks_[j];
      const bool same = a.s == b.s && a.t == b.t;
      const bool disjoint = a.t <= b.s || b.t <= a.s;
      if (!same && !disjoint)
        throw StructuralError("simple blocks " + std::to_string(i) + " and " + std::to_string(j) +
                              " overlap without sharing an interval");
    }
}

bool SimpleIntegrand::event_holds(std::size_t block, const NoisePath& path) const {
  const auto& b = blocks_.at(block);
  return !b.event || b.event(History(path, b.s));
}

void SimpleIntegrand::check_normalized(const NoisePath& path) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    for (std::size_t j = i + 1; j < blocks_.size(); ++j) {
      if (blocks_[i].s != blocks_[j].s || blocks_[i].t != blocks_[j].t) continue;
      if (event_holds(i, path) && event_holds(j, path))
        throw StructuralError("blocks " + std::to_string(i) + " and " + std::to_string(j) +
                              " share an interval but their events intersect");
    }
}

double SimpleIntegrand::norm_squared(const MvmSpec& spec) const {
  double total = 0.0;
  const auto& levy = spec.levy();
  for (const auto& b : blocks_) {
    if (b.event && !b.probability) throw StructuralError("norm needs the probability of every event");
    const double p = b.event ? *b.probability : 1.0;
    Vector zero_part = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& term : b.terms) {
      spec.require_ring(term.set);
      if (term.set.zero) zero_part += term.phi.coeffs();
    }
    double inner = spec.wiener_form(TestFunction(zero_part), TestFunction(zero_part));
    for (std::size_t k = 0; k < levy.size(); ++k) {
      double v = 0.0;
      for (const auto& term : b.terms)
        if (term.set.contains_atom(k)) v += pairing(levy.atom(k).point, term.phi);
      inner += levy.atom(k).rate * v * v;
    }
    total += p * (b.t - b.s) * inner;
  }
  return total;
}

WeakIntegrand SimpleIntegrand::as_weak() const {
  auto self = std::make_shared<const SimpleIntegrand>(*this);
  return {[self](const Instant& r, const History& h, const MarkView& m) {
            Vector v = Vector::Zero(static_cast<Eigen::Index>(self->dim_));
            for (const auto& b : self->blocks_) {
              if (!in_interval(r, b.s, b.t)) continue;
              if (b.event && !b.event(h.truncated_to(b.s))) continue;
              for (const auto& term : b.terms) {
                const bool hit = m.wiener() ? term.set.zero : term.set.contains_atom(m.atom);
                if (hit) v += term.phi.coeffs();
              }
            }
            return TestFunction(std::move(v));
          },
          MomentClass::square};
}

double integrate_simple(const SimpleIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t) {
  if (x.dim() != spec.dim()) throw DimensionError("integrate_simple: dimension mismatch");
  x.check_normalized(path);
  double v = 0.0;
  for (std::size_t i = 0; i < x.blocks().size(); ++i) {
    if (!x.event_holds(i, path)) continue;
    const auto& b = x.blocks()[i];
    for (const auto& term : b.terms) v += mvm_evaluate(spec, path, std::min(b.s, t), std::min(b.t, t), term.set, term.phi);
  }
  return v;
}

WeakIntegralPath integrate_path_observed(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path,
                                         const NoisePath& observed, std::size_t atom_offset,
                                         std::size_t last_step) {
  if (!x.eval) throw StructuralError("integrand has no evaluator");
  const TimeGrid& grid = path.grid();
  if (&observed != &path && observed.grid().times() != grid.times())
    throw DomainError("observed path lives on a different grid");
  if (last_step > grid.steps()) throw DomainError("integration beyond the horizon");
  const std::size_t d = spec.dim();
  const auto& levy = spec.levy();
  auto checked = [d](TestFunction v) {
    if (v.dim() != d) throw DimensionError("integrand returned a vector of the wrong dimension");
    return v;
  };

  WeakIntegralPath out;
  out.values.assign(last_step + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < last_step; ++k) {
    const Instant r{grid.time(k), k, false};
    const History h = History::at(observed, r);
    if (spec.has_wiener()) {
      const TestFunction v = checked(x.eval(r, h, MarkView::wiener_mark()));
      acc += path.increment(k).dot(v.coeffs());
    }
    double comp = 0.0;
    for (std::size_t a = 0; a < levy.size(); ++a) {
      if (!spec.in_domain(a)) continue;
      const TestFunction v = checked(x.eval(r, h, MarkView{a + atom_offset, &levy.atom(a).point}));
      comp += levy.atom(a).rate * pairing(levy.atom(a).point, v);
    }
    acc -= grid.dt(k) * comp;
    for (const Jump& j : path.jumps_in(grid.time(k), grid.time(k + 1))) {
      if (!spec.in_domain(j.atom)) continue;
      const Instant rj{j.time, k, true};
      const TestFunction v = checked(x.eval(rj, History::at(observed, rj),
                                            MarkView{j.atom + atom_offset, &levy.atom(j.atom).point}));
      acc += pairing(levy.atom(j.atom).point, v);
    }
    out.values[k + 1] = acc;
  }
  return out;
}

WeakIntegralPath integrate_path(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path) {
  return integrate_path_observed(x, spec, path, path, 0, path.grid().steps());
}

double integrate(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t) {
  const std::size_t k = path.grid().require_index(t);
  return integrate_path_observed(x, spec, path, path, 0, k).values[k];
}

LocalizedIntegral integrate_localized(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path, double t,
                                      const StoppingRule& rule, unsigned levels) {
  if (levels == 0) throw DomainError("localization needs at least one level");
  const TimeGrid& grid = path.grid();
  const std::size_t kt = grid.require_index(t);
  LocalizedIntegral out;
  std::vector<WeakIntegralPath> paths;
  double prev = 0.0;
  for (unsigned n = 1; n <= levels; ++n) {
    double tau = grid.horizon();
    for (std::size_t k = 0; k <= grid.steps(); ++k)
      if (rule(History(path, grid.time(k)), n)) {
        tau = grid.time(k);
        break;
      }
    tau = std::max(tau, prev);
    prev = tau;
    out.stopping_times.push_back(tau);
    paths.push_back(integrate_path_observed(stopped(x, tau), spec, path, path, 0, kt));
    out.stopped_values.push_back(paths.back().values[kt]);
  }
  for (unsigned n = 0; n < levels; ++n)
    if (t <= out.stopping_times[n] + kSlack) {
      out.value = out.stopped_values[n];
      break;
    }
  for (unsigned m = 0; m < levels; ++m)
    for (unsigned n = m + 1; n < levels; ++n)
      for (std::size_t k = 0; k <= kt && grid.time(k) <= out.stopping_times[m] + kSlack; ++k)
        out.compatibility_gap =
            std::max(out.compatibility_gap, std::abs(paths[n].values[k] - paths[m].values[k]));
  return out;
}

PathwiseComparison stopped_integral_identity_check(const WeakIntegrand& x, const MvmSpec& spec,
                                                   const NoisePath& path, double sigma, double t) {
  return {integrate(stopped(x, sigma), spec, path, t), integrate(x, spec, path, std::min(t, sigma))};
}

PathwiseComparison subinterval_restriction_check(const WeakIntegrand& x, const MvmSpec& spec, const NoisePath& path,
                                                 double s0, double t0, const Event& f0, double t) {
  const double lhs = integrate(restricted(x, s0, t0, f0), spec, path, t);
  if (f0 && !f0(History(path, s0))) return {lhs, 0.0};
  const WeakIntegralPath p = integrate_path(x, spec, path);
  const auto& g = path.grid();
  return {lhs, p.values[g.require_index(std::min(t, t0))] - p.values[g.require_index(std::min(t, s0))]};
}

PathwiseComparison sum_decomposition_check(const WeakIntegrand& x, const SumMvm& sum, const MvmSpec& spec1,
                                           const MvmSpec& spec2, const NoisePath& p1, const NoisePath& p2, double t) {
  const NoisePath merged = merge_paths(sum, p1, p2);
  const std::size_t k = merged.grid().require_index(t);
  const double lhs = integrate(x, sum.spec, merged, t);
  const double rhs = integrate_path_observed(x, spec1, p1, merged, 0, k).values[k] +
                     integrate_path_observed(x, spec2, p2, merged, sum.offset, k).values[k];
  return {lhs, rhs};
}

PathwiseComparison fubini_check(const std::vector<std::pair<double, WeakIntegrand>>& family, const MvmSpec& spec,
                                const NoisePath& path, double t) {
  const double lhs = integrate(linear_combination(family), spec, path, t);
  double rhs = 0.0;
  for (const auto& [w, x] : family) rhs += w * integrate(x, spec, path, t);
  return {lhs, rhs};
}

}  // namespace nucspde
