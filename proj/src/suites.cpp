#include "nucspde/suites.hpp"

#include "nucspde/quadrature.hpp"
#include "nucspde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace nucspde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TestFunction tf(std::size_t d, std::initializer_list<double> v) {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(d));
  std::size_t i = 0;
  for (double a : v) {
    if (i < d) x(static_cast<Eigen::Index>(i)) = a;
    ++i;
  }
  return TestFunction(std::move(x));
}

std::vector<TestFunction> residual_test_functions(std::size_t d) {
  Vector tail(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) tail(static_cast<Eigen::Index>(j)) = 1.0 / (1.0 + static_cast<double>(j));
  return {tf(d, {1.0}), tf(d, {0.0, 1.0}), tf(d, {1.0, 1.0}), tf(d, {-0.5, 0.0, 1.0}), TestFunction(tail)};
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

double column_rms(const EnsembleTable& t, std::size_t c) {
  double s = 0.0;
  for (std::size_t p = 0; p < t.paths(); ++p) s += t.row(p)[c] * t.row(p)[c];
  return std::sqrt(s / static_cast<double>(t.paths()));
}

// First grid point at or after the first jump, T if none.
double grid_stop_after_first_jump(const NoisePath& path) {
  if (path.jumps().empty()) return path.grid().horizon();
  const std::size_t k = path.grid().floor_index(path.jumps().front().time);
  const double tk = path.grid().time(k);
  if (tk >= path.jumps().front().time) return tk;
  return path.grid().time(std::min(k + 1, path.grid().steps()));
}

double wiener_sign_coord(const History& h) { return h.wiener_now()(0); }

struct Context {
  const Scenario& sc;
  ExecutionConfig exec;
  MvmSpec spec;
  std::shared_ptr<const TimeGrid> grid;
  double T;
  std::size_t K;

  EnsembleTable run(std::vector<std::string> labels, std::size_t paths, const PathStatistic& stat) const {
    return run_ensemble(std::move(labels), paths, stat, exec);
  }
  NoisePath path(const MvmSpec& s, std::uint64_t id, std::uint32_t family = 0) const {
    return simulate_path(s, grid, sc.seed, id, family);
  }
};

// ---------------------------------------------------------------- isometry

SimpleIntegrand clip_simple(const SimpleIntegrand& x, double from) {
  std::vector<SimpleBlock> blocks;
  for (auto b : x.blocks()) {
    if (b.t <= from) continue;
    b.s = std::max(b.s, from);
    blocks.push_back(std::move(b));
  }
  return SimpleIntegrand(x.dim(), std::move(blocks));
}

void isometry_entry(const Context& c, const WeakIntegrandEntry& e, VerificationReport& rep) {
  const MvmSpec spec = noise_for(e.noise, c.spec);
  const std::size_t K = c.K, kh = K / 2;
  const double th = c.grid->time(kh);
  const bool deterministic = static_cast<bool>(e.deterministic);
  const bool stochastic = !deterministic && !e.simple;
  const auto& levy = spec.levy();
  double comp_rate = 0.0;
  for (std::size_t a = 0; a < levy.size(); ++a)
    if (spec.in_domain(a)) comp_rate += levy.atom(a).rate;
  AtomMask dom = 0;
  for (std::size_t a = 0; a < levy.size(); ++a)
    if (spec.in_domain(a)) dom |= atom_bit(a);

  std::vector<std::string> labels{"I",       "I2",     "sup_I2", "I_half", "dI_W", "dI_I", "dI_N",
                                  "dI2",     "I2_coarse", "scheme_T", "scheme_half"};
  const std::string pre = "isometry/" + e.label + "/";
  EnsembleTable t = c.run(labels, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath path = c.path(spec, id);
    const WeakIntegralPath ip = integrate_path(e.integrand, spec, path);
    const double it = ip.values[K], ih = ip.values[kh], di = it - ih;
    double sup = 0.0;
    for (double v : ip.values) sup = std::max(sup, v * v);
    const double g1 = spec.has_wiener() ? path.wiener(kh)(0) : 0.0;
    double g3 = -th * comp_rate;
    for (const Jump& j : path.jumps_in(0.0, th))
      if (has_atom(dom, j.atom)) g3 += 1.0;
    const double ic = integrate(e.integrand, spec, path.coarsen(4), c.T);
    double s_t = 0.0, s_h = 0.0;
    if (stochastic) {
      for (std::size_t k = 0; k < K; ++k) {
        const Instant r{c.grid->time(k), k, false};
        const History h = History::at(path, r);
        double dens = 0.0;
        if (spec.has_wiener()) {
          const TestFunction v = e.integrand.eval(r, h, MarkView::wiener_mark());
          dens += spec.wiener_form(v, v);
        }
        for (std::size_t a = 0; a < levy.size(); ++a) {
          if (!spec.in_domain(a)) continue;
          const double u = pairing(levy.atom(a).point, e.integrand.eval(r, h, MarkView{a, &levy.atom(a).point}));
          dens += levy.atom(a).rate * u * u;
        }
        s_t += c.grid->dt(k) * dens;
        if (k >= kh) s_h += c.grid->dt(k) * dens;
      }
    }
    row[0] = it;
    row[1] = it * it;
    row[2] = sup;
    row[3] = ih;
    row[4] = di * g1;
    row[5] = di * ih;
    row[6] = di * g3;
    row[7] = di * di;
    row[8] = ic * ic;
    row[9] = s_t;
    row[10] = s_h;
  });

  if (stochastic) {
    // Paired comparison against the per-path scheme norm.
    std::vector<double> diff(t.paths()), diff_h(t.paths()), doob(t.paths());
    for (std::size_t p = 0; p < t.paths(); ++p) {
      diff[p] = t.row(p)[1] - t.row(p)[9];
      diff_h[p] = t.row(p)[7] - t.row(p)[10];
      doob[p] = t.row(p)[2] - 4.0 * t.row(p)[9];
    }
    rep.checks.push_back(statistical_check(pre + "second-moment", "E I_T^2 equals the integrand norm", "scheme", c.T,
                                           estimate(pre + "second-moment", diff), 0.0));
    rep.checks.push_back(statistical_check(pre + "increment-second-moment",
                                           "E (I_T - I_T/2)^2 equals the norm on (T/2, T]", "scheme", c.T,
                                           estimate(pre + "increment-second-moment", diff_h), 0.0));
    rep.checks.push_back(statistical_check(pre + "mean", "E I_T = 0", "exact", c.T, t.estimate("I"), 0.0));
    rep.checks.push_back(bound_check(pre + "doob", "E sup_t I_t^2 <= 4 ||X||^2", "scheme", c.T,
                                     estimate(pre + "doob", doob), 0.0));
    rep.checks.push_back(statistical_check(pre + "martingale-W", "increment uncorrelated with W_T/2", "exact", th,
                                           t.estimate("dI_W"), 0.0));
    rep.checks.push_back(statistical_check(pre + "martingale-I", "increment uncorrelated with I_T/2", "exact", th,
                                           t.estimate("dI_I"), 0.0));
    rep.checks.push_back(statistical_check(pre + "martingale-N", "increment uncorrelated with N_T/2", "exact", th,
                                           t.estimate("dI_N"), 0.0));
    return;
  }

  double norm_t, norm_h, scheme_t, scheme_h, scheme_coarse, m_t = 0.0, m1 = 0.0, m2 = 0.0, a_max = 0.0;
  std::optional<SchemeOracle> oracle, half_oracle, quarter_oracle;
  if (deterministic) {
    oracle.emplace(e.deterministic, spec, c.grid);
    half_oracle.emplace(e.deterministic, spec, c.sc.grid(K / 2));
    quarter_oracle.emplace(e.deterministic, spec, c.sc.grid(K / 4));
    norm_t = oracle->norm(0.0, c.T);
    norm_h = oracle->norm(th, c.T);
    scheme_t = oracle->scheme(0, K);
    scheme_h = oracle->scheme(kh, K);
    scheme_coarse = quarter_oracle->scheme(0, K / 4);
    m_t = oracle->mismatch(0, K);
    m1 = oracle->mismatch(0, kh);
    m2 = oracle->mismatch(kh, K);
    for (std::size_t k = 1; k <= K; ++k) a_max = std::max(a_max, std::abs(oracle->mismatch(0, k)));
  } else {
    norm_t = scheme_t = scheme_coarse = e.simple->norm_squared(spec);
    norm_h = scheme_h = clip_simple(*e.simple, th).norm_squared(spec);
  }
  const double source_bias = scheme_t - norm_t;
  const std::string src = deterministic ? "quadrature" : "exact";
  rep.checks.push_back(statistical_check(pre + "second-moment", "E I_T^2 equals the integrand norm", src, c.T,
                                         t.estimate("I2"), norm_t, source_bias));
  rep.checks.push_back(statistical_check(pre + "second-moment-coarse", "E I_T^2 on the 4x coarser grid", src, c.T,
                                         t.estimate("I2_coarse"), norm_t, scheme_coarse - norm_t));
  rep.checks.push_back(statistical_check(pre + "increment-second-moment",
                                         "E (I_T - I_T/2)^2 equals the norm on (T/2, T]", src, c.T, t.estimate("dI2"),
                                         norm_h, scheme_h - norm_h));
  rep.checks.push_back(statistical_check(pre + "mean", "E I_T = 0", "exact", c.T, t.estimate("I"), 0.0, m_t));
  const double var_t = scheme_t - m_t * m_t;
  const double doob_scheme = std::pow(2.0 * std::sqrt(std::max(var_t, 0.0)) + a_max, 2.0);
  rep.checks.push_back(bound_check(pre + "doob", "E sup_t I_t^2 <= 4 ||X||^2", src, c.T, t.estimate("sup_I2"),
                                   4.0 * norm_t, std::max(0.0, doob_scheme - 4.0 * norm_t)));
  rep.checks.push_back(statistical_check(pre + "martingale-W", "increment uncorrelated with W_T/2", "exact", th,
                                         t.estimate("dI_W"), 0.0));
  rep.checks.push_back(statistical_check(pre + "martingale-I", "increment uncorrelated with I_T/2", "exact", th,
                                         t.estimate("dI_I"), 0.0, m1 * m2));
  rep.checks.push_back(statistical_check(pre + "martingale-N", "increment uncorrelated with N_T/2", "exact", th,
                                         t.estimate("dI_N"), 0.0));

  // Grid bias of the scheme: first order when the integrand varies in time.
  if (deterministic && std::abs(source_bias) > 1e-6 * std::max(norm_t, 1e-300)) {
    const double b1 = scheme_t - norm_t;
    const double b2 = half_oracle->scheme(0, K / 2) - norm_t;
    const double b4 = quarter_oracle->scheme(0, K / 4) - norm_t;
    rep.checks.push_back(range_check(pre + "bias-slope-fine", "grid bias halves with the step (K/2 -> K)", "scheme",
                                     std::log2(b2 / b1), 0.7, 1.3));
    rep.checks.push_back(range_check(pre + "bias-slope-coarse", "grid bias halves with the step (K/4 -> K/2)",
                                     "scheme", std::log2(b4 / b2), 0.7, 1.3));
  }
}

void isometry_suite(const Context& c, VerificationReport& rep) {
  for (std::size_t i = 0; i < c.sc.isometry_integrands.size(); ++i)
    isometry_entry(c, make_weak_integrand(c.sc.isometry_integrands[i], c.sc.dim, "/integrands/weak/" + std::to_string(i)),
                   rep);
}

// -------------------------------------------------------------- mvm-axioms

void mvm_axioms_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim, K = c.K, kh = K / 2;
  const double T = c.T, th = c.grid->time(kh);
  const MvmSpec& spec = c.spec;
  const std::size_t L = spec.levy().size();
  const TestFunction phi1 = tf(d, {1.0, 0.5, -0.5}), phi2 = tf(d, {0.0, 1.0, 1.0, 0.5});
  struct Named {
    std::string name;
    RingSet set;
  };
  std::vector<Named> sets{{"W", RingSet::wiener()}};
  if (L > 0) {
    sets.push_back({"J0", RingSet::of_atoms(atom_bit(0))});
    if (L > 1) sets.push_back({"Jrest", RingSet::of_atoms(all_atoms(L) & ~atom_bit(0))});
  }
  sets.push_back({"all", RingSet::everything(L)});
  const std::string pre = "mvm-axioms/";

  // Pathwise axioms.
  {
    std::vector<std::string> labels{"additive-set", "additive-time", "linear", "zero", "repro"};
    EnsembleTable t = c.run(labels, c.sc.pathwise_paths, [&](std::uint64_t id, std::span<double> row) {
      const NoisePath path = c.path(spec, id);
      double dev_set = 0.0, dev_time = 0.0, dev_lin = 0.0, zero = 0.0;
      for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
          if (!sets[i].set.disjoint(sets[j].set)) continue;
          for (auto [s, tt] : {std::pair{0.0, th}, std::pair{th, T}}) {
            const double whole = mvm_evaluate(spec, path, s, tt, sets[i].set.unite(sets[j].set), phi1);
            dev_set = std::max(dev_set, std::abs(whole - mvm_evaluate(spec, path, s, tt, sets[i].set, phi1) -
                                                 mvm_evaluate(spec, path, s, tt, sets[j].set, phi1)));
          }
        }
      for (const auto& s : sets) {
        const double whole = mvm_evaluate(spec, path, 0.0, T, s.set, phi1);
        dev_time = std::max(dev_time, std::abs(whole - mvm_evaluate(spec, path, 0.0, th, s.set, phi1) -
                                               mvm_evaluate(spec, path, th, T, s.set, phi1)));
        const double lin = mvm_evaluate(spec, path, 0.0, T, s.set, 2.0 * phi1 + (-3.0) * phi2);
        dev_lin = std::max(dev_lin, std::abs(lin - 2.0 * whole + 3.0 * mvm_evaluate(spec, path, 0.0, T, s.set, phi2)));
        zero = std::max(zero, std::abs(mvm_evaluate(spec, path, 0.0, 0.0, s.set, phi1)));
        zero = std::max(zero, std::abs(mvm_evaluate(spec, path, th, th, s.set, phi1)));
      }
      zero = std::max(zero, std::abs(mvm_evaluate(spec, path, 0.0, T, RingSet::empty(), phi1)));
      const NoisePath again = c.path(spec, id);
      const NoisePath other = c.path(spec, id + 1);
      row[0] = dev_set;
      row[1] = dev_time;
      row[2] = dev_lin;
      row[3] = zero;
      row[4] = (again == path ? 0.0 : 1.0) + (other == path ? 1.0 : 0.0);
    });
    auto col_max = [&](std::size_t i) { return max_of(t.column(i)); };
    rep.checks.push_back(pathwise_check(pre + "additivity-sets", "M(A u B) = M(A) + M(B) for disjoint A, B",
                                        col_max(0), 1e-12, t.paths()));
    rep.checks.push_back(pathwise_check(pre + "additivity-time", "M((0,T]) = M((0,T/2]) + M((T/2,T])", col_max(1),
                                        1e-12, t.paths()));
    rep.checks.push_back(pathwise_check(pre + "linearity", "M(A)(a phi + b vphi) = a M(A)(phi) + b M(A)(vphi)",
                                        col_max(2), 1e-12, t.paths()));
    rep.checks.push_back(pathwise_check(pre + "null-cases", "M(t,A) = 0 for t = 0 and for A empty", col_max(3), 0.0,
                                        t.paths()));
    rep.checks.push_back(pathwise_check(pre + "reproducibility",
                                        "same (seed, path id) gives the same path; neighbours differ", col_max(4),
                                        0.0, t.paths()));
  }

  // Moments.
  {
    std::vector<std::string> labels;
    for (const auto& s : sets) labels.push_back("M_" + s.name);
    for (const auto& s : sets) labels.push_back("cov_" + s.name);
    labels.push_back("sq_all");
    std::vector<std::pair<std::size_t, std::size_t>> disjoint;
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i + 1; j < sets.size(); ++j)
        if (sets[i].set.disjoint(sets[j].set)) {
          disjoint.emplace_back(i, j);
          labels.push_back("orth_" + sets[i].name + "_" + sets[j].name);
        }
    labels.insert(labels.end(), {"inc_W", "inc_N", "inc_M"});
    const std::size_t n = sets.size();
    EnsembleTable t = c.run(labels, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
      const NoisePath path = c.path(spec, id);
      std::vector<double> m1(n), m2(n);
      for (std::size_t i = 0; i < n; ++i) {
        m1[i] = mvm_evaluate(spec, path, 0.0, T, sets[i].set, phi1);
        m2[i] = mvm_evaluate(spec, path, 0.0, T, sets[i].set, phi2);
        row[i] = m1[i];
        row[n + i] = m1[i] * m2[i];
      }
      row[2 * n] = m1[n - 1] * m1[n - 1];
      std::size_t col = 2 * n + 1;
      for (auto [i, j] : disjoint) row[col++] = m1[i] * m2[j];
      const double inc = mvm_evaluate(spec, path, th, T, RingSet::everything(L), phi1);
      const double gw = spec.has_wiener() ? path.wiener(kh)(0) : 0.0;
      double gn = 0.0;
      if (L > 0) {
        gn = -th * spec.levy().atom(0).rate;
        for (const Jump& j : path.jumps_in(0.0, th))
          if (j.atom == 0) gn += 1.0;
      }
      row[col++] = inc * gw;
      row[col++] = inc * gn;
      row[col++] = inc * mvm_evaluate(spec, path, 0.0, th, RingSet::everything(L), phi2);
    });
    auto cov = [&](const RingSet& a, const TestFunction& x, const TestFunction& y) {
      double v = 0.0;
      if (a.zero) v += spec.wiener_form(x, y);
      for (std::size_t k = 0; k < L; ++k)
        if (a.contains_atom(k))
          v += spec.levy().atom(k).rate * pairing(spec.levy().atom(k).point, x) * pairing(spec.levy().atom(k).point, y);
      return T * v;
    };
    for (std::size_t i = 0; i < n; ++i)
      rep.checks.push_back(statistical_check(pre + "mean/" + sets[i].name, "E M(T,A)(phi) = 0", "exact", T,
                                             t.estimate(i), 0.0));
    for (std::size_t i = 0; i < n; ++i)
      rep.checks.push_back(statistical_check(pre + "covariance/" + sets[i].name,
                                             "E M(T,A)(phi) M(T,A)(vphi) = T q-form on A", "exact", T,
                                             t.estimate(n + i), cov(sets[i].set, phi1, phi2)));
    rep.checks.push_back(statistical_check(pre + "second-moment/all", "E M(T,A)(phi)^2 = T int_A q(phi)^2 dmu",
                                           "exact", T, t.estimate(2 * n), spec.second_moment(sets[n - 1].set, phi1, 0.0, T)));
    std::size_t col = 2 * n + 1;
    for (auto [i, j] : disjoint)
      rep.checks.push_back(statistical_check(pre + "orthogonality/" + sets[i].name + "-" + sets[j].name,
                                             "E M(T,A)(phi) M(T,B)(vphi) = 0 for disjoint A, B", "exact", T,
                                             t.estimate(col++), 0.0));
    for (const char* g : {"W", "N", "M"})
      rep.checks.push_back(statistical_check(pre + "increment/" + g, "M((T/2,T]) uncorrelated with the past", "exact",
                                             th, t.estimate(col++), 0.0));
  }

  // Compensated Poisson second moments for three atomic measures.
  struct Config {
    std::string name;
    std::vector<LevyAtom> atoms;
    TestFunction phi;
  };
  const std::size_t d1 = std::min<std::size_t>(1, d - 1);
  std::vector<Config> configs{{"three-delta", {{DualVector(2.0 * TestFunction::basis(d, 0).coeffs()), 3.0}},
                               TestFunction::basis(d, 0)}};
  if (L > 0) configs.push_back({"scenario", spec.levy().atoms(), tf(d, {1.0, 1.0, 1.0})});
  configs.push_back({"radial",
                     atomize_radial_gaussian(DualVector(TestFunction::basis(d, d1).coeffs()), 4.0, 0.5, 8),
                     TestFunction::basis(d, d1)});
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& cfg = configs[i];
    const MvmSpec pspec(Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
                        LevyMeasure(d, cfg.atoms));
    const AtomMask all = all_atoms(cfg.atoms.size());
    EnsembleTable t = c.run({"P", "P2", "P2_half"}, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
      const NoisePath path = c.path(pspec, id, static_cast<std::uint32_t>(1 + i));
      const double v = compensated_poisson_integral(pspec, path, T, all, cfg.phi);
      const double vh = compensated_poisson_integral(pspec, path, th, all, cfg.phi);
      row[0] = v;
      row[1] = v * v;
      row[2] = vh * vh;
    });
    const double m = pspec.levy().second_moment(all, cfg.phi);
    rep.checks.push_back(statistical_check(pre + "poisson/" + cfg.name + "/second-moment",
                                           "E |compensated Poisson integral|^2 = t int |u[phi]|^2 nu(du)", "exact", T,
                                           t.estimate("P2"), T * m));
    rep.checks.push_back(statistical_check(pre + "poisson/" + cfg.name + "/second-moment-half",
                                           "E |compensated Poisson integral|^2 = t int |u[phi]|^2 nu(du)", "exact", th,
                                           t.estimate("P2_half"), th * m));
    rep.checks.push_back(statistical_check(pre + "poisson/" + cfg.name + "/mean", "compensated integral has mean 0",
                                           "exact", T, t.estimate("P"), 0.0));
  }
}

// ------------------------------------------------------------------ fubini

WeakIntegrand jump_aware_integrand(const TestFunction& phi1, const TestFunction& phi2) {
  return {[phi1, phi2](const Instant&, const History& h, const MarkView&) {
            const double f = 1.0 + 0.5 * std::tanh(wiener_sign_coord(h));
            return f * phi1 + (0.1 * static_cast<double>(h.jumps().size())) * phi2;
          },
          MomentClass::square};
}

void fubini_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim, K = c.K;
  const double T = c.T, th = c.grid->time(K / 2);
  const MvmSpec& spec = c.spec;
  const std::size_t L = spec.levy().size();
  const std::vector<double> weights{0.1, 0.2, 0.3, 0.25, 0.15};
  const std::string pre = "fubini/";

  std::vector<SimpleIntegrand> simple;
  std::vector<std::pair<double, WeakIntegrand>> simple_family, general_family;
  for (std::size_t e = 0; e < weights.size(); ++e) {
    const double x = static_cast<double>(e);
    std::vector<SimpleBlock> blocks;
    blocks.push_back({0.0, th, {}, std::nullopt,
                      {{RingSet{true, L > 0 ? atom_bit(0) : 0}, tf(d, {1.0 + x, -0.5 * x, 0.25})}}});
    blocks.push_back({th, T, [](const History& h) { return wiener_sign_coord(h) > 0.0; }, 0.5,
                      {{RingSet::everything(L), tf(d, {0.5, 1.0, x})}}});
    blocks.push_back({th, T, [](const History& h) { return wiener_sign_coord(h) <= 0.0; }, 0.5,
                      {{RingSet::wiener(), tf(d, {x, 0.0, 1.0})}, {RingSet::of_atoms(all_atoms(L)), tf(d, {0.0, 2.0})}}});
    simple.emplace_back(d, std::move(blocks));
    simple_family.emplace_back(weights[e], simple.back().as_weak());
    const double freq = 0.5 * (x + 1.0);
    const TestFunction phi = tf(d, {1.0, x / 4.0, 0.5, -0.25 * x});
    const TestFunction obs = tf(d, {1.0, 0.5});
    general_family.emplace_back(
        weights[e], WeakIntegrand{[phi, obs, freq](const Instant& r, const History& h, const MarkView&) {
                                    return std::sin(freq * h.wiener_now().dot(obs.coeffs()) + r.time) * phi;
                                  },
                                  MomentClass::square});
  }
  const TestFunction phi1 = tf(d, {1.0, 0.5, -0.5}), phi2 = tf(d, {0.0, 1.0, 1.0, 0.5});
  const WeakIntegrand feedback = jump_aware_integrand(phi1, phi2);
  const WeakIntegrand local{[phi1](const Instant&, const History& h, const MarkView&) {
                              return std::exp(wiener_sign_coord(h)) * phi1;
                            },
                            MomentClass::local};
  const StoppingRule rule = [](const History& h, unsigned n) {
    return std::abs(wiener_sign_coord(h)) >= static_cast<double>(n);
  };
  const MvmSpec spec1(spec.covariance(), LevyMeasure(d, {}));
  const MvmSpec spec2(Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)), spec.levy());
  const SumMvm sum = sum_mvm(spec1, spec2);
  const double s0 = c.grid->time(K / 4), t0 = c.grid->time(3 * K / 4);
  const Event f0 = [](const History& h) { return wiener_sign_coord(h) > 0.0; };

  std::vector<std::string> labels{"simple",  "simple-route", "general", "stopped", "stopped-half",
                                  "restricted", "sum",       "local-gap", "local-value"};
  EnsembleTable t = c.run(labels, c.sc.pathwise_paths, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath path = c.path(spec, id);
    double rhs = 0.0, route = 0.0;
    for (std::size_t e = 0; e < simple.size(); ++e) {
      const double exact = integrate_simple(simple[e], spec, path, T);
      rhs += weights[e] * exact;
      route = std::max(route, std::abs(exact - integrate(simple_family[e].second, spec, path, T)));
    }
    row[0] = std::abs(integrate(linear_combination(simple_family), spec, path, T) - rhs);
    row[1] = route;
    row[2] = fubini_check(general_family, spec, path, T).deviation();
    const double sigma = grid_stop_after_first_jump(path);
    row[3] = stopped_integral_identity_check(feedback, spec, path, sigma, T).deviation();
    row[4] = stopped_integral_identity_check(feedback, spec, path, sigma, th).deviation();
    row[5] = subinterval_restriction_check(feedback, spec, path, s0, t0, f0, T).deviation();
    const NoisePath p1 = c.path(spec1, id, 0), p2 = c.path(spec2, id, 1);
    row[6] = sum_decomposition_check(feedback, sum, spec1, spec2, p1, p2, T).deviation();
    const LocalizedIntegral li = integrate_localized(local, spec, path, T, rule, 3);
    row[7] = li.compatibility_gap;
    row[8] = li.value ? std::abs(*li.value - integrate(local, spec, path, T)) : 0.0;
  });
  auto col_max = [&](std::size_t i) { return max_of(t.column(i)); };
  const std::size_t n = t.paths();
  rep.checks.push_back(pathwise_check(pre + "simple-family",
                                      "integral of the mixture equals the mixture of integrals (simple)", col_max(0),
                                      1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "simple-routes", "simple integral equals the general scheme", col_max(1),
                                      1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "general-family",
                                      "integral of the mixture equals the mixture of integrals (5 points)",
                                      col_max(2), 1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "stopped", "I_t(1_[0,sigma] X) = I_{t ^ sigma}(X)",
                                      std::max(col_max(3), col_max(4)), 1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "restricted", "I_t(1_{(s0,t0] x F0} X) = 1_F0 (I_{t ^ t0} - I_{t ^ s0})",
                                      col_max(5), 1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "sum-decomposition", "integral against M1 + M2 splits into two integrals",
                                      col_max(6), 1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "localization-compatibility",
                                      "stopped integrals agree on [0, tau_m] across levels", col_max(7), 1e-10, n));
  rep.checks.push_back(pathwise_check(pre + "localization-value", "localized integral equals the direct scheme",
                                      col_max(8), 1e-10, n));
}

// ------------------------------------------------------------------ strong

Matrix seeded_matrix(std::size_t d, std::uint64_t seed, std::uint32_t sub) {
  Philox4x32 gen(seed, 0, StreamTag::samples, sub);
  std::normal_distribution<double> normal;
  Matrix m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(gen) / std::sqrt(static_cast<double>(d));
  return m;
}

void strong_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim, K = c.K, kh = K / 2;
  const double T = c.T, th = c.grid->time(kh);
  const MvmSpec& spec = c.spec;
  const SeminormFamily family = c.sc.family();
  const unsigned level = c.sc.picard.norm_level;
  const Vector inv_w = family.weights(level).cwiseInverse();
  const Matrix push = seeded_matrix(d, c.sc.seed, 2);
  const double s0 = c.grid->time(K / 4), t0 = c.grid->time(3 * K / 4);
  const Event f0 = [](const History& h) { return wiener_sign_coord(h) > 0.0; };

  std::vector<OperatorIntegrandEntry> entries;
  for (std::size_t i = 0; i < c.sc.strong_integrands.size(); ++i)
    entries.push_back(make_operator_integrand(c.sc.strong_integrands[i], d, "/integrands/operator/" + std::to_string(i)));
  const std::size_t n = entries.size();

  // Pathwise identities, all entries on the same paths.
  std::vector<std::string> labels;
  for (const auto& e : entries)
    for (const char* k : {"compat", "push", "stopped", "restricted"}) labels.push_back(e.label + "/" + k);
  EnsembleTable pw = c.run(labels, c.sc.pathwise_paths, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath path = c.path(spec, id);
    const double sigma = grid_stop_after_first_jump(path);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = entries[i].integrand;
      row[4 * i] = std::max(weak_strong_compatibility(r, spec, path, T).deviation(),
                            weak_strong_compatibility(r, spec, path, th).deviation());
      row[4 * i + 1] = pushforward_check(r, push, spec, path, T).deviation();
      row[4 * i + 2] = std::max(strong_stopped_check(r, spec, path, sigma, T).deviation(),
                                strong_stopped_check(r, spec, path, sigma, th).deviation());
      row[4 * i + 3] = strong_restriction_check(r, spec, path, s0, t0, f0, T).deviation();
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    const std::string pre = "strong/" + entries[i].label + "/";
    rep.checks.push_back(pathwise_check(pre + "weak-strong", "coordinatewise and direct strong integrals agree",
                                        max_of(pw.column(4 * i)), 1e-12, pw.paths()));
    rep.checks.push_back(pathwise_check(pre + "pushforward", "int S R dM = S int R dM", max_of(pw.column(4 * i + 1)),
                                        1e-10, pw.paths()));
    rep.checks.push_back(pathwise_check(pre + "stopped", "strong integral of 1_[0,sigma] R equals the stopped integral",
                                        max_of(pw.column(4 * i + 2)), 1e-10, pw.paths()));
    rep.checks.push_back(pathwise_check(pre + "restricted", "strong integral restricted to (s0,t0] x F0",
                                        max_of(pw.column(4 * i + 3)), 1e-10, pw.paths()));
  }

  // Factorization through a Hilbert level.
  std::vector<NoisePath> samples;
  for (std::uint64_t id = 0; id < 8; ++id) samples.push_back(c.path(spec, id));
  std::vector<const NoisePath*> sample_ptrs;
  for (const auto& p : samples) sample_ptrs.push_back(&p);
  for (const auto& e : entries) {
    const std::string pre = "strong/" + e.label + "/";
    const auto ptrs = e.deterministic ? std::vector<const NoisePath*>{} : sample_ptrs;
    const HsFactorization probe = factorize(e.integrand, spec, family, c.grid, ptrs, kInf, 4);
    const double budget = 0.5 * (probe.level_norms.front() + probe.level_norms.back());
    const HsFactorization f = factorize(e.integrand, spec, family, c.grid, ptrs, budget, 4);
    double increase = 0.0;
    for (std::size_t p = 1; p < f.level_norms.size(); ++p)
      increase = std::max(increase, f.level_norms[p] - f.level_norms[p - 1]);
    rep.checks.push_back(pathwise_check(pre + "factorization-reconstruction", "i'_p R~ reproduces R",
                                        f.reconstruction_error, 1e-12, ptrs.empty() ? 1 : ptrs.size()));
    rep.checks.push_back(pathwise_check(pre + "factorization-monotone", "HS norm is nonincreasing in the level",
                                        increase, 0.0, f.level_norms.size()));
    rep.checks.push_back(range_check(pre + "factorization-budget", "a level within budget exists",
                                     ptrs.empty() ? "quadrature" : "scheme", f.within_budget ? f.norm_squared : kInf,
                                     0.0, budget));
  }

  // p'-isometry, using the direct route.
  for (const auto& e : entries) {
    const std::string pre = "strong/" + e.label + "/";
    const bool det = static_cast<bool>(e.deterministic);
    EnsembleTable t = c.run({"norm_T", "norm_inc", "scheme_T", "scheme_inc"}, c.sc.paths,
                            [&](std::uint64_t id, std::span<double> row) {
                              const NoisePath path = c.path(spec, id);
                              const Vector it = integrate_strong_direct(e.integrand, spec, path, T).coeffs();
                              const Vector ih = integrate_strong_direct(e.integrand, spec, path, th).coeffs();
                              row[0] = it.cwiseAbs2().dot(inv_w);
                              row[1] = (it - ih).cwiseAbs2().dot(inv_w);
                              double st = 0.0, sh = 0.0;
                              if (!det) {
                                for (std::size_t k = 0; k < K; ++k) {
                                  const Instant r{c.grid->time(k), k, false};
                                  const History h = History::at(path, r);
                                  const double dens = hs_density(
                                      [&](const MarkView& m) { return e.integrand.eval(r, h, m); }, spec, family, level);
                                  st += c.grid->dt(k) * dens;
                                  if (k >= kh) sh += c.grid->dt(k) * dens;
                                }
                              }
                              row[2] = st;
                              row[3] = sh;
                            });
    if (!det) {
      std::vector<double> dt(t.paths()), dh(t.paths());
      for (std::size_t p = 0; p < t.paths(); ++p) {
        dt[p] = t.row(p)[0] - t.row(p)[2];
        dh[p] = t.row(p)[1] - t.row(p)[3];
      }
      rep.checks.push_back(statistical_check(pre + "isometry", "E p'(int R dM)^2 = ||R||^2_HS", "scheme", T,
                                             estimate(pre + "isometry", dt), 0.0));
      rep.checks.push_back(statistical_check(pre + "isometry-increment", "E p'(I_T - I_T/2)^2 = HS norm on (T/2,T]",
                                             "scheme", T, estimate(pre + "isometry-increment", dh), 0.0));
      continue;
    }
    const double q_t = strong_norm_quadrature(e.deterministic, spec, family, level, T, 1e-12);
    const double q_h = strong_norm_quadrature(e.deterministic, spec, family, level, th, 1e-12);
    double scheme_t = 0.0, scheme_h = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double s = std::sqrt(inv_w(static_cast<Eigen::Index>(j)));
      const Vector ej = Vector::Unit(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j));
      const SchemeOracle o(
          [&e, s, ej](double r, const MarkView& m) {
            return TestFunction(s * (e.deterministic(r, m).transpose() * ej));
          },
          spec, c.grid);
      scheme_t += o.scheme(0, K);
      scheme_h += o.scheme(kh, K);
    }
    rep.checks.push_back(statistical_check(pre + "isometry", "E p'(int R dM)^2 = ||R||^2_HS", "quadrature", T,
                                           t.estimate("norm_T"), q_t, scheme_t - q_t));
    rep.checks.push_back(statistical_check(pre + "isometry-increment", "E p'(I_T - I_T/2)^2 = HS norm on (T/2,T]",
                                           "quadrature", T, t.estimate("norm_inc"), q_t - q_h,
                                           scheme_h - (q_t - q_h)));
  }
}

// ------------------------------------------------------------- convolution

double effective_rate(const DiagonalSemigroup& s, std::size_t j) {
  return s.spectrum()(static_cast<Eigen::Index>(j)) - s.shift();
}

// int_0^t e^{-2 kappa r} dr
double decay_integral(double kappa, double t) { return kappa == 0.0 ? t : -std::expm1(-2.0 * kappa * t) / (2.0 * kappa); }

// sum_{m=1}^{k} dt e^{-2 kappa m dt}
double decay_sum(double kappa, double dt, std::size_t k) {
  if (kappa == 0.0) return dt * static_cast<double>(k);
  const double q = std::exp(-2.0 * kappa * dt);
  return dt * q * (-std::expm1(-2.0 * kappa * dt * static_cast<double>(k))) / (-std::expm1(-2.0 * kappa * dt));
}

void convolution_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim, K = c.K;
  const double T = c.T;
  const auto D = static_cast<Eigen::Index>(d);
  const DiagonalSemigroup S = c.sc.semigroup();
  const SeminormFamily family = c.sc.family();
  const unsigned level = c.sc.picard.norm_level;
  const Vector inv_w = family.weights(level).cwiseInverse();
  const MvmSpec wiener(c.spec.covariance(), LevyMeasure(d, {}));
  const std::string pre = "convolution/";
  const OperatorIntegrand ident = deterministic_operator(d, d, [D](double, const MarkView&) -> Matrix {
    return Matrix::Identity(D, D);
  });
  const OperatorIntegrand zero_op = deterministic_operator(d, d, [D](double, const MarkView&) -> Matrix {
    return Matrix::Zero(D, D);
  });
  const DiagonalSemigroup S_id = DiagonalSemigroup::from_tag("zero", d);
  const Coefficients additive = linear_coefficients(d, 0.0, DualVector::zero(d), Matrix::Identity(D, D), 0.0,
                                                    TestFunction::zero(d), c.spec);
  const MildSolver recursion(additive, S, c.spec, family, c.sc.picard, T, c.sc.seed);
  const Matrix zero_states = Matrix::Zero(D, static_cast<Eigen::Index>(K + 1));

  // Pathwise: strong route against the solver recursion.
  EnsembleTable pw = c.run({"recursion", "zero", "identity"}, c.sc.pathwise_paths,
                           [&](std::uint64_t id, std::span<double> row) {
                             const NoisePath path = c.path(c.spec, id);
                             const Matrix rec = recursion.apply_map(zero_states, DualVector::zero(d), path);
                             double dev = 0.0;
                             for (std::size_t k : {K / 2, K}) {
                               const double t = c.grid->time(k);
                               const Vector conv = stochastic_convolution(ident, S, c.spec, path, t).coeffs();
                               dev = std::max(dev, (conv - rec.col(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff());
                             }
                             row[0] = dev;
                             row[1] = stochastic_convolution(zero_op, S, c.spec, path, T).coeffs().cwiseAbs().maxCoeff();
                             row[2] = (stochastic_convolution(ident, S_id, c.spec, path, T).coeffs() -
                                       integrate_strong(ident, c.spec, path, T).coeffs())
                                          .cwiseAbs()
                                          .maxCoeff();
                           });
  rep.checks.push_back(pathwise_check(pre + "strong-vs-recursion",
                                      "int S(t-r)' F dM via the strong integral equals the solver recursion",
                                      max_of(pw.column(0)), 1e-10, pw.paths()));
  rep.checks.push_back(pathwise_check(pre + "zero-integrand", "F = 0 gives 0", max_of(pw.column(1)), 0.0, pw.paths()));
  rep.checks.push_back(pathwise_check(pre + "identity-semigroup", "S = I gives the plain strong integral",
                                      max_of(pw.column(2)), 1e-12, pw.paths()));

  // Deterministic convolution with constant drift.
  const Vector b = tf(d, {1.0, 0.5, -0.25, 2.0}).coeffs();
  const Coefficients drift_only = linear_coefficients(d, 0.0, DualVector(b), Matrix::Zero(D, D), 0.0,
                                                      TestFunction::zero(d), c.spec);
  double geo_dev = 0.0, closed_err = 0.0, closed_tol = 0.0, id_dev = 0.0;
  std::vector<double> errs;
  for (std::size_t steps : {K, K / 2}) {
    const auto g = c.sc.grid(steps);
    const Matrix states = Matrix::Zero(D, static_cast<Eigen::Index>(steps + 1));
    const Vector v = deterministic_convolution(drift_only, states, S, *g, T).coeffs();
    const double dt = T / static_cast<double>(steps);
    double err = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double kappa = effective_rate(S, j);
      const double bj = b(static_cast<Eigen::Index>(j));
      // sum_{m=1}^{K} dt e^{-kappa m dt}
      const double geo = kappa == 0.0 ? T
                                      : dt * std::exp(-kappa * dt) * (-std::expm1(-kappa * T)) / (-std::expm1(-kappa * dt));
      const double closed = kappa == 0.0 ? T : -std::expm1(-kappa * T) / kappa;
      geo_dev = std::max(geo_dev, std::abs(v(static_cast<Eigen::Index>(j)) - bj * geo) / std::max(1.0, std::abs(bj * geo)));
      err += std::abs(v(static_cast<Eigen::Index>(j)) - bj * closed);
      if (steps == K) {
        closed_err = std::max(closed_err, std::abs(v(static_cast<Eigen::Index>(j)) - bj * closed));
        closed_tol = std::max(closed_tol, std::abs(bj) * dt * (kappa == 0.0 ? 0.0 : -std::expm1(-kappa * T)));
      }
    }
    errs.push_back(err);
    if (steps == K)
      id_dev = (deterministic_convolution(drift_only, states, S_id, *g, T).coeffs() - T * b).cwiseAbs().maxCoeff();
  }
  rep.checks.push_back(pathwise_check(pre + "deterministic-geometric-sum",
                                      "left-point convolution equals its geometric sum", geo_dev, 1e-12, d));
  rep.checks.push_back(exact_check(pre + "deterministic-closed-form",
                                   "left-point convolution within one step of b_j (1 - e^{-lambda_j t}) / lambda_j",
                                   "closed-form", closed_err, 0.0, closed_tol));
  rep.checks.push_back(range_check(pre + "deterministic-order", "quadrature error halves with the step",
                                   "closed-form", errs[0] > 0.0 ? std::log2(errs[1] / errs[0]) : 1.0, 0.9, 1.1));
  rep.checks.push_back(exact_check(pre + "deterministic-identity-semigroup", "S = I and constant B give t b",
                                   "closed-form", id_dev, 0.0, 1e-12));

  // Second moments, Wiener-only.
  const Coefficients wiener_coeffs = linear_coefficients(d, 0.0, DualVector::zero(d), Matrix::Identity(D, D), 0.0,
                                                         TestFunction::zero(d), wiener);
  const MildSolver wsolver(wiener_coeffs, S, wiener, family, c.sc.picard, T, c.sc.seed);
  const std::size_t n_times = 8;
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < d; ++j) labels.push_back("conv_T_e" + std::to_string(j) + "^2");
  for (std::size_t i = 1; i <= n_times; ++i) labels.push_back("p'(conv_t" + std::to_string(i) + ")^2");
  EnsembleTable t = c.run(labels, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath path = c.path(wiener, id);
    const Matrix rec = wsolver.apply_map(zero_states, DualVector::zero(d), path);
    for (std::size_t j = 0; j < d; ++j) row[j] = rec(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(K)) *
                                                 rec(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(K));
    for (std::size_t i = 1; i <= n_times; ++i)
      row[d + i - 1] = rec.col(static_cast<Eigen::Index>(i * K / n_times)).cwiseAbs2().dot(inv_w);
  });
  const double dt = T / static_cast<double>(K);
  for (std::size_t j = 0; j < d; ++j) {
    const double kappa = effective_rate(S, j);
    const double qjj = wiener.covariance()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    const double cont = qjj * decay_integral(kappa, T);
    const double scheme = qjj * decay_sum(kappa, dt, K);
    rep.checks.push_back(statistical_check(pre + "second-moment/e" + std::to_string(j),
                                           "E conv_T[e_j]^2 = (1 - e^{-2 lambda_j T}) / (2 lambda_j)", "closed-form", T,
                                           t.estimate(j), cont, scheme - cont));
  }
  const SemigroupBound bound = certify_bound(S, family, level, c.grid->times());
  double sup_mc = 0.0, sup_iso = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 1; i <= n_times; ++i) {
    const double m = t.estimate(d + i - 1).mean;
    if (m > sup_mc) {
      sup_mc = m;
      arg = i;
    }
    const double ti = c.grid->time(i * K / n_times);
    double iso = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      iso += wiener.covariance()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) *
             decay_integral(effective_rate(S, j), ti) * inv_w(static_cast<Eigen::Index>(j));
    sup_iso = std::max(sup_iso, iso);
  }
  const double t_arg = c.grid->time(arg * K / n_times);
  double iso_arg = 0.0, scheme_arg = 0.0, hs_bound = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double qjj = wiener.covariance()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    const double w = inv_w(static_cast<Eigen::Index>(j));
    iso_arg += qjj * decay_integral(effective_rate(S, j), t_arg) * w;
    scheme_arg += qjj * decay_sum(effective_rate(S, j), dt, arg * K / n_times) * w;
    hs_bound += qjj * w;
  }
  hs_bound *= bound.M * bound.M * std::exp(2.0 * bound.theta * T) * T;
  const McEstimate at_arg = t.estimate(d + arg - 1);
  rep.checks.push_back(statistical_check(pre + "p-norm-isometry", "E p'(conv_t)^2 = int ||S(t-r)' F||_HS^2 dr",
                                         "closed-form", t_arg, at_arg, iso_arg, scheme_arg - iso_arg));
  rep.checks.push_back(bound_check(pre + "sup-bound", "sup_t E p'(conv_t)^2 <= M^2 e^{2 theta T} ||F||^2_HS T",
                                   "closed-form", t_arg, at_arg, hs_bound, std::max(0.0, scheme_arg - iso_arg)));
  rep.checks.push_back(range_check(pre + "sup-within-factor-2",
                                   "MC sup_t E p'(conv_t)^2 within a factor 2 of the isometry value", "closed-form",
                                   sup_mc / sup_iso, 0.5, 2.0));
}

// ------------------------------------------------------------------ solver

double residual_target(const Matrix& mean, const Coefficients& coeffs, const DiagonalSemigroup& S,
                       const TimeGrid& grid, const TestFunction& psi) {
  const Vector a_psi = generator_apply(S, psi).coeffs();
  double drift = 0.0;
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    const DualVector x(mean.col(static_cast<Eigen::Index>(i)));
    drift += grid.dt(i) * (x.coeffs().dot(a_psi) + pairing(coeffs.drift(grid.time(i), x), psi));
  }
  return mean.col(static_cast<Eigen::Index>(grid.steps())).dot(psi.coeffs()) - mean.col(0).dot(psi.coeffs()) - drift;
}

void residual_checks(const std::string& pre, const EnsembleTable& t, const std::vector<double>& targets,
                     std::size_t n_psi, double T, const std::string& source, VerificationReport& rep) {
  for (std::size_t i = 0; i < n_psi; ++i) {
    const std::string name = pre + "weak-residual/psi" + std::to_string(i);
    rep.checks.push_back(statistical_check(name + "/mean", "mean of the weak residual of the mild solution", source, T,
                                           t.estimate(i), targets[i]));
    const double r1 = column_rms(t, i), r2 = column_rms(t, n_psi + i), r4 = column_rms(t, 2 * n_psi + i);
    rep.checks.push_back(range_check(name + "/slope-fine", "residual RMS halves with the step (K/2 -> K)", "scheme",
                                     std::log2(r2 / r1), 0.7, 1.3));
    rep.checks.push_back(range_check(name + "/slope-coarse", "residual RMS halves with the step (K/4 -> K/2)",
                                     "scheme", std::log2(r4 / r2), 0.7, 1.3));
  }
}

void solver_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim, K = c.K;
  const double T = c.T;
  const auto D = static_cast<Eigen::Index>(d);
  const DiagonalSemigroup S = c.sc.semigroup();
  const SeminormFamily family = c.sc.family();
  const std::string pre = "solver/";
  const double dt = T / static_cast<double>(K);

  // Ornstein-Uhlenbeck benchmark.
  {
    const MvmSpec wiener(c.spec.covariance(), LevyMeasure(d, {}));
    const Coefficients ou = linear_coefficients(d, 0.0, DualVector::zero(d), Matrix::Identity(D, D), 0.0,
                                                TestFunction::zero(d), wiener);
    const MildSolver solver(ou, S, wiener, family, c.sc.picard, T, c.sc.seed);
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < d; ++j) labels.push_back("X_T[e" + std::to_string(j) + "]^2");
    labels.insert(labels.end(), {"X_T[e0]", "iterations"});
    EnsembleTable t = c.run(labels, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
      const SolutionPath sol = solver.solve(DualVector::zero(d), c.path(wiener, id));
      for (std::size_t j = 0; j < d; ++j) {
        const double x = sol.states(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(K));
        row[j] = x * x;
      }
      row[d] = sol.states(0, static_cast<Eigen::Index>(K));
      row[d + 1] = sol.iterations;
    });
    for (std::size_t j = 0; j < d; ++j) {
      const double kappa = effective_rate(S, j);
      const double qjj = wiener.covariance()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      const double cont = qjj * decay_integral(kappa, T), scheme = qjj * decay_sum(kappa, dt, K);
      rep.checks.push_back(statistical_check(pre + "ou/variance/e" + std::to_string(j),
                                             "Var X_T[e_j] = (1 - e^{-2 lambda_j T}) / (2 lambda_j)", "closed-form", T,
                                             t.estimate(j), cont, scheme - cont));
    }
    rep.checks.push_back(statistical_check(pre + "ou/mean/e0", "E X_T[e0] = 0", "closed-form", T, t.estimate(d), 0.0));
    rep.checks.push_back(range_check(pre + "ou/iterations", "Picard converges within 12 iterations at tol 1e-10",
                                     "exact", max_of(t.column(d + 1)), 1.0, 12.0));
  }

  // Scalar multiplicative benchmark dX = -lambda X dt + sigma X dW.
  {
    const double lambda = 1.0, sigma = 0.5, z0 = 1.0;
    const MvmSpec w1(Matrix::Identity(1, 1), LevyMeasure(1, {}));
    const Coefficients gou = linear_coefficients(1, 0.0, DualVector::zero(1), Matrix::Zero(1, 1), sigma,
                                                 TestFunction::basis(1, 0), w1);
    const MildSolver solver(gou, DiagonalSemigroup(Vector::Constant(1, lambda)), w1, SeminormFamily(1), c.sc.picard, T,
                            c.sc.seed);
    EnsembleTable t = c.run({"X_T", "X_T^2", "iterations"}, c.sc.paths, [&](std::uint64_t id, std::span<double> row) {
      const SolutionPath sol = solver.solve(DualVector(Vector::Constant(1, z0)), simulate_path(w1, c.grid, c.sc.seed, id, 5));
      const double x = sol.states(0, static_cast<Eigen::Index>(K));
      row[0] = x;
      row[1] = x * x;
      row[2] = sol.iterations;
    });
    const double mean = z0 * std::exp(-lambda * T);
    const double second = z0 * z0 * std::exp((sigma * sigma - 2.0 * lambda) * T);
    const double second_scheme = z0 * z0 * std::exp(-2.0 * lambda * T) * std::pow(1.0 + sigma * sigma * dt, static_cast<double>(K));
    rep.checks.push_back(statistical_check(pre + "gou/mean", "E X_T = Z0 e^{-lambda T}", "closed-form", T,
                                           t.estimate("X_T"), mean));
    rep.checks.push_back(statistical_check(pre + "gou/second-moment", "E X_T^2 = Z0^2 e^{(sigma^2 - 2 lambda) T}",
                                           "closed-form", T, t.estimate("X_T^2"), second, second_scheme - second));
    rep.checks.push_back(range_check(pre + "gou/iterations", "Picard converges within 12 iterations at tol 1e-10",
                                     "exact", max_of(t.column(2)), 1.0, 12.0));
  }

  // Contraction constants.
  {
    const ContractionReport ex = contraction_constants(1.0, 0.0, SemigroupBound{1.0, 0.0}, 1.0, 10.0);
    const double c1 = -std::expm1(-10.0) / 10.0;
    rep.checks.push_back(exact_check(pre + "constants/example-c1", "C1 for M=1, theta=0, a=1, b=0, T=1, damping 10",
                                     "closed-form", ex.c1, c1, 1e-15));
    rep.checks.push_back(exact_check(pre + "constants/example-combined", "C = sqrt(2 C1 + 2 C2)", "closed-form",
                                     ex.combined, std::sqrt(2.0 * c1), 1e-15));
    const MvmSpec w1(Matrix::Identity(1, 1), LevyMeasure(1, {}));
    const Coefficients unit = linear_coefficients(1, 1.0, DualVector::zero(1), Matrix::Zero(1, 1), 0.0,
                                                  TestFunction::zero(1), w1);
    const ContractionReport via = contraction_constants(unit, unit_ball_basis(SeminormFamily(1), 1), {1.0, 0.0}, 1.0, 10.0);
    rep.checks.push_back(exact_check(pre + "constants/example-from-coefficients",
                                     "C1 from the envelope of B(g) = g", "closed-form", via.c1, c1, 1e-13));
    rep.checks.push_back(exact_check(pre + "constants/zero-envelopes", "a = b = 0 gives C = 0", "closed-form",
                                     contraction_constants(0.0, 0.0, {1.0, 0.0}, 1.0, 3.0).combined, 0.0, 0.0));
    rep.checks.push_back(exact_check(pre + "constants/undamped", "damping 0 gives C1 = a_int T", "closed-form",
                                     contraction_constants(2.0, 0.0, {1.0, 0.0}, 1.5, 0.0).c1, 3.0, 1e-15));
  }

  // Scenario equation.
  const Coefficients coeffs = c.sc.coefficients(c.sc.equation, c.spec);
  const DualVector z0(c.sc.equation.z0);
  {
    PicardOptions fixed = c.sc.picard;
    fixed.min_iter = fixed.max_iter = 8;
    fixed.tol = kInf;
    fixed.record_profiles = true;
    const MildSolver solver(coeffs, S, c.spec, family, fixed, T, c.sc.seed);
    const MildSolver converging(coeffs, S, c.spec, family, c.sc.picard, T, c.sc.seed);
    const std::size_t n_it = fixed.max_iter;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n_it; ++i)
      for (std::size_t k = 0; k <= K; ++k) labels.push_back("profile" + std::to_string(i) + "_" + std::to_string(k));
    labels.insert(labels.end(), {"fixed-point", "iterations"});
    EnsembleTable t = c.run(labels, c.sc.pathwise_paths, [&](std::uint64_t id, std::span<double> row) {
      const NoisePath path = c.path(c.spec, id);
      const SolutionPath sol = solver.solve(z0, path);
      for (std::size_t i = 0; i < n_it; ++i)
        for (std::size_t k = 0; k <= K; ++k) row[i * (K + 1) + k] = sol.profiles[i](static_cast<Eigen::Index>(k));
      const SolutionPath conv = converging.solve(z0, path);
      row[n_it * (K + 1)] = converging.distance(converging.apply_map(conv.states, z0, path), conv.states, path.grid());
      row[n_it * (K + 1) + 1] = conv.iterations;
    });
    const double upsilon = solver.damping();
    std::vector<double> norms(n_it, 0.0);
    for (std::size_t i = 0; i < n_it; ++i)
      for (std::size_t k = 0; k <= K; ++k)
        norms[i] = std::max(norms[i], std::exp(-upsilon * c.grid->time(k)) * t.estimate(i * (K + 1) + k).mean);
    const double C = solver.contraction().combined;
    for (std::size_t i = 2; i < n_it; ++i) {
      if (norms[i - 1] < 1e-28) continue;  // below double precision
      rep.checks.push_back(range_check(pre + "picard-ratio/" + std::to_string(i + 1),
                                       "||X^{k+1} - X^k|| / ||X^k - X^{k-1}|| <= C + 0.1 in the MC norm", "exact",
                                       std::sqrt(norms[i] / norms[i - 1]), 0.0, C + 0.1));
    }
    rep.checks.push_back(range_check(pre + "contraction-constant", "auto damping reaches C < 1", "exact", C, 0.0,
                                     1.0 - 1e-12));
    rep.checks.push_back(pathwise_check(pre + "fixed-point-residual", "||X - A(X)|| below tol after convergence",
                                        max_of(t.column(n_it * (K + 1))), c.sc.picard.tol, t.paths()));
    rep.checks.push_back(range_check(pre + "scenario/iterations", "Picard converges within max_iter", "exact",
                                     max_of(t.column(n_it * (K + 1) + 1)), 1.0, c.sc.picard.max_iter));
  }

  // Weak residual of the mild solution under grid halving.
  {
    const MildSolver solver(coeffs, S, c.spec, family, c.sc.picard, T, c.sc.seed);
    const auto psis = residual_test_functions(d);
    const std::size_t np = psis.size();
    std::vector<std::string> labels;
    for (std::size_t f : {1, 2, 4})
      for (std::size_t i = 0; i < np; ++i) labels.push_back("res_K/" + std::to_string(f) + "_psi" + std::to_string(i));
    EnsembleTable t = c.run(labels, c.sc.residual_paths, [&](std::uint64_t id, std::span<double> row) {
      const NoisePath fine = c.path(c.spec, id);
      std::size_t g = 0;
      for (std::size_t f : {1, 2, 4}) {
        const NoisePath path = f == 1 ? fine : fine.coarsen(f);
        const SolutionPath sol = solver.solve(z0, path);
        for (std::size_t i = 0; i < np; ++i)
          row[g * np + i] = weak_residual(sol.states, coeffs, S, c.spec, path, psis[i], T);
        ++g;
      }
    });
    const Matrix mean = mean_flow(coeffs, S, c.spec, z0, *c.grid);
    std::vector<double> targets;
    for (const auto& psi : psis) targets.push_back(residual_target(mean, coeffs, S, *c.grid, psi));
    residual_checks(pre, t, targets, np, T, "scheme", rep);
  }
}

// -------------------------------------------------------------- levy-patch

void levy_suite(const Context& c, VerificationReport& rep) {
  const std::size_t d = c.sc.dim;
  const double T = c.T;
  const DiagonalSemigroup S = c.sc.semigroup();
  const SeminormFamily family = c.sc.family();
  const LevyTriplet triplet = c.sc.levy_triplet();
  const NestedDomains balls{family, c.sc.levy.ball_levels};
  const Coefficients coeffs = c.sc.coefficients(c.sc.levy.equation, triplet.noise);
  const DualVector z0(c.sc.levy.equation.z0);
  PicardOptions opts = c.sc.picard;
  opts.tol = std::min(opts.tol, 1e-28);
  opts.max_iter = std::max(opts.max_iter, 100u);
  const LevySolver solver(coeffs, S, triplet, balls, family, opts, T, c.sc.seed);
  PicardOptions full = opts;
  full.min_iter = std::max(full.min_iter, 25u);
  const LevySolver coupled(coeffs, S, triplet, balls, family, full, T, c.sc.seed);
  const std::size_t N = solver.domains().size();
  const AtomMask small = solver.domains().front();
  const std::string pre = "levy-patch/";

  EnsembleTable t = c.run({"coupling", "escaped", "tau1<T", "tau_last_used"}, c.sc.pathwise_paths,
                          [&](std::uint64_t id, std::span<double> row) {
                            const LevySolution sol = coupled.solve(z0, c.path(triplet.noise, id));
                            row[0] = sol.coupling_deviation;
                            row[1] = sol.escaped ? 1.0 : 0.0;
                            row[2] = sol.stopping_times.front() <= T ? 1.0 : 0.0;
                            std::size_t used = 0;
                            for (std::size_t n = 0; n < N; ++n)
                              if (sol.stopping_times[n] <= T) used = n + 1;
                            row[3] = static_cast<double>(used);
                          });
  rep.checks.push_back(pathwise_check(pre + "coupling", "X^(n) = X^(m) on t <= tau_m for all m < n",
                                      max_of(t.column(0)), 1e-8, t.paths()));
  rep.checks.push_back(pathwise_check(pre + "escaped", "no jump leaves the largest domain before T",
                                      max_of(t.column(1)), 0.0, t.paths()));
  rep.checks.push_back(range_check(pre + "localization-exercised", "fraction of paths with tau_1 <= T", "exact",
                                   t.estimate("tau1<T").mean, 1.0 / static_cast<double>(t.paths()), 1.0));
  rep.checks.push_back(range_check(pre + "levels-exercised", "deepest level needed on some path", "exact",
                                   max_of(t.column(3)), N > 1 ? static_cast<double>(N - 1) : 0.0,
                                   static_cast<double>(N)));

  const auto psis = residual_test_functions(d);
  const std::size_t np = psis.size();
  std::vector<std::string> labels;
  for (std::size_t f : {1, 2, 4})
    for (std::size_t i = 0; i < np; ++i) labels.push_back("res_K/" + std::to_string(f) + "_psi" + std::to_string(i));
  EnsembleTable r = c.run(labels, c.sc.residual_paths, [&](std::uint64_t id, std::span<double> row) {
    const NoisePath fine = c.path(triplet.noise, id);
    std::size_t g = 0;
    for (std::size_t f : {1, 2, 4}) {
      const NoisePath path = f == 1 ? fine : fine.coarsen(f);
      const LevySolution sol = solver.solve(z0, path);
      for (std::size_t i = 0; i < np; ++i)
        row[g * np + i] = levy_weak_residual(sol.patched, coeffs, S, triplet, small, path, psis[i], T);
      ++g;
    }
  });
  residual_checks(pre, r, std::vector<double>(np, 0.0), np, T, "symmetry", rep);
}

using SuiteFn = void (*)(const Context&, VerificationReport&);

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> r{
      {"isometry", isometry_suite}, {"mvm-axioms", mvm_axioms_suite}, {"fubini", fubini_suite},
      {"strong", strong_suite},     {"convolution", convolution_suite}, {"solver", solver_suite},
      {"levy-patch", levy_suite}};
  return r;
}

}  // namespace

SchemeOracle::SchemeOracle(Fn f, MvmSpec spec, std::shared_ptr<const TimeGrid> grid)
    : f_(std::move(f)), spec_(std::move(spec)), grid_(std::move(grid)) {}

double SchemeOracle::wiener_density(double r) const {
  if (!spec_.has_wiener()) return 0.0;
  const TestFunction v = f_(r, MarkView::wiener_mark());
  return spec_.wiener_form(v, v);
}

double SchemeOracle::jump_value(std::size_t atom, double r) const {
  const auto& u = spec_.levy().atom(atom).point;
  return pairing(u, f_(r, MarkView{atom, &u}));
}

double SchemeOracle::jump_density(double r) const {
  double s = 0.0;
  for (std::size_t a = 0; a < spec_.levy().size(); ++a)
    if (spec_.in_domain(a)) {
      const double v = jump_value(a, r);
      s += spec_.levy().atom(a).rate * v * v;
    }
  return s;
}

double SchemeOracle::norm(double a, double b) const {
  return integrate_adaptive([this](double r) { return wiener_density(r) + jump_density(r); }, a, b, 1e-13, 64);
}

double SchemeOracle::wiener_sum(std::size_t k0, std::size_t k1) const {
  double s = 0.0;
  for (std::size_t k = k0; k < k1; ++k) s += grid_->dt(k) * wiener_density(grid_->time(k));
  return s;
}

double SchemeOracle::mismatch(std::size_t k0, std::size_t k1) const {
  double m = 0.0;
  for (std::size_t a = 0; a < spec_.levy().size(); ++a) {
    if (!spec_.in_domain(a)) continue;
    double left = 0.0;
    for (std::size_t k = k0; k < k1; ++k) left += grid_->dt(k) * jump_value(a, grid_->time(k));
    const double exact =
        integrate_adaptive([this, a](double r) { return jump_value(a, r); }, grid_->time(k0), grid_->time(k1), 1e-14, 64);
    m += spec_.levy().atom(a).rate * (exact - left);
  }
  return m;
}

double SchemeOracle::scheme(std::size_t k0, std::size_t k1) const {
  const double jumps =
      integrate_adaptive([this](double r) { return jump_density(r); }, grid_->time(k0), grid_->time(k1), 1e-13, 64);
  const double m = mismatch(k0, k1);
  return wiener_sum(k0, k1) + jumps + m * m;
}

Matrix mean_flow(const Coefficients& coeffs, const DiagonalSemigroup& semigroup, const MvmSpec& spec,
                 const DualVector& z0, const TimeGrid& grid) {
  const auto d = static_cast<Eigen::Index>(coeffs.dim_psi);
  const auto& levy = spec.levy();
  Matrix m(d, static_cast<Eigen::Index>(grid.steps() + 1));
  m.col(0) = z0.coeffs();
  const Vector kappa = (semigroup.spectrum().array() - semigroup.shift()).matrix();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k), dt = grid.dt(k);
    const DualVector g(m.col(static_cast<Eigen::Index>(k)));
    Vector inner = g.coeffs() + dt * coeffs.drift(t, g).coeffs();
    Vector jumps = Vector::Zero(d);
    for (std::size_t a = 0; a < levy.size(); ++a) {
      if (!spec.in_domain(a)) continue;
      const Vector fu = levy.atom(a).rate * apply_noise(coeffs, t, MarkView{a, &levy.atom(a).point}, g, levy.atom(a).point.coeffs());
      inner -= dt * fu;
      for (Eigen::Index j = 0; j < d; ++j)
        jumps(j) += fu(j) * (kappa(j) == 0.0 ? dt : -std::expm1(-kappa(j) * dt) / kappa(j));
    }
    m.col(static_cast<Eigen::Index>(k + 1)) = semigroup.factors(dt).cwiseProduct(inner) + jumps;
  }
  return m;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

bool is_suite(const std::string& name) {
  if (name == "all" || name == "empty") return true;
  for (const auto& n : suite_names())
    if (n == name) return true;
  return false;
}

VerificationReport run_suite(const Scenario& scenario, const std::string& name, const ExecutionConfig& exec) {
  if (!is_suite(name)) throw std::invalid_argument("unknown suite '" + name + "'");
  VerificationReport rep;
  rep.suite = name;
  rep.seed = scenario.seed;
  rep.paths = scenario.paths;
  rep.steps = scenario.steps;
  if (name == "empty") return rep;
  if (scenario.steps % 4 != 0) throw ConfigError("/grid/steps", "verification suites need a multiple of 4 steps");
  const Context ctx{scenario, exec, scenario.spec(), scenario.grid(), scenario.horizon, scenario.steps};
  for (const auto& [n, fn] : registry())
    if (name == "all" || name == n) fn(ctx, rep);
  return rep;
}

}  // namespace nucspde
