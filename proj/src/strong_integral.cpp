#include "nucspde/strong_integral.hpp"

#include "nucspde/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace nucspde {

namespace {

Matrix checked(Matrix m, const OperatorIntegrand& r) {
  if (static_cast<std::size_t>(m.rows()) != r.rows || static_cast<std::size_t>(m.cols()) != r.cols)
    throw DimensionError("operator integrand returned a matrix of the wrong shape");
  return m;
}

}  // namespace

OperatorIntegrand deterministic_operator(std::size_t rows, std::size_t cols,
                                         std::function<Matrix(double, const MarkView&)> f) {
  return {[f = std::move(f)](const Instant& r, const History&, const MarkView& m) { return f(r.time, m); },
          MomentClass::square, rows, cols};
}

OperatorIntegrand compose(const Matrix& s, const OperatorIntegrand& r) {
  if (static_cast<std::size_t>(s.cols()) != r.rows) throw DimensionError("compose: inner dimension mismatch");
  return {[s, r](const Instant& i, const History& h, const MarkView& m) -> Matrix { return s * r.eval(i, h, m); },
          r.moment, static_cast<std::size_t>(s.rows()), r.cols};
}

OperatorIntegrand stopped(const OperatorIntegrand& r, double sigma) {
  return {[r, sigma](const Instant& i, const History& h, const MarkView& m) -> Matrix {
            if (!up_to(i, sigma)) return Matrix::Zero(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(r.cols));
            return r.eval(i, h, m);
          },
          r.moment, r.rows, r.cols};
}

OperatorIntegrand restricted(const OperatorIntegrand& r, double s0, double t0, Event f0) {
  return {[r, s0, t0, f0 = std::move(f0)](const Instant& i, const History& h, const MarkView& m) -> Matrix {
            if (!in_interval(i, s0, t0) || (f0 && !f0(h.truncated_to(s0))))
              return Matrix::Zero(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(r.cols));
            return r.eval(i, h, m);
          },
          r.moment, r.rows, r.cols};
}

OperatorIntegrand linear_combination(std::vector<std::pair<double, OperatorIntegrand>> terms) {
  if (terms.empty()) throw DomainError("empty operator combination");
  const std::size_t rows = terms.front().second.rows, cols = terms.front().second.cols;
  MomentClass moment = MomentClass::square;
  for (const auto& t : terms) {
    if (t.second.rows != rows || t.second.cols != cols) throw DimensionError("operator combination shape mismatch");
    if (t.second.moment == MomentClass::local) moment = MomentClass::local;
  }
  return {[terms = std::move(terms), rows, cols](const Instant& i, const History& h, const MarkView& m) -> Matrix {
            Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            for (const auto& [w, r] : terms) acc += w * r.eval(i, h, m);
            return acc;
          },
          moment, rows, cols};
}

WeakIntegrand transpose_apply(const OperatorIntegrand& r, const TestFunction& psi) {
  if (psi.dim() != r.rows) throw DimensionError("transpose_apply: dimension mismatch");
  return {[r, psi](const Instant& i, const History& h, const MarkView& m) {
            return TestFunction(checked(r.eval(i, h, m), r).transpose() * psi.coeffs());
          },
          r.moment};
}

StrongIntegralPath integrate_strong_path(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path) {
  if (r.cols != spec.dim()) throw DimensionError("integrate_strong: operator columns differ from noise dimension");
  const std::size_t K = path.grid().steps();
  Matrix coords(static_cast<Eigen::Index>(r.rows), static_cast<Eigen::Index>(K + 1));
  for (std::size_t j = 0; j < r.rows; ++j) {
    const WeakIntegralPath wp = integrate_path(transpose_apply(r, TestFunction::basis(r.rows, j)), spec, path);
    for (std::size_t k = 0; k <= K; ++k) coords(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = wp.values[k];
  }
  StrongIntegralPath out;
  out.values.reserve(K + 1);
  for (std::size_t k = 0; k <= K; ++k) out.values.emplace_back(coords.col(static_cast<Eigen::Index>(k)));
  return out;
}

DualVector integrate_strong(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path, double t) {
  if (r.cols != spec.dim()) throw DimensionError("integrate_strong: operator columns differ from noise dimension");
  const std::size_t kt = path.grid().require_index(t);
  Vector v(static_cast<Eigen::Index>(r.rows));
  for (std::size_t j = 0; j < r.rows; ++j)
    v(static_cast<Eigen::Index>(j)) =
        integrate_path_observed(transpose_apply(r, TestFunction::basis(r.rows, j)), spec, path, path, 0, kt).values[kt];
  return DualVector(std::move(v));
}

DualVector integrate_strong_direct(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path, double t) {
  if (r.cols != spec.dim()) throw DimensionError("integrate_strong: operator columns differ from noise dimension");
  const TimeGrid& grid = path.grid();
  const std::size_t kt = grid.require_index(t);
  const auto& levy = spec.levy();
  Vector acc = Vector::Zero(static_cast<Eigen::Index>(r.rows));
  for (std::size_t k = 0; k < kt; ++k) {
    const Instant i{grid.time(k), k, false};
    const History h = History::at(path, i);
    if (spec.has_wiener()) acc += checked(r.eval(i, h, MarkView::wiener_mark()), r) * path.increment(k);
    Vector comp = Vector::Zero(static_cast<Eigen::Index>(r.rows));
    for (std::size_t a = 0; a < levy.size(); ++a)
      if (spec.in_domain(a))
        comp += levy.atom(a).rate * (checked(r.eval(i, h, MarkView{a, &levy.atom(a).point}), r) * levy.atom(a).point.coeffs());
    acc -= grid.dt(k) * comp;
    for (const Jump& j : path.jumps_in(grid.time(k), grid.time(k + 1))) {
      if (!spec.in_domain(j.atom)) continue;
      const Instant ij{j.time, k, true};
      acc += checked(r.eval(ij, History::at(path, ij), MarkView{j.atom, &levy.atom(j.atom).point}), r) *
             levy.atom(j.atom).point.coeffs();
    }
  }
  return DualVector(std::move(acc));
}

double hs_norm_squared(const Matrix& r, const MvmSpec& spec, const MarkView& mark, const SeminormFamily& family,
                       unsigned level) {
  if (static_cast<std::size_t>(r.rows()) != family.dim() || static_cast<std::size_t>(r.cols()) != spec.dim())
    throw DimensionError("hs_norm_squared: shape mismatch");
  const Vector w = family.weights(level);
  if (mark.wiener()) return ((r * spec.covariance() * r.transpose()).diagonal().array() / w.array()).sum();
  const Vector ru = r * mark.point->coeffs();
  return (ru.array().square() / w.array()).sum();
}

double hs_density(const std::function<Matrix(const MarkView&)>& r_at, const MvmSpec& spec,
                  const SeminormFamily& family, unsigned level) {
  double total = 0.0;
  if (spec.has_wiener()) total += hs_norm_squared(r_at(MarkView::wiener_mark()), spec, MarkView::wiener_mark(), family, level);
  const auto& levy = spec.levy();
  for (std::size_t a = 0; a < levy.size(); ++a) {
    if (!spec.in_domain(a)) continue;
    const MarkView m{a, &levy.atom(a).point};
    total += levy.atom(a).rate * hs_norm_squared(r_at(m), spec, m, family, level);
  }
  return total;
}

double strong_norm_quadrature(const std::function<Matrix(double, const MarkView&)>& r, const MvmSpec& spec,
                              const SeminormFamily& family, unsigned level, double t, double tol) {
  auto density = [&](double s) {
    return hs_density([&](const MarkView& m) { return r(s, m); }, spec, family, level);
  };
  return integrate_adaptive(density, 0.0, t, tol, 16);
}

HsFactorization factorize(const OperatorIntegrand& r, const MvmSpec& spec, const SeminormFamily& family,
                          std::shared_ptr<const TimeGrid> grid, const std::vector<const NoisePath*>& samples,
                          double budget, unsigned max_level) {
  if (r.rows != family.dim() || r.cols != spec.dim()) throw DimensionError("factorize: shape mismatch");
  const NoisePath zero_path(grid, Matrix::Zero(static_cast<Eigen::Index>(spec.dim()), static_cast<Eigen::Index>(grid->steps() + 1)),
                            {}, 0, 0);
  std::vector<const NoisePath*> paths = samples;
  const bool deterministic = paths.empty();
  if (deterministic) paths.push_back(&zero_path);

  auto norm_at = [&](unsigned p) {
    if (deterministic) {
      auto f = [&](double s, const MarkView& m) {
        const Instant i{s, grid->floor_index(s), false};
        return checked(r.eval(i, History::at(zero_path, i), m), r);
      };
      return strong_norm_quadrature(f, spec, family, p, grid->horizon(), 1e-12);
    }
    double sum = 0.0;
    for (const NoisePath* path : paths) {
      for (std::size_t k = 0; k < grid->steps(); ++k) {
        const Instant i{grid->time(k), k, false};
        const History h = History::at(*path, i);
        sum += grid->dt(k) * hs_density([&](const MarkView& m) { return checked(r.eval(i, h, m), r); }, spec, family, p);
      }
    }
    return sum / static_cast<double>(paths.size());
  };

  HsFactorization out;
  bool found = false;
  for (unsigned p = 0; p <= max_level; ++p) {
    out.level_norms.push_back(norm_at(p));
    if (!found && out.level_norms.back() <= budget) {
      found = true;
      out.level = p;
      out.norm_squared = out.level_norms.back();
    }
  }
  out.within_budget = found;
  if (!found) {
    out.level = max_level;
    out.norm_squared = out.level_norms.back();
  }

  const Vector inv_sqrt_w = family.weights(out.level).cwiseSqrt().cwiseInverse();
  const Vector sqrt_w = family.weights(out.level).cwiseSqrt();
  out.factor = {[r, inv_sqrt_w](const Instant& i, const History& h, const MarkView& m) -> Matrix {
                  return inv_sqrt_w.asDiagonal() * r.eval(i, h, m);
                },
                r.moment, r.rows, r.cols};

  const auto& levy = spec.levy();
  for (const NoisePath* path : paths)
    for (std::size_t k = 0; k < grid->steps(); ++k) {
      const Instant i{grid->time(k), k, false};
      const History h = History::at(*path, i);
      for (std::size_t a = 0; a <= levy.size(); ++a) {
        const MarkView m = a == levy.size() ? MarkView::wiener_mark() : MarkView{a, &levy.atom(a).point};
        const Matrix diff = sqrt_w.asDiagonal() * out.factor.eval(i, h, m) - r.eval(i, h, m);
        out.reconstruction_error = std::max(out.reconstruction_error, diff.cwiseAbs().maxCoeff());
      }
    }
  return out;
}

VectorComparison weak_strong_compatibility(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                           double t) {
  return {integrate_strong(r, spec, path, t), integrate_strong_direct(r, spec, path, t)};
}

VectorComparison pushforward_check(const OperatorIntegrand& r, const Matrix& s, const MvmSpec& spec,
                                   const NoisePath& path, double t) {
  return {integrate_strong(compose(s, r), spec, path, t), DualVector(s * integrate_strong(r, spec, path, t).coeffs())};
}

VectorComparison strong_stopped_check(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                      double sigma, double t) {
  return {integrate_strong(stopped(r, sigma), spec, path, t), integrate_strong(r, spec, path, std::min(t, sigma))};
}

VectorComparison strong_restriction_check(const OperatorIntegrand& r, const MvmSpec& spec, const NoisePath& path,
                                          double s0, double t0, const Event& f0, double t) {
  DualVector lhs = integrate_strong(restricted(r, s0, t0, f0), spec, path, t);
  if (f0 && !f0(History(path, s0))) return {lhs, DualVector::zero(r.rows)};
  return {lhs, integrate_strong(r, spec, path, std::min(t, t0)) - integrate_strong(r, spec, path, std::min(t, s0))};
}

}  // namespace nucspde
