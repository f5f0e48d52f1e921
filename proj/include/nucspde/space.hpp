#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace nucspde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct TestTag {};
struct DualTag {};

// Coordinates in the canonical basis e_0..e_{d-1}. The tag keeps test
// functions and dual vectors from being mixed up at compile time.
template <class Tag>
class Coordinates {
 public:
  Coordinates() = default;
  explicit Coordinates(Vector coeffs) : c_(std::move(coeffs)) {
    if (!c_.allFinite()) throw DomainError("coordinates must be finite");
  }

  static Coordinates zero(std::size_t d) { return Coordinates(Vector::Zero(static_cast<Eigen::Index>(d))); }
  static Coordinates basis(std::size_t d, std::size_t j) {
    if (j >= d) throw DimensionError("basis index out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
    v(static_cast<Eigen::Index>(j)) = 1.0;
    return Coordinates(std::move(v));
  }

  std::size_t dim() const { return static_cast<std::size_t>(c_.size()); }
  const Vector& coeffs() const { return c_; }
  double operator[](std::size_t j) const { return c_(static_cast<Eigen::Index>(j)); }

  Coordinates& operator+=(const Coordinates& o) {
    check_same(o);
    c_ += o.c_;
    return *this;
  }
  Coordinates& operator-=(const Coordinates& o) {
    check_same(o);
    c_ -= o.c_;
    return *this;
  }
  Coordinates& operator*=(double a) {
    c_ *= a;
    return *this;
  }
  friend Coordinates operator+(Coordinates a, const Coordinates& b) { return a += b; }
  friend Coordinates operator-(Coordinates a, const Coordinates& b) { return a -= b; }
  friend Coordinates operator*(double a, Coordinates v) { return v *= a; }
  friend bool operator==(const Coordinates& a, const Coordinates& b) {
    return a.c_.size() == b.c_.size() && (a.c_.array() == b.c_.array()).all();
  }

 private:
  void check_same(const Coordinates& o) const {
    if (o.c_.size() != c_.size()) throw DimensionError("dimension mismatch");
  }
  Vector c_;
};

using TestFunction = Coordinates<TestTag>;
using DualVector = Coordinates<DualTag>;

double pairing(const DualVector& f, const TestFunction& phi);

// Hilbertian seminorms p_n(phi)^2 = sum_j w_j(n) phi_j^2 on R^d.
class SeminormFamily {
 public:
  using WeightRule = std::function<double(unsigned level, std::size_t j)>;

  explicit SeminormFamily(std::size_t dim, double exponent = 2.0);
  SeminormFamily(std::size_t dim, WeightRule rule);

  std::size_t dim() const { return dim_; }
  double weight(unsigned level, std::size_t j) const;
  Vector weights(unsigned level) const;

  // Throws DomainError unless w_j(n) <= w_j(n+1) for all n < max_level.
  void check_monotone(unsigned max_level) const;

  // e_j / sqrt(w_j(n)), the p_n-orthonormal basis.
  TestFunction orthonormal_basis(unsigned level, std::size_t j) const;

 private:
  std::size_t dim_;
  WeightRule rule_;
};

double seminorm(const SeminormFamily& family, unsigned level, const TestFunction& phi);
double dual_seminorm(const SeminormFamily& family, unsigned level, const DualVector& f);
double hs_embedding_norm(const SeminormFamily& family, unsigned level);

// q_{r,0} is the Wiener quadratic form, q_{r,u}(phi) = |u[phi]| for a jump u.
class JumpSeminormFamily {
 public:
  explicit JumpSeminormFamily(Matrix q);

  std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
  const Matrix& covariance() const { return q_; }

  // jump == nullptr selects the Wiener mark.
  double bilinear(const DualVector* jump, const TestFunction& phi, const TestFunction& vphi) const;
  double value(const DualVector* jump, const TestFunction& phi) const;

 private:
  Matrix q_;
};

// Validates a symmetric positive semidefinite matrix and returns a square root.
Matrix psd_sqrt(const Matrix& q, const std::string& what);

}  // namespace nucspde
