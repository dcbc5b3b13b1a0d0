/*
 * Copyright (C) 2026 The geosens authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOSENS_MANIFOLD_BACKENDS_HPP
#define GEOSENS_MANIFOLD_BACKENDS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "../error.hpp"
#include "../rng.hpp"
#include "spd.hpp"
#include "types.hpp"

/// Typed manifold backends used on the estimator hot path.
///
/// Every backend exposes the same surface:
///   Point                     storage type for one output point
///   Ball                      precomputed closed geodesic ball B_pq
///   check(ManifoldPoint)      invariant check, nullopt when valid
///   load / store              conversion from/to ManifoldPoint
///   distance, midpoint        Riemannian distance and geodesic midpoint
///   ball(p, q), contains      ball of diameter pq and membership
///   equal, hash               exact value identity (for sample compression)
///
/// `contains(ball(p, q), t)` is the single definition of ball membership; the
/// dynamic API, the estimators and the oracles all go through it.
namespace geosens::backend {

inline constexpr double kUnitNormTolerance = 1e-9;
inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kSurfaceTolerance = 1e-9;
inline constexpr double kAntipodalThreshold = 1e-9;

inline std::size_t hash_doubles(const double* data, std::size_t n) {
  std::uint64_t h = 0x243F6A8885A308D3ull ^ n;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = data[i] + 0.0; // folds -0.0 onto 0.0
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return static_cast<std::size_t>(h);
}

inline std::string kind_mismatch(const char* expected) {
  return std::string("point is not a ") + expected;
}

// --- real line --------------------------------------------------------------

class RealLine {
public:
  using Point = double;
  /// [min(p,q), max(p,q)] widened by the tolerance.
  struct Ball {
    double lo;
    double hi;
  };

  explicit RealLine(double tolerance = kDefaultBallTolerance) : tol_(tolerance) {}

  double tolerance() const { return tol_; }

  std::optional<std::string> check(const ManifoldPoint& p) const {
    const auto* s = std::get_if<Scalar>(&p);
    if (!s) return kind_mismatch("Scalar");
    if (!std::isfinite(s->value)) return "scalar is not finite";
    return std::nullopt;
  }

  Point load(const ManifoldPoint& p) const {
    if (auto err = check(p)) fail(ErrorCode::InvalidPoint, *err);
    return std::get<Scalar>(p).value;
  }
  ManifoldPoint store(Point p) const { return Scalar{p}; }

  double distance(Point p, Point q) const { return std::abs(p - q); }
  Point midpoint(Point p, Point q) const { return 0.5 * p + 0.5 * q; }

  Ball ball(Point p, Point q) const { return {std::min(p, q) - tol_, std::max(p, q) + tol_}; }
  bool contains(const Ball& b, Point t) const { return b.lo <= t && t <= b.hi; }

  bool equal(Point a, Point b) const { return a == b; }
  std::size_t hash(Point a) const { return hash_doubles(&a, 1); }

private:
  double tol_;
};

// --- unit sphere S^{d-1} in R^d ---------------------------------------------

template <int Dim>
class Sphere {
public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  struct Ball {
    Point center;
    double radius;
    double cos_inner; // <t, center> above this: inside
    double cos_outer; // <t, center> below this: outside
  };

  explicit Sphere(int dim, double tolerance = kDefaultBallTolerance) : dim_(dim), tol_(tolerance) {}

  double tolerance() const { return tol_; }
  int dim() const { return dim_; }

  std::optional<std::string> check(const ManifoldPoint& p) const {
    const auto* u = std::get_if<UnitVector>(&p);
    if (!u) return kind_mismatch("UnitVector");
    if (u->coords.size() != dim_) return "unit vector has wrong dimension";
    if (dim_ < 2) return "sphere needs embedding dimension >= 2";
    if (!u->coords.allFinite()) return "unit vector is not finite";
    if (std::abs(u->coords.norm() - 1.0) > kUnitNormTolerance) return "unit vector norm differs from 1";
    return std::nullopt;
  }

  Point load(const ManifoldPoint& p) const {
    if (auto err = check(p)) fail(ErrorCode::InvalidPoint, *err);
    return std::get<UnitVector>(p).coords;
  }
  ManifoldPoint store(const Point& p) const { return UnitVector{Eigen::VectorXd(p)}; }

  /// Great-circle distance, 2 atan2(|p - q|, |p + q|) (equal to arccos<p,q>
  /// but accurate for nearby and nearly antipodal points).
  double distance(const Point& p, const Point& q) const {
    return 2.0 * std::atan2((p - q).norm(), (p + q).norm());
  }

  Point midpoint(const Point& p, const Point& q) const {
    require_not_antipodal(p, q);
    return (p + q).normalized();
  }

  Ball ball(const Point& p, const Point& q) const {
    require_not_antipodal(p, q);
    const double radius = 0.5 * distance(p, q);
    const double c = std::cos(std::min(radius + tol_, kPi));
    return {(p + q).normalized(), radius, c + kCosMargin, c - kCosMargin};
  }

  /// The angular test decides; the cosine comparison only short-cuts points
  /// clearly away from the boundary.
  bool contains(const Ball& b, const Point& t) const {
    const double dot = t.dot(b.center);
    if (dot > b.cos_inner) return true;
    if (dot < b.cos_outer) return false;
    return distance(t, b.center) <= b.radius + tol_;
  }

  bool equal(const Point& a, const Point& b) const { return a == b; }
  std::size_t hash(const Point& a) const {
    return hash_doubles(a.data(), static_cast<std::size_t>(a.size()));
  }

private:
  static constexpr double kPi = 3.14159265358979323846;
  static constexpr double kCosMargin = 1e-7;

  static void require_not_antipodal(const Point& p, const Point& q) {
    if (p.dot(q) < -1.0 + kAntipodalThreshold) {
      fail(ErrorCode::AntipodalPoints, "geodesic between antipodal points is not unique");
    }
  }

  int dim_;
  double tol_;
};

// --- SPD matrices, affine-invariant metric ------------------------------------

template <int Dim>
class SpdAffine {
public:
  using Matrix = spd::Matrix<Dim>;

  /// The matrix together with its inverse (used by the membership bounds).
  struct Point {
    Matrix m;
    Matrix inv;
  };

  struct Ball {
    Matrix center;
    Matrix center_inv;
    Matrix center_inv_sqrt;
    double radius;
    double u_inner; // trace statistic below this: inside
    double u_outer; // trace statistic above this: outside
  };

  explicit SpdAffine(int size, double tolerance = kDefaultBallTolerance)
      : size_(size), tol_(tolerance) {}

  double tolerance() const { return tol_; }
  int size() const { return size_; }

  std::optional<std::string> check(const ManifoldPoint& p) const {
    const auto* s = std::get_if<Spd>(&p);
    if (!s) return kind_mismatch("Spd");
    const auto& m = s->matrix;
    if (m.rows() != size_ || m.cols() != size_) return "matrix has wrong size";
    if (!m.allFinite()) return "matrix is not finite";
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) return "matrix is not symmetric";
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) return "eigenvalue solve did not converge";
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      return "matrix has a non-positive eigenvalue (" + std::to_string(eig.eigenvalues().minCoeff()) + ")";
    }
    return std::nullopt;
  }

  Point load(const ManifoldPoint& p) const {
    if (auto err = check(p)) fail(ErrorCode::InvalidPoint, *err);
    const Eigen::MatrixXd& raw = std::get<Spd>(p).matrix;
    Matrix m = 0.5 * (raw + raw.transpose());
    return make_point(std::move(m));
  }

  ManifoldPoint store(const Point& p) const { return Spd{Eigen::MatrixXd(p.m)}; }

  double distance(const Point& a, const Point& b) const { return spd::distance<Dim>(a.m, b.m); }

  Point midpoint(const Point& a, const Point& b) const {
    return make_point(spd::geometric_mean<Dim>(a.m, b.m));
  }

  Ball ball(const Point& a, const Point& b) const {
    Matrix center = spd::geometric_mean<Dim>(a.m, b.m);
    const auto eig = spd::eigen_decompose<Dim>(center);
    const double radius = 0.5 * distance(a, b);
    const double bound = radius + tol_;
    const double bound_sq = bound * bound;
    const double slack = 1e-9 * (1.0 + bound_sq);
    const double s = std::sinh(0.5 * std::sqrt(bound_sq + slack));
    Ball out{center,
             spd::apply_function<Dim>(eig, [](double x) { return 1.0 / x; }),
             spd::apply_function<Dim>(eig, [](double x) { return 1.0 / std::sqrt(x); }),
             radius,
             bound_sq - slack,
             4.0 * s * s};
    return out;
  }

  /// d(center, t) <= radius + tol with d = ||log(C^{-1/2} t C^{-1/2})||_F.
  ///
  /// With P = C^{-1/2} t C^{-1/2} and U = tr P + tr P^{-1} - 2n we have
  ///   f(U) <= sum_i log^2 lambda_i(P) <= U,   f(u) = 4 asinh^2(sqrt(u)/2),
  /// since log^2 x <= x + 1/x - 2 and f is concave with f(0) = 0. Both traces
  /// cost O(n^2), so the eigenvalue solve only runs when the bounds straddle
  /// the radius. f(U) > r^2 is tested as U > 4 sinh^2(r/2).
  bool contains(const Ball& b, const Point& t) const {
    const double tr_p = b.center_inv.cwiseProduct(t.m).sum();
    const double tr_p_inv = b.center.cwiseProduct(t.inv).sum();
    const double u = tr_p + tr_p_inv - 2.0 * static_cast<double>(size_);
    if (u < b.u_inner) return true;
    if (u > b.u_outer) return false;
    return exact_distance_to_center(b, t) <= b.radius + tol_;
  }

  /// Membership evaluated with the eigenvalue solve only (no bounds).
  bool contains_exact(const Ball& b, const Point& t) const {
    return exact_distance_to_center(b, t) <= b.radius + tol_;
  }

  bool equal(const Point& a, const Point& b) const { return a.m == b.m; }
  std::size_t hash(const Point& a) const {
    return hash_doubles(a.m.data(), static_cast<std::size_t>(a.m.size()));
  }

  Point make_point(Matrix m) const {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
      fail(ErrorCode::NumericalFailure, "Cholesky factorisation of SPD point failed");
    }
    Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
    inv = 0.5 * (inv + inv.transpose());
    return {std::move(m), std::move(inv)};
  }

private:
  double exact_distance_to_center(const Ball& b, const Point& t) const {
    Matrix p = b.center_inv_sqrt * t.m * b.center_inv_sqrt;
    p = 0.5 * (p + p.transpose());
    return spd::log_eigen_norm<Dim>(p);
  }

  int size_;
  double tol_;
};

// --- the surface xyz = 1 with the flat log-coordinate metric -----------------

class LogSurfaceFlat {
public:
  /// Componentwise logarithms of (x, y, z).
  using Point = std::array<double, 3>;
  struct Ball {
    Point center;
    double radius;
  };

  explicit LogSurfaceFlat(double tolerance = kDefaultBallTolerance) : tol_(tolerance) {}

  double tolerance() const { return tol_; }

  std::optional<std::string> check(const ManifoldPoint& p) const {
    const auto* s = std::get_if<LogSurface>(&p);
    if (!s) return kind_mismatch("LogSurface");
    const auto& c = s->coords;
    for (double v : c) {
      if (!std::isfinite(v)) return "surface coordinate is not finite";
      if (!(v > 0.0)) return "surface coordinates must be positive";
    }
    if (std::abs(c[0] * c[1] * c[2] - 1.0) > kSurfaceTolerance) return "coordinates do not satisfy xyz = 1";
    return std::nullopt;
  }

  Point load(const ManifoldPoint& p) const {
    if (auto err = check(p)) fail(ErrorCode::InvalidPoint, *err);
    const auto& c = std::get<LogSurface>(p).coords;
    return {std::log(c[0]), std::log(c[1]), std::log(c[2])};
  }
  ManifoldPoint store(const Point& p) const {
    return LogSurface{{std::exp(p[0]), std::exp(p[1]), std::exp(p[2])}};
  }

  double distance(const Point& p, const Point& q) const {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
    return std::sqrt(acc);
  }

  Point midpoint(const Point& p, const Point& q) const {
    return {0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])};
  }

  Ball ball(const Point& p, const Point& q) const { return {midpoint(p, q), 0.5 * distance(p, q)}; }
  bool contains(const Ball& b, const Point& t) const { return distance(t, b.center) <= b.radius + tol_; }

  bool equal(const Point& a, const Point& b) const { return a == b; }
  std::size_t hash(const Point& a) const { return hash_doubles(a.data(), 3); }

private:
  double tol_;
};

// --- Euclidean R^p ----------------------------------------------------------

class Euclidean {
public:
  using Point = Eigen::VectorXd;
  struct Ball {
    Point center;
    double radius;
  };

  Euclidean(int dim, double tolerance = kDefaultBallTolerance) : dim_(dim), tol_(tolerance) {}

  double tolerance() const { return tol_; }

  std::optional<std::string> check(const ManifoldPoint& p) const {
    const auto* e = std::get_if<Euclid>(&p);
    if (!e) return kind_mismatch("Euclid");
    if (e->coords.size() != dim_) return "vector has wrong dimension";
    if (!e->coords.allFinite()) return "vector is not finite";
    return std::nullopt;
  }

  Point load(const ManifoldPoint& p) const {
    if (auto err = check(p)) fail(ErrorCode::InvalidPoint, *err);
    return std::get<Euclid>(p).coords;
  }
  ManifoldPoint store(const Point& p) const { return Euclid{p}; }

  double distance(const Point& p, const Point& q) const { return (p - q).norm(); }
  Point midpoint(const Point& p, const Point& q) const { return 0.5 * (p + q); }
  Ball ball(const Point& p, const Point& q) const { return {midpoint(p, q), 0.5 * distance(p, q)}; }
  bool contains(const Ball& b, const Point& t) const { return distance(t, b.center) <= b.radius + tol_; }

  bool equal(const Point& a, const Point& b) const { return a == b; }
  std::size_t hash(const Point& a) const {
    return hash_doubles(a.data(), static_cast<std::size_t>(a.size()));
  }

private:
  int dim_;
  double tol_;
};

} // namespace geosens::backend

#endif // GEOSENS_MANIFOLD_BACKENDS_HPP
