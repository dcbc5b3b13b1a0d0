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

#ifndef GEOSENS_MANIFOLD_TYPES_HPP
#define GEOSENS_MANIFOLD_TYPES_HPP

#include <array>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace geosens {

// --- output points --------------------------------------------------------

struct Scalar {
  double value = 0.0;
};

/// Point of the unit sphere S^{d-1} embedded in R^d (d = 2 is the circle).
struct UnitVector {
  Eigen::VectorXd coords;
};

/// Symmetric positive-definite matrix.
struct Spd {
  Eigen::MatrixXd matrix;
};

/// Point of {(x, y, z) : x y z = 1, x, y, z > 0}.
struct LogSurface {
  std::array<double, 3> coords{1.0, 1.0, 1.0};
};

struct Euclid {
  Eigen::VectorXd coords;
};

using ManifoldPoint = std::variant<Scalar, UnitVector, Spd, LogSurface, Euclid>;

inline ManifoldPoint scalar_point(double v) { return Scalar{v}; }

inline ManifoldPoint circle_point(double angle) {
  Eigen::VectorXd v(2);
  v << std::cos(angle), std::sin(angle);
  return UnitVector{std::move(v)};
}

inline ManifoldPoint spd_point(Eigen::MatrixXd m) { return Spd{std::move(m)}; }

inline ManifoldPoint log_surface_point(double x, double y, double z) {
  return LogSurface{{x, y, z}};
}

// --- manifold selector ----------------------------------------------------

struct RealLineKind {};
struct CircleKind {
  int dim = 2; // embedding dimension
};
struct SpdAffineKind {
  int size = 2;
};
struct LogSurfaceKind {};
struct EuclidQuadrantKind {
  int dim = 1;
};

inline constexpr double kDefaultBallTolerance = 1e-10;

struct ManifoldKind {
  std::variant<RealLineKind, CircleKind, SpdAffineKind, LogSurfaceKind, EuclidQuadrantKind> shape;
  double tolerance = kDefaultBallTolerance;

  static ManifoldKind real_line(double tol = kDefaultBallTolerance) { return {RealLineKind{}, tol}; }
  static ManifoldKind circle(int dim = 2, double tol = kDefaultBallTolerance) {
    return {CircleKind{dim}, tol};
  }
  static ManifoldKind spd(int size, double tol = kDefaultBallTolerance) {
    return {SpdAffineKind{size}, tol};
  }
  static ManifoldKind log_surface(double tol = kDefaultBallTolerance) {
    return {LogSurfaceKind{}, tol};
  }
  static ManifoldKind euclid(int dim, double tol = kDefaultBallTolerance) {
    return {EuclidQuadrantKind{dim}, tol};
  }
};

inline std::string to_string(const ManifoldKind& kind) {
  struct Namer {
    std::string operator()(const RealLineKind&) const { return "real_line"; }
    std::string operator()(const CircleKind& k) const { return "sphere" + std::to_string(k.dim); }
    std::string operator()(const SpdAffineKind& k) const { return "spd" + std::to_string(k.size); }
    std::string operator()(const LogSurfaceKind&) const { return "log_surface"; }
    std::string operator()(const EuclidQuadrantKind& k) const {
      return "euclid" + std::to_string(k.dim);
    }
  };
  return std::visit(Namer{}, kind.shape);
}

// --- isometries -----------------------------------------------------------

/// t -> a t + b with a = +-1.
struct ScalarAffine {
  double a = 1.0;
  double b = 0.0;
};

/// Orthogonal map on the embedding space of a sphere (or on R^p).
struct Rotation {
  Eigen::MatrixXd matrix;
};

/// A -> M A M^T for invertible M.
struct Congruence {
  Eigen::MatrixXd matrix;
};

/// Coordinate relabelling: out[i] = in[perm[i]].
struct CoordPermutation {
  std::vector<int> perm;
};

using Isometry = std::variant<ScalarAffine, Rotation, Congruence, CoordPermutation>;

} // namespace geosens

#endif // GEOSENS_MANIFOLD_TYPES_HPP
