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

#ifndef GEOSENS_MANIFOLD_SPD_HPP
#define GEOSENS_MANIFOLD_SPD_HPP

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "../error.hpp"

/// Matrix functions on symmetric positive-definite matrices, all computed
/// from one symmetric eigendecomposition.
namespace geosens::spd {

/// Eigenvalues below this are clamped before log/power.
inline constexpr double kEigenFloor = 1e-14;

template <int Dim>
using Matrix = Eigen::Matrix<double, Dim, Dim>;

template <int Dim>
using Vector = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
Eigen::SelfAdjointEigenSolver<Matrix<Dim>> eigen_decompose(const Matrix<Dim>& a) {
  Eigen::SelfAdjointEigenSolver<Matrix<Dim>> solver(a);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigendecomposition did not converge");
  }
  return solver;
}

template <int Dim, class F>
Matrix<Dim> apply_function(const Eigen::SelfAdjointEigenSolver<Matrix<Dim>>& eig, F&& f) {
  const auto& vecs = eig.eigenvectors();
  Vector<Dim> vals = eig.eigenvalues().unaryExpr(
      [&](double lambda) { return f(std::max(lambda, kEigenFloor)); });
  Matrix<Dim> out = vecs * vals.asDiagonal() * vecs.transpose();
  return 0.5 * (out + out.transpose());
}

template <int Dim>
Matrix<Dim> sqrtm(const Matrix<Dim>& a) {
  return apply_function<Dim>(eigen_decompose<Dim>(a), [](double x) { return std::sqrt(x); });
}

template <int Dim>
Matrix<Dim> inv_sqrtm(const Matrix<Dim>& a) {
  return apply_function<Dim>(eigen_decompose<Dim>(a), [](double x) { return 1.0 / std::sqrt(x); });
}

template <int Dim>
Matrix<Dim> logm(const Matrix<Dim>& a) {
  return apply_function<Dim>(eigen_decompose<Dim>(a), [](double x) { return std::log(x); });
}

template <int Dim>
Matrix<Dim> powm(const Matrix<Dim>& a, double t) {
  return apply_function<Dim>(eigen_decompose<Dim>(a), [t](double x) { return std::pow(x, t); });
}

/// sqrt(sum_i log^2 lambda_i) for the eigenvalues of a symmetric matrix.
template <int Dim>
double log_eigen_norm(const Matrix<Dim>& a) {
  Eigen::SelfAdjointEigenSolver<Matrix<Dim>> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::NumericalFailure, "symmetric eigenvalue solve did not converge");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double l = std::log(std::max(solver.eigenvalues()[i], kEigenFloor));
    acc += l * l;
  }
  return std::sqrt(acc);
}

/// Lexicographic order on the entries; used to evaluate symmetric formulas in
/// a canonical argument order.
template <int Dim>
bool lex_less(const Matrix<Dim>& a, const Matrix<Dim>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a.data()[i] < b.data()[i]) return true;
    if (b.data()[i] < a.data()[i]) return false;
  }
  return false;
}

/// Affine-invariant distance ||log(A^{-1/2} B A^{-1/2})||_F.
template <int Dim>
double distance(const Matrix<Dim>& a, const Matrix<Dim>& b) {
  const bool swap = lex_less<Dim>(b, a);
  const Matrix<Dim>& first = swap ? b : a;
  const Matrix<Dim>& second = swap ? a : b;
  const Matrix<Dim> c = inv_sqrtm<Dim>(first);
  Matrix<Dim> p = c * second * c;
  p = 0.5 * (p + p.transpose());
  return log_eigen_norm<Dim>(p);
}

/// gamma(t) = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}.
template <int Dim>
Matrix<Dim> geodesic(const Matrix<Dim>& a, const Matrix<Dim>& b, double t) {
  const auto eig = eigen_decompose<Dim>(a);
  const Matrix<Dim> s = apply_function<Dim>(eig, [](double x) { return std::sqrt(x); });
  const Matrix<Dim> c = apply_function<Dim>(eig, [](double x) { return 1.0 / std::sqrt(x); });
  Matrix<Dim> p = c * b * c;
  p = 0.5 * (p + p.transpose());
  Matrix<Dim> out = s * powm<Dim>(p, t) * s;
  return 0.5 * (out + out.transpose());
}

/// Geometric mean A # B (the geodesic midpoint), symmetric in its arguments.
template <int Dim>
Matrix<Dim> geometric_mean(const Matrix<Dim>& a, const Matrix<Dim>& b) {
  return lex_less<Dim>(b, a) ? geodesic<Dim>(b, a, 0.5) : geodesic<Dim>(a, b, 0.5);
}

} // namespace geosens::spd

#endif // GEOSENS_MANIFOLD_SPD_HPP
