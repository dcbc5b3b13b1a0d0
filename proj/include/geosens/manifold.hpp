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

#ifndef GEOSENS_MANIFOLD_HPP
#define GEOSENS_MANIFOLD_HPP

#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "error.hpp"
#include "manifold/backends.hpp"
#include "manifold/spd.hpp"
#include "manifold/types.hpp"

namespace geosens {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Calls `fn(backend)` with the typed backend selected by `kind`. Small SPD and
/// sphere dimensions get fixed-size Eigen storage.
template <class Fn>
decltype(auto) with_backend(const ManifoldKind& kind, Fn&& fn) {
  const double tol = kind.tolerance;
  if (!(tol >= 0.0)) {
    fail(ErrorCode::InvalidSpec, "ball tolerance must be non-negative");
  }
  return std::visit(
      overloaded{
          [&](const RealLineKind&) -> decltype(auto) { return fn(backend::RealLine(tol)); },
          [&](const CircleKind& k) -> decltype(auto) {
            if (k.dim == 2) return fn(backend::Sphere<2>(2, tol));
            if (k.dim == 3) return fn(backend::Sphere<3>(3, tol));
            if (k.dim < 2) fail(ErrorCode::InvalidSpec, "sphere embedding dimension must be >= 2");
            return fn(backend::Sphere<Eigen::Dynamic>(k.dim, tol));
          },
          [&](const SpdAffineKind& k) -> decltype(auto) {
            if (k.size == 2) return fn(backend::SpdAffine<2>(2, tol));
            if (k.size == 3) return fn(backend::SpdAffine<3>(3, tol));
            if (k.size == 6) return fn(backend::SpdAffine<6>(6, tol));
            if (k.size < 1) fail(ErrorCode::InvalidSpec, "SPD matrix size must be >= 1");
            return fn(backend::SpdAffine<Eigen::Dynamic>(k.size, tol));
          },
          [&](const LogSurfaceKind&) -> decltype(auto) { return fn(backend::LogSurfaceFlat(tol)); },
          [&](const EuclidQuadrantKind& k) -> decltype(auto) {
            if (k.dim < 1) fail(ErrorCode::InvalidSpec, "Euclidean dimension must be >= 1");
            return fn(backend::Euclidean(k.dim, tol));
          },
      },
      kind.shape);
}

/// nullopt when `p` is a valid point of `kind`, otherwise which invariant failed.
inline std::optional<std::string> validate_point(const ManifoldKind& kind, const ManifoldPoint& p) {
  return with_backend(kind, [&](const auto& b) { return b.check(p); });
}

inline double distance(const ManifoldKind& kind, const ManifoldPoint& p, const ManifoldPoint& q) {
  return with_backend(kind, [&](const auto& b) { return b.distance(b.load(p), b.load(q)); });
}

inline ManifoldPoint midpoint(const ManifoldKind& kind, const ManifoldPoint& p, const ManifoldPoint& q) {
  return with_backend(kind, [&](const auto& b) { return b.store(b.midpoint(b.load(p), b.load(q))); });
}

/// Membership of `t` in the closed ball of diameter pq.
inline bool ball_contains(const ManifoldKind& kind, const ManifoldPoint& p, const ManifoldPoint& q,
                          const ManifoldPoint& t) {
  return with_backend(kind, [&](const auto& b) {
    return b.contains(b.ball(b.load(p), b.load(q)), b.load(t));
  });
}

/// Point of the affine-invariant geodesic from A (t = 0) to B (t = 1).
inline ManifoldPoint spd_geodesic(const ManifoldPoint& a, const ManifoldPoint& b, double t) {
  const auto* sa = std::get_if<Spd>(&a);
  const auto* sb = std::get_if<Spd>(&b);
  if (!sa || !sb) fail(ErrorCode::InvalidPoint, "spd_geodesic expects SPD matrices");
  const auto kind = ManifoldKind::spd(static_cast<int>(sa->matrix.rows()));
  if (auto err = validate_point(kind, a)) fail(ErrorCode::InvalidPoint, *err);
  if (auto err = validate_point(kind, b)) fail(ErrorCode::InvalidPoint, *err);
  return Spd{spd::geodesic<Eigen::Dynamic>(sa->matrix, sb->matrix, t)};
}

namespace detail {

inline void require_orthogonal(const Eigen::MatrixXd& q, Eigen::Index n) {
  if (q.rows() != n || q.cols() != n) {
    fail(ErrorCode::IncompatibleIsometry, "rotation has wrong size");
  }
  const Eigen::MatrixXd gram = q.transpose() * q;
  if ((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-9) {
    fail(ErrorCode::IncompatibleIsometry, "rotation matrix is not orthogonal");
  }
}

inline std::vector<int> checked_permutation(const CoordPermutation& p, std::size_t n) {
  if (p.perm.size() != n) fail(ErrorCode::IncompatibleIsometry, "permutation has wrong length");
  std::vector<bool> seen(n, false);
  for (int i : p.perm) {
    if (i < 0 || static_cast<std::size_t>(i) >= n || seen[static_cast<std::size_t>(i)]) {
      fail(ErrorCode::IncompatibleIsometry, "not a permutation");
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
  return p.perm;
}

} // namespace detail

inline ManifoldPoint apply_isometry(const ManifoldKind& kind, const Isometry& iso, const ManifoldPoint& p) {
  if (auto err = validate_point(kind, p)) fail(ErrorCode::InvalidPoint, *err);
  auto incompatible = [] { fail(ErrorCode::IncompatibleIsometry, "isometry does not act on this manifold"); };

  if (const auto* affine = std::get_if<ScalarAffine>(&iso)) {
    if (!std::holds_alternative<RealLineKind>(kind.shape)) incompatible();
    if (affine->a != 1.0 && affine->a != -1.0) {
      fail(ErrorCode::IncompatibleIsometry, "scalar isometry needs a = +-1");
    }
    return Scalar{affine->a * std::get<Scalar>(p).value + affine->b};
  }
  if (const auto* rot = std::get_if<Rotation>(&iso)) {
    if (const auto* u = std::get_if<UnitVector>(&p)) {
      detail::require_orthogonal(rot->matrix, u->coords.size());
      return UnitVector{rot->matrix * u->coords};
    }
    if (const auto* e = std::get_if<Euclid>(&p)) {
      detail::require_orthogonal(rot->matrix, e->coords.size());
      return Euclid{rot->matrix * e->coords};
    }
    incompatible();
  }
  if (const auto* cong = std::get_if<Congruence>(&iso)) {
    const auto* s = std::get_if<Spd>(&p);
    if (!s) incompatible();
    const auto& m = cong->matrix;
    if (m.rows() != s->matrix.rows() || m.cols() != s->matrix.cols()) {
      fail(ErrorCode::IncompatibleIsometry, "congruence has wrong size");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (!(sv.minCoeff() > 0.0) || !std::isfinite(sv.maxCoeff() / sv.minCoeff())) {
      fail(ErrorCode::IncompatibleIsometry, "congruence matrix is singular");
    }
    Eigen::MatrixXd out = m * s->matrix * m.transpose();
    return Spd{0.5 * (out + out.transpose())};
  }
  const auto& perm = std::get<CoordPermutation>(iso);
  if (const auto* ls = std::get_if<LogSurface>(&p)) {
    const auto idx = detail::checked_permutation(perm, 3);
    return LogSurface{{ls->coords[static_cast<std::size_t>(idx[0])], ls->coords[static_cast<std::size_t>(idx[1])],
                       ls->coords[static_cast<std::size_t>(idx[2])]}};
  }
  if (const auto* e = std::get_if<Euclid>(&p)) {
    const auto idx = detail::checked_permutation(perm, static_cast<std::size_t>(e->coords.size()));
    Eigen::VectorXd out(e->coords.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = e->coords[idx[static_cast<std::size_t>(i)]];
    return Euclid{std::move(out)};
  }
  incompatible();
  return p; // unreachable
}

} // namespace geosens

#endif // GEOSENS_MANIFOLD_HPP
