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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geosens/manifold.hpp"
#include "test_support.hpp"

namespace geosens {
namespace {

using std::numbers::pi;

Eigen::MatrixXd diag2(double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

const Eigen::MatrixXd kI2 = Eigen::MatrixXd::Identity(2, 2);

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(distance(ManifoldKind::real_line(), Scalar{1.0}, Scalar{3.0}), 2.0);
  EXPECT_NEAR(distance(ManifoldKind::spd(2), Spd{kI2}, Spd{diag2(4, 1)}), std::log(4.0), 1e-12);
  EXPECT_NEAR(distance(ManifoldKind::circle(2), circle_point(0.0), circle_point(pi / 2)), pi / 2, 1e-15);
  PhiloxStream rng({1, StreamRole::Auxiliary, 0, 0});
  const auto a = testing::random_point(ManifoldKind::spd(3), rng);
  EXPECT_NEAR(distance(ManifoldKind::spd(3), a, a), 0.0, 1e-12);
}

TEST(Distance, SpdMatchesScalarLogOracle) {
  // With A = I the distance is the Frobenius norm of log B.
  PhiloxStream rng({2, StreamRole::Auxiliary, 0, 0});
  for (int t = 0; t < 50; ++t) {
    const auto b = std::get<Spd>(testing::random_point(ManifoldKind::spd(3), rng)).matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    double ss = 0.0;
    for (int i = 0; i < 3; ++i) ss += std::pow(std::log(es.eigenvalues()[i]), 2);
    EXPECT_NEAR(distance(ManifoldKind::spd(3), Spd{Eigen::MatrixXd::Identity(3, 3)}, Spd{b}), std::sqrt(ss), 1e-10);
  }
}

TEST(Midpoint, Examples) {
  EXPECT_DOUBLE_EQ(std::get<Scalar>(midpoint(ManifoldKind::real_line(), Scalar{1.0}, Scalar{3.0})).value, 2.0);
  const auto m = std::get<Spd>(midpoint(ManifoldKind::spd(2), Spd{kI2}, Spd{diag2(4, 1)})).matrix;
  EXPECT_LT((m - diag2(2, 1)).norm(), 1e-12);
  const double e = std::exp(1.0);
  const auto s = std::get<LogSurface>(midpoint(ManifoldKind::log_surface(), log_surface_point(e, e, 1 / (e * e)),
                                               log_surface_point(1 / e, 1 / e, e * e)));
  for (double c : s.coords) EXPECT_NEAR(c, 1.0, 1e-14);
}

TEST(BallContains, Examples) {
  const auto line = ManifoldKind::real_line();
  EXPECT_TRUE(ball_contains(line, Scalar{1.0}, Scalar{3.0}, Scalar{2.5}));
  EXPECT_TRUE(ball_contains(line, Scalar{1.0}, Scalar{3.0}, Scalar{3.0}));
  EXPECT_FALSE(ball_contains(line, Scalar{1.0}, Scalar{3.0}, Scalar{3.2}));
  EXPECT_TRUE(ball_contains(ManifoldKind::spd(2), Spd{kI2}, Spd{diag2(4, 1)}, Spd{diag2(2, 1)}));
  EXPECT_FALSE(ball_contains(ManifoldKind::circle(2), circle_point(0.0), circle_point(pi / 2), circle_point(pi)));
}

TEST(BallContains, EndpointsBelongToTheirBall) {
  PhiloxStream rng({3, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 200; ++t) {
      const auto p = testing::random_point(kind, rng);
      const auto q = testing::random_point(kind, rng);
      EXPECT_TRUE(ball_contains(kind, p, q, p)) << to_string(kind);
      EXPECT_TRUE(ball_contains(kind, p, q, q)) << to_string(kind);
      EXPECT_TRUE(ball_contains(kind, p, q, midpoint(kind, p, q))) << to_string(kind);
    }
  }
}

TEST(BallContains, AntipodalDiameterFails) {
  try {
    ball_contains(ManifoldKind::circle(2), circle_point(0.0), circle_point(pi), circle_point(0.3));
    FAIL() << "expected AntipodalPoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AntipodalPoints);
  }
}

TEST(SpdGeodesic, Examples) {
  const auto b = diag2(4, 9);
  const auto half = std::get<Spd>(spd_geodesic(Spd{kI2}, Spd{b}, 0.5)).matrix;
  EXPECT_LT((half - diag2(2, 3)).norm(), 1e-12);
  const auto p = std::get<Spd>(spd_geodesic(Spd{kI2}, Spd{b}, 0.3)).matrix;
  EXPECT_LT((p - diag2(std::pow(4.0, 0.3), std::pow(9.0, 0.3))).norm(), 1e-12);
  PhiloxStream rng({4, StreamRole::Auxiliary, 0, 0});
  const auto a = std::get<Spd>(testing::random_point(ManifoldKind::spd(3), rng)).matrix;
  EXPECT_LT((std::get<Spd>(spd_geodesic(Spd{a}, Spd{a}, 0.7)).matrix - a).norm(), 1e-10);
  EXPECT_LT((std::get<Spd>(spd_geodesic(Spd{kI2}, Spd{diag2(4, 1)}, 0.5)).matrix - diag2(2, 1)).norm(), 1e-12);
}

TEST(Isometry, Examples) {
  EXPECT_DOUBLE_EQ(
      std::get<Scalar>(apply_isometry(ManifoldKind::real_line(), ScalarAffine{1.0, 5.0}, Scalar{2.0})).value, 7.0);
  Eigen::MatrixXd rot(2, 2);
  rot << std::cos(pi / 3), -std::sin(pi / 3), std::sin(pi / 3), std::cos(pi / 3);
  const auto r = std::get<UnitVector>(apply_isometry(ManifoldKind::circle(2), Rotation{rot}, circle_point(0.0)));
  EXPECT_LT((r.coords - std::get<UnitVector>(circle_point(pi / 3)).coords).norm(), 1e-15);
  const auto c = std::get<Spd>(apply_isometry(ManifoldKind::spd(2), Congruence{diag2(2, 1)}, Spd{kI2})).matrix;
  EXPECT_LT((c - diag2(4, 1)).norm(), 1e-15);
  EXPECT_THROW(apply_isometry(ManifoldKind::real_line(), ScalarAffine{2.0, 0.0}, Scalar{1.0}), Error);
  EXPECT_THROW(apply_isometry(ManifoldKind::spd(2), ScalarAffine{1.0, 0.0}, Spd{kI2}), Error);
}

TEST(ValidatePoint, Examples) {
  Eigen::VectorXd u(2);
  u << 0.6, 0.8;
  EXPECT_FALSE(validate_point(ManifoldKind::circle(2), UnitVector{u}).has_value());
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_TRUE(validate_point(ManifoldKind::spd(2), Spd{bad}).has_value());
  EXPECT_FALSE(validate_point(ManifoldKind::log_surface(), log_surface_point(2, 1, 0.5)).has_value());
  EXPECT_TRUE(validate_point(ManifoldKind::log_surface(), log_surface_point(2, 1, 1)).has_value());
}

// --- properties ------------------------------------------------------------------

class BackendProperties : public ::testing::TestWithParam<int> {
protected:
  ManifoldKind kind() const { return testing::ball_backends()[static_cast<std::size_t>(GetParam())]; }
};

TEST_P(BackendProperties, DistanceSymmetricExactly) {
  PhiloxStream rng({5, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    ASSERT_EQ(distance(kind(), p, q), distance(kind(), q, p));
  }
}

TEST_P(BackendProperties, TriangleInequality) {
  PhiloxStream rng({6, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    const auto r = testing::random_point(kind(), rng);
    ASSERT_LE(distance(kind(), p, r), distance(kind(), p, q) + distance(kind(), q, r) + 1e-8);
  }
}

TEST_P(BackendProperties, MidpointBisects) {
  PhiloxStream rng({7, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    const double d = distance(kind(), p, q);
    const auto m = midpoint(kind(), p, q);
    ASSERT_NEAR(distance(kind(), p, m), d / 2, 1e-8);
    ASSERT_NEAR(distance(kind(), q, m), d / 2, 1e-8);
  }
}

TEST_P(BackendProperties, BallSymmetric) {
  PhiloxStream rng({8, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  for (int t = 0; t < 1000; ++t) {
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    const auto x = testing::random_point(kind(), rng);
    ASSERT_EQ(ball_contains(kind(), p, q, x), ball_contains(kind(), q, p, x));
  }
}

TEST_P(BackendProperties, MembershipIsometryInvariant) {
  PhiloxStream rng({9, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  int inside = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto iso = testing::random_isometry(kind(), rng);
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    const auto x = testing::random_point(kind(), rng);
    const bool before = ball_contains(kind(), p, q, x);
    inside += before ? 1 : 0;
    ASSERT_EQ(before, ball_contains(kind(), apply_isometry(kind(), iso, p), apply_isometry(kind(), iso, q),
                                    apply_isometry(kind(), iso, x)));
  }
  EXPECT_GT(inside, 0);
  EXPECT_LT(inside, 1000);
}

TEST_P(BackendProperties, MembershipMatchesDistanceDefinition) {
  PhiloxStream rng({10, StreamRole::Auxiliary, 0, static_cast<std::uint32_t>(GetParam())});
  for (int t = 0; t < 2000; ++t) {
    const auto p = testing::random_point(kind(), rng);
    const auto q = testing::random_point(kind(), rng);
    // points near the boundary exercise any fast pretest
    const auto m = midpoint(kind(), p, q);
    const auto x = rng.uniform01() < 0.5 ? testing::random_point(kind(), rng) : midpoint(kind(), m, testing::random_point(kind(), rng));
    const double slack = distance(kind(), m, x) - 0.5 * distance(kind(), p, q);
    if (std::abs(slack - kind().tolerance) < 1e-9) continue; // numerically tied
    ASSERT_EQ(ball_contains(kind(), p, q, x), slack <= kind().tolerance);
  }
}

INSTANTIATE_TEST_SUITE_P(AllBackends, BackendProperties, ::testing::Range(0, 4));

TEST(SpdCongruence, PreservesDistance) {
  PhiloxStream rng({11, StreamRole::Auxiliary, 0, 0});
  for (int n : {2, 3, 6}) {
    const auto kind = ManifoldKind::spd(n);
    for (int t = 0; t < 200; ++t) {
      const auto m = testing::random_well_conditioned(n, rng);
      const auto a = testing::random_point(kind, rng);
      const auto b = testing::random_point(kind, rng);
      const Isometry iso = Congruence{m};
      EXPECT_NEAR(distance(kind, apply_isometry(kind, iso, a), apply_isometry(kind, iso, b)), distance(kind, a, b),
                  1e-7);
    }
  }
}

TEST(SpdMembership, SixBySixAgreesWithDefinition) {
  PhiloxStream rng({12, StreamRole::Auxiliary, 0, 0});
  const auto kind = ManifoldKind::spd(6);
  int inside = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto p = testing::random_point(kind, rng);
    const auto q = testing::random_point(kind, rng);
    const auto x = spd_geodesic(midpoint(kind, p, q), testing::random_point(kind, rng), 0.5 * rng.uniform01());
    const double slack = distance(kind, midpoint(kind, p, q), x) - 0.5 * distance(kind, p, q);
    if (std::abs(slack - kind.tolerance) < 1e-9) continue;
    const bool in = ball_contains(kind, p, q, x);
    inside += in ? 1 : 0;
    ASSERT_EQ(in, slack <= kind.tolerance);
  }
  EXPECT_GT(inside, 100);
}

} // namespace
} // namespace geosens
