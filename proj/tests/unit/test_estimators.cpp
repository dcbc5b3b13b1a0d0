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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "geosens/estimators.hpp"
#include "geosens/oracles.hpp"
#include "test_support.hpp"

namespace geosens {
namespace {

using std::numbers::pi;

PickFreezeSample scalar_pairs(std::vector<std::pair<double, double>> v) {
  PickFreezeSample out;
  out.nu = {1};
  for (auto [a, b] : v) {
    out.z.push_back(Scalar{a});
    out.z_nu.push_back(Scalar{b});
  }
  return out;
}

WPool scalar_pool(std::vector<double> v) {
  WPool out;
  for (double x : v) out.points.push_back(Scalar{x});
  return out;
}

const ManifoldKind kLine = ManifoldKind::real_line();

EstimatorOptions threads(unsigned n) {
  EstimatorOptions o;
  o.threads = n;
  return o;
}

TEST(Kernels, Examples) {
  const Scalar w1{1.0}, w2{3.0};
  EXPECT_EQ(kernel_G(kLine, Scalar{2.0}, Scalar{3.5}, w1, w2), 0);
  EXPECT_EQ(kernel_G(kLine, Scalar{2.0}, Scalar{2.0}, w1, w2), 1);
  EXPECT_EQ(kernel_G(kLine, Scalar{2.0}, Scalar{2.5}, w1, w2), 1);
  EXPECT_EQ(kernel_J(kLine, Scalar{2.0}, Scalar{2.5}, w1, w2), 1.0);
  EXPECT_EQ(kernel_J(kLine, Scalar{2.0}, Scalar{3.5}, w1, w2), 0.5);
  EXPECT_EQ(kernel_J(kLine, Scalar{0.0}, Scalar{3.5}, w1, w2), 0.0);
  EXPECT_TRUE(kernel_h(kLine, w1, w2, Scalar{3.0}));
}

TEST(EstimateS, HandInstance) {
  const auto pairs = scalar_pairs({{1.0, 1.0}, {5.0, 2.0}});
  const auto pool = scalar_pool({0.0, 4.0});
  EXPECT_DOUBLE_EQ(estimate_S(pairs, pool, kLine), -0.0625);
  EXPECT_DOUBLE_EQ(estimate_D(pairs, pool, kLine), 0.1875);
  const auto naive = naive_estimate_reference(pairs, pool, kLine);
  EXPECT_DOUBLE_EQ(naive.s, -0.0625);
  EXPECT_DOUBLE_EQ(naive.d, 0.1875);
}

TEST(EstimateS, EmptyBallsGiveZero) {
  const auto pairs = scalar_pairs({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
  const auto pool = scalar_pool({7.0, 7.0, 7.0});
  const auto est = estimate_ball_statistics(pairs, pool, kLine);
  EXPECT_EQ(est.s_hat, 0.0);
  EXPECT_EQ(est.d_hat, 0.0);
  EXPECT_TRUE(est.degenerate());
  EXPECT_THROW(estimate_B(pairs, pool, kLine), Error);
}

TEST(EstimateD, FullBallsGiveZero) {
  const auto pairs = scalar_pairs({{1.0, 1.0}, {1.0, 1.0}});
  const auto pool = scalar_pool({-100.0, 100.0, -50.0});
  EXPECT_EQ(estimate_D(pairs, pool, kLine), 0.0);
}

TEST(EstimateB, FrozenOnlyModelIsExactlyOne) {
  PhiloxStream rng({1, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 5; ++t) {
      auto inst = testing::random_instance(kind, 60, 40, rng);
      inst.pairs.z_nu = inst.pairs.z;
      const auto est = estimate_ball_statistics(inst.pairs, inst.pool, kind);
      if (est.degenerate()) continue;
      EXPECT_EQ(est.s_hat, est.d_hat) << to_string(kind);
      EXPECT_EQ(est.b_hat, 1.0) << to_string(kind);
    }
  }
}

TEST(EstimateB, IndependentInputGivesSmallIndex) {
  const Example1 m{0.0, 0.5, 1.0};
  const auto pairs = pick_freeze(m, input_law(m), {1}, 1000, {3, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 1000, {3, StreamRole::WPool, 0, 0});
  EXPECT_LE(std::abs(estimate_B(pairs, pool, kLine).b_hat), 0.1);
}

TEST(EstimateB, Example1NearClosedForm) {
  const auto m = Example1::standard(0.5, 1.0);
  const auto pairs = pick_freeze(m, input_law(m), {1}, 1000, {4, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 1000, {4, StreamRole::WPool, 0, 0});
  const auto est = estimate_B(pairs, pool, kLine);
  EXPECT_NEAR(est.b_hat, 0.10912, 0.06);
  EXPECT_EQ(est.n_pairs, 1000u);
  EXPECT_EQ(est.n_w, 1000u);
  EXPECT_EQ(est.tau_used, 1000u * 999u / 2u);
}

TEST(EstimateB, RangeOfDenominator) {
  PhiloxStream rng({5, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 10; ++t) {
      const auto inst = testing::random_instance(kind, 25, 25, rng);
      const double d = estimate_D(inst.pairs, inst.pool, kind);
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 0.25);
    }
  }
}

TEST(NaiveEquivalence, SmallRandomInstances) {
  PhiloxStream rng({6, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 15; ++t) {
      const std::size_t n = 2 + rng.below(29);
      const std::size_t nw = 2 + rng.below(29);
      const auto inst = testing::random_instance(kind, n, nw, rng);
      const auto fast = estimate_ball_statistics(inst.pairs, inst.pool, kind);
      const auto naive = naive_estimate_reference(inst.pairs, inst.pool, kind);
      EXPECT_NEAR(fast.s_hat, naive.s, 1e-12) << to_string(kind);
      EXPECT_NEAR(fast.d_hat, naive.d, 1e-12) << to_string(kind);
    }
  }
}

TEST(NaiveEquivalence, SingleTau) {
  const auto pairs = scalar_pairs({{0.5, 2.0}, {1.5, 1.0}, {3.0, 0.0}});
  const auto pool = scalar_pool({0.0, 2.0});
  const auto fast = estimate_ball_statistics(pairs, pool, kLine);
  const auto naive = naive_estimate_reference(pairs, pool, kLine);
  EXPECT_EQ(fast.tau_used, 1u);
  EXPECT_NEAR(fast.s_hat, naive.s, 1e-15);
  EXPECT_NEAR(fast.d_hat, naive.d, 1e-15);
}

TEST(Invariance, PermutationAndThreadsBitwise) {
  PhiloxStream rng({7, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    const auto inst = testing::random_instance(kind, 80, 60, rng);
    const auto base = estimate_ball_statistics(inst.pairs, inst.pool, kind, {}, threads(1));
    auto shuffled = inst;
    std::vector<std::size_t> order(inst.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < order.size(); ++j) {
      shuffled.pairs.z[j] = inst.pairs.z[order[j]];
      shuffled.pairs.z_nu[j] = inst.pairs.z_nu[order[j]];
    }
    std::shuffle(shuffled.pool.points.begin(), shuffled.pool.points.end(), rng);
    const auto perm = estimate_ball_statistics(shuffled.pairs, shuffled.pool, kind, {}, threads(4));
    EXPECT_EQ(base.s_hat, perm.s_hat) << to_string(kind);
    EXPECT_EQ(base.d_hat, perm.d_hat) << to_string(kind);
    EstimatorOptions no_cache;
    no_cache.cache_budget_bytes = 0;
    no_cache.threads = 3;
    const auto uncached = estimate_ball_statistics(inst.pairs, inst.pool, kind, {}, no_cache);
    EXPECT_EQ(base.s_hat, uncached.s_hat) << to_string(kind);
  }
}

TEST(Invariance, IsometryBitwise) {
  PhiloxStream rng({8, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 10; ++t) {
      const auto inst = testing::random_instance(kind, 30, 30, rng);
      const auto moved = testing::transform(inst, kind, testing::random_isometry(kind, rng));
      const auto a = estimate_ball_statistics(inst.pairs, inst.pool, kind);
      const auto b = estimate_ball_statistics(moved.pairs, moved.pool, kind);
      EXPECT_EQ(a.s_hat, b.s_hat) << to_string(kind);
      EXPECT_EQ(a.d_hat, b.d_hat) << to_string(kind);
    }
  }
}

TEST(IncompleteU, LargeBudgetEqualsExact) {
  const auto m = Example1::standard(0.3, 1.0);
  const auto pairs = pick_freeze(m, input_law(m), {1}, 200, {9, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 50, {9, StreamRole::WPool, 0, 0});
  const auto exact = estimate_ball_statistics(pairs, pool, kLine);
  const auto inc = estimate_ball_statistics(pairs, pool, kLine, EstimationMode::incomplete(5000));
  EXPECT_EQ(exact.s_hat, inc.s_hat);
  EXPECT_EQ(exact.d_hat, inc.d_hat);
}

TEST(IncompleteU, DeterministicAndClose) {
  const auto m = Example1::standard(0.5, 1.0);
  const auto pairs = pick_freeze(m, input_law(m), {1}, 1000, {10, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 1000, {10, StreamRole::WPool, 0, 0});
  const auto mode = EstimationMode::incomplete(20000);
  const auto a = estimate_ball_statistics(pairs, pool, kLine, mode);
  const auto b = estimate_ball_statistics(pairs, pool, kLine, mode);
  const auto exact = estimate_ball_statistics(pairs, pool, kLine);
  EXPECT_EQ(a.s_hat, b.s_hat);
  EXPECT_EQ(a.tau_used, 20000u);
  EXPECT_EQ(a.mode.label(), "incomplete:20000");
  EXPECT_NE(a.s_hat, exact.s_hat);
  EXPECT_NEAR(a.b_hat, exact.b_hat, 0.03);
  EXPECT_THROW(EstimationMode::incomplete(0), Error);
}

TEST(IncompleteU, GenericBackendMatchesExactInExpectation) {
  PhiloxStream rng({11, StreamRole::Auxiliary, 0, 0});
  const auto kind = ManifoldKind::circle(2);
  const auto inst = testing::random_instance(kind, 40, 30, rng);
  const auto exact = estimate_ball_statistics(inst.pairs, inst.pool, kind);
  double mean = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    EstimatorOptions opts;
    opts.tau_stream = StreamId{11, StreamRole::Bootstrap, static_cast<std::uint32_t>(r), 1};
    mean += estimate_ball_statistics(inst.pairs, inst.pool, kind, EstimationMode::incomplete(100), opts).s_hat;
  }
  EXPECT_NEAR(mean / reps, exact.s_hat, 0.01);
}

TEST(Antipodal, DroppedTauAreReported) {
  const auto kind = ManifoldKind::circle(2);
  PickFreezeSample pairs;
  pairs.nu = {1};
  for (double a : {0.1, 0.7, 2.0, -1.0}) {
    pairs.z.push_back(circle_point(a));
    pairs.z_nu.push_back(circle_point(a + 0.2));
  }
  WPool pool{{circle_point(0.0), circle_point(pi), circle_point(pi / 2)}};
  const auto est = estimate_ball_statistics(pairs, pool, kind);
  EXPECT_EQ(est.tau_used, 2u);
  EXPECT_EQ(est.tau_dropped, 1u);
  EXPECT_FALSE(est.warnings.empty());

  WPool antipodes{{circle_point(0.0), circle_point(pi)}};
  try {
    estimate_ball_statistics(pairs, antipodes, kind);
    FAIL() << "expected DegenerateBalls";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBalls);
  }
}

TEST(Cvm, Example1NearClosedForm) {
  const auto m = Example1::standard(0.5, 1.0);
  const auto pairs = pick_freeze(m, input_law(m), {1}, 2000, {12, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 2000, {12, StreamRole::WPool, 0, 0});
  EXPECT_NEAR(estimate_cvm(pairs, pool).b_hat, 0.3075, 0.05);
}

TEST(Cvm, ScalarQuadrantIsHalfLine) {
  // p = 1: the quadrant kernel is 1{z <= w}; compare with a direct sum.
  const auto pairs = scalar_pairs({{0.1, 0.4}, {0.9, 0.8}, {0.5, 0.2}, {0.3, 0.3}});
  const auto pool = scalar_pool({0.25, 0.6, 0.85});
  double s = 0.0, d = 0.0;
  for (double w : {0.25, 0.6, 0.85}) {
    double g = 0.0, j = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double h = std::get<Scalar>(pairs.z[k]).value <= w ? 1.0 : 0.0;
      const double hn = std::get<Scalar>(pairs.z_nu[k]).value <= w ? 1.0 : 0.0;
      g += h * hn;
      j += 0.5 * (h + hn);
    }
    g /= 4.0;
    j /= 4.0;
    s += g - j * j;
    d += j - j * j;
  }
  const auto est = estimate_cvm_statistics(pairs, pool);
  EXPECT_NEAR(est.s_hat, s / 3.0, 1e-15);
  EXPECT_NEAR(est.d_hat, d / 3.0, 1e-15);
}

TEST(Cvm, Example3IsDegenerate) {
  const Example3 m{2.0};
  const auto pairs = pick_freeze(m, input_law(m), {1}, 300, {13, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, input_law(m), 300, {13, StreamRole::WPool, 0, 0});
  const auto est = estimate_cvm_statistics(pairs, pool);
  EXPECT_EQ(est.s_hat, 0.0);
  EXPECT_EQ(est.d_hat, 0.0);
  EXPECT_THROW(estimate_cvm(pairs, pool), Error);
}

TEST(Degenerate, ConstantModel) {
  const Custom m{"constant", DistributionSpec{{Uniform{}, Uniform{}}}, kLine,
                 [](std::span<const double>) -> ManifoldPoint { return Scalar{1.0}; }};
  const auto pairs = pick_freeze(m, m.inputs, {1}, 100, {14, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(m, m.inputs, 100, {14, StreamRole::WPool, 0, 0});
  try {
    estimate_B(pairs, pool, kLine);
    FAIL() << "expected DegenerateDenominator";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDenominator);
  }
  const auto est = estimate_ball_statistics(pairs, pool, kLine);
  EXPECT_TRUE(std::isfinite(est.s_hat));
  EXPECT_TRUE(std::isfinite(est.d_hat));
  EXPECT_THROW(estimate_cvm(pairs, pool), Error);
}

TEST(Cvm, SpdHasNoEmbedding) { EXPECT_THROW(default_embedding(Spd{Eigen::MatrixXd::Identity(2, 2)}), Error); }

TEST(PickFreezeT, Examples) {
  const std::vector<double> c{3.0, 3.0, 3.0};
  EXPECT_DOUBLE_EQ(pick_freeze_variance_T(c, c), 0.0);
  EXPECT_DOUBLE_EQ(pick_freeze_variance_T(std::vector<double>{1, -1}, std::vector<double>{1, -1}), 1.0);
  EXPECT_DOUBLE_EQ(pick_freeze_variance_T(std::vector<double>{1, -1}, std::vector<double>{-1, 1}), -1.0);
  EXPECT_DOUBLE_EQ(pick_freeze_variance_T(scalar_pairs({{1, 1}, {-1, -1}})), 1.0);
}

TEST(Preconditions, SizesChecked) {
  EXPECT_THROW(estimate_S(scalar_pairs({{1, 1}}), scalar_pool({0, 2}), kLine), Error);
  EXPECT_THROW(estimate_S(scalar_pairs({{1, 1}, {2, 2}}), scalar_pool({0}), kLine), Error);
}

} // namespace
} // namespace geosens
