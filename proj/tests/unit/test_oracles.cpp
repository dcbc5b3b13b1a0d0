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
#include <vector>

#include <gtest/gtest.h>

#include "geosens/estimators.hpp"
#include "geosens/oracles.hpp"
#include "test_support.hpp"

namespace geosens {
namespace {

TEST(ClosedForm, CentralCase) {
  const auto t = closed_form_example1(0.5, 1.0, std::sqrt(3.0));
  const double s3 = std::sqrt(3.0);
  EXPECT_NEAR(t.b1, 3.0 * std::pow(3.0, -1.5) * (1.0 / 3.0 - 1.0 / (4.0 * s3)), 1e-15);
  EXPECT_NEAR(t.b1, 0.10912, 5e-6);
  EXPECT_NEAR(t.c1, 1.5 * (1.0 / 3.0) * (1.0 - 2.0 / (3.0 * s3)), 1e-15);
  EXPECT_NEAR(t.c1, 0.30755, 5e-6);
  EXPECT_DOUBLE_EQ(t.d1_cvm, 1.0 / 6.0);
}

TEST(ClosedForm, WideBranch) {
  const double alpha = 1.0;
  const double b = std::sqrt(12.0 * 0.05 * 0.95) * alpha;
  ASSERT_LT(b, alpha);
  EXPECT_NEAR(closed_form_example1(0.05, alpha, b).b1, 0.0475, 1e-15);
}

TEST(ClosedForm, DegenerateP) {
  for (double p : {0.0, 1.0}) {
    const auto t = closed_form_example1(p, 1.0, 1.0);
    EXPECT_EQ(t.b1, 0.0);
    EXPECT_EQ(t.c1, 0.0);
  }
  EXPECT_THROW(closed_form_example1(1.5, 1.0, 1.0), Error);
}

TEST(Quadrature, MatchesClosedFormOnGrid) {
  for (int i = 1; i <= 9; ++i) {
    const double p = 0.1 * i;
    for (double r : {0.2, 0.5, 0.8, 1.0, 1.6}) {
      const auto q = quadrature_index_example1(p, r, 1.0, 1000);
      const auto c = closed_form_example1(p, r, 1.0);
      EXPECT_NEAR(q.b1, c.b1, 1e-4) << p << " " << r;
      EXPECT_NEAR(q.c1, c.c1, 1e-4) << p << " " << r;
    }
  }
}

TEST(Quadrature, Limits) {
  EXPECT_NEAR(quadrature_index_example1(0.3, 0.0, 1.0, 1000).b1, 0.0, 1e-12);
  EXPECT_NEAR(quadrature_index_example1(0.3, 50.0, 1.0, 1000).b1, 0.3 * 0.7, 1e-4);
  EXPECT_THROW(quadrature_index_example1(0.3, 1.0, 1.0, 999), Error);
}

DiscreteModel two_by_two() {
  DiscreteModel dm;
  dm.weights = {{0.5, 0.5}, {0.5, 0.5}};
  dm.kind = ManifoldKind::real_line();
  for (int x1 = 0; x1 <= 1; ++x1) {
    for (int x2 = 0; x2 <= 1; ++x2) dm.outputs.push_back(Scalar{2.0 * x1 + x2});
  }
  return dm;
}

TEST(Enumeration, InvariantsOnRandomModels) {
  PhiloxStream rng({21, StreamRole::Auxiliary, 0, 0});
  for (const auto& kind : testing::ball_backends()) {
    for (int t = 0; t < 25; ++t) {
      const auto dm = testing::random_discrete(kind, rng);
      for (int nu = 1; nu <= static_cast<int>(dm.weights.size()); ++nu) {
        const auto pop = enumerate_population_index(dm, {nu});
        EXPECT_GE(pop.s, -1e-15);
        EXPECT_LE(pop.s, pop.d + 1e-15);
        EXPECT_LE(pop.d, 0.25 + 1e-15);
        if (pop.b) {
          EXPECT_GE(*pop.b, -1e-12);
          EXPECT_LE(*pop.b, 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST(Enumeration, DeterministicGivesOne) {
  auto dm = two_by_two();
  for (int x1 = 0; x1 <= 1; ++x1) {
    for (int x2 = 0; x2 <= 1; ++x2) dm.outputs[dm.cell({static_cast<std::size_t>(x1), static_cast<std::size_t>(x2)})] = Scalar{static_cast<double>(x1)};
  }
  const auto pop = enumerate_population_index(dm, {1});
  ASSERT_TRUE(pop.b.has_value());
  EXPECT_DOUBLE_EQ(*pop.b, 1.0);
}

TEST(Enumeration, ConstantHasNoIndex) {
  auto dm = two_by_two();
  for (auto& o : dm.outputs) o = Scalar{1.0};
  const auto pop = enumerate_population_index(dm, {1});
  EXPECT_EQ(pop.s, 0.0);
  EXPECT_EQ(pop.d, 0.0);
  EXPECT_FALSE(pop.b.has_value());
}

TEST(Enumeration, GridLimit) {
  DiscreteModel dm;
  dm.kind = ManifoldKind::real_line();
  dm.weights = {std::vector<double>(101, 1.0 / 101), std::vector<double>(100, 0.01)};
  dm.outputs.assign(dm.cells(), Scalar{0.0});
  try {
    enumerate_population_index(dm, {1});
    FAIL() << "expected GridTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooLarge);
  }
}

TEST(Enumeration, TwoByTwoAgreesWithEstimator) {
  const auto dm = two_by_two();
  const auto pop = enumerate_population_index(dm, {1});
  const auto model = as_model(dm);
  const auto kind = ManifoldKind::real_line();
  std::vector<double> s_hat, d_hat;
  for (std::uint32_t r = 0; r < 20; ++r) {
    const auto pairs = pick_freeze(model, model.inputs, {1}, 100000, {22, StreamRole::Pairs, r, 0});
    const auto pool = sample_w_pool(model, model.inputs, 2000, {22, StreamRole::WPool, r, 0});
    const auto est = estimate_ball_statistics(pairs, pool, kind);
    s_hat.push_back(est.s_hat);
    d_hat.push_back(est.d_hat);
  }
  auto sd = [](const std::vector<double>& v) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  EXPECT_LE(std::abs(s_hat[0] - pop.s), 3.0 * sd(s_hat));
  EXPECT_LE(std::abs(d_hat[0] - pop.d), 3.0 * sd(d_hat));
}

TEST(Naive, LimitsAndHandInstance) {
  PickFreezeSample pairs;
  pairs.nu = {1};
  pairs.z = {Scalar{1.0}, Scalar{5.0}};
  pairs.z_nu = {Scalar{1.0}, Scalar{2.0}};
  const WPool pool{{Scalar{0.0}, Scalar{4.0}}};
  const auto est = naive_estimate_reference(pairs, pool, ManifoldKind::real_line());
  EXPECT_DOUBLE_EQ(est.s, -0.0625);
  EXPECT_DOUBLE_EQ(est.d, 0.1875);
  PickFreezeSample big;
  big.nu = {1};
  big.z.assign(51, Scalar{0.0});
  big.z_nu.assign(51, Scalar{0.0});
  EXPECT_THROW(naive_estimate_reference(big, pool, ManifoldKind::real_line()), Error);
}

} // namespace
} // namespace geosens
