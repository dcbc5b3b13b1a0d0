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


// Ball index of X1 for Z = X1 + X2 with X1 ~ Bernoulli(1/2), X2 ~ U(0, sqrt 3),
// compared with its closed form.

#include <cstdio>

#include "geosens/estimators.hpp"
#include "geosens/inference.hpp"
#include "geosens/models.hpp"
#include "geosens/oracles.hpp"

int main() {
  using namespace geosens;
  const auto model = Example1::standard(0.5, 1.0);
  const auto law = input_law(model);
  const auto pairs = pick_freeze(model, law, {1}, 1000, {42, StreamRole::Pairs, 0, 0});
  const auto pool = sample_w_pool(model, law, 1000, {42, StreamRole::WPool, 0, 0});

  const auto ball = analyze_ball(pairs, pool, output_kind(model), 200, 0.95);
  const auto cvm = analyze_cvm(pairs, pool, 200, 0.95);
  const auto truth = closed_form_example1(model.p, model.alpha, model.b);

  std::printf("B1 estimate %.4f  95%% CI [%.4f, %.4f]  closed form %.4f\n", ball.estimate.b_hat, ball.ci->lower,
              ball.ci->upper, truth.b1);
  std::printf("C1 estimate %.4f  95%% CI [%.4f, %.4f]  closed form %.4f\n", cvm.estimate.b_hat, cvm.ci->lower,
              cvm.ci->upper, truth.c1);
}
