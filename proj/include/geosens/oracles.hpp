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

#ifndef GEOSENS_ORACLES_HPP
#define GEOSENS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "manifold.hpp"
#include "models.hpp"

namespace geosens {

// --- Example 1 closed form ----------------------------------------------------

struct Example1Truth {
  double b1 = 0.0;     // ball index of X1
  double c1 = 0.0;     // Cramér-von Mises index of X1
  double s1 = 0.0;     // ball numerator
  double d1_cvm = 0.0; // Cramér-von Mises denominator
};

/// Z = alpha X1 + X2, X1 ~ Bernoulli(p), X2 ~ U(0, b), with r = alpha / b:
///   B1 = 12 p(1-p) { r^3 (1/3 - r/4)  if r <= 1;  1/12  otherwise }
///   C1 =  6 p(1-p) { r^2 (1 - 2r/3)    if r <= 1;  1/3   otherwise }
/// Both denominators equal 1/6 because Z has a continuous law.
inline Example1Truth closed_form_example1(double p, double alpha, double b) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidSpec, "p must lie in [0,1]");
  if (!(alpha >= 0.0 && b > 0.0)) fail(ErrorCode::InvalidSpec, "alpha must be >= 0 and b > 0");
  const double r = alpha / b;
  const double q = p * (1.0 - p);
  const double var = r <= 1.0 ? r * r * r * (1.0 / 3.0 - 0.25 * r) : 1.0 / 12.0;
  const double second = r <= 1.0 ? r * r * (1.0 - 2.0 * r / 3.0) : 1.0 / 3.0;
  Example1Truth out;
  out.b1 = 12.0 * q * var;
  out.c1 = 6.0 * q * second;
  out.s1 = 2.0 * q * var;
  out.d1_cvm = 1.0 / 6.0;
  return out;
}

/// Midpoint-rule evaluation of the ball and Cramér-von Mises indices of X1
/// straight from their definitions (conditional CDFs of Z given X1).
inline Example1Truth quadrature_index_example1(double p, double alpha, double b, std::size_t resolution) {
  if (resolution < 1000) fail(ErrorCode::InvalidSpec, "quadrature needs resolution >= 1000");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidSpec, "p must lie in [0,1]");
  if (!(alpha >= 0.0 && b > 0.0)) fail(ErrorCode::InvalidSpec, "alpha must be >= 0 and b > 0");
  const auto m = resolution;
  auto f2 = [b](double z) { return std::clamp(z / b, 0.0, 1.0); };
  auto cdf_given = [&](double z, int x1) { return f2(z - alpha * x1); };
  auto cdf = [&](double z) { return (1.0 - p) * cdf_given(z, 0) + p * cdf_given(z, 1); };

  // nodes of the law of Z: (x1, midpoint of X2) with weights
  std::vector<double> z, w;
  z.reserve(2 * m);
  w.reserve(2 * m);
  for (int x1 = 0; x1 <= 1; ++x1) {
    const double px = x1 == 1 ? p : 1.0 - p;
    if (px == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      z.push_back(alpha * x1 + b * (static_cast<double>(i) + 0.5) / static_cast<double>(m));
      w.push_back(px / static_cast<double>(m));
    }
  }
  std::vector<double> f(z.size()), f0(z.size()), f1(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    f[i] = cdf(z[i]);
    f0[i] = cdf_given(z[i], 0);
    f1[i] = cdf_given(z[i], 1);
  }

  double s = 0.0, d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double h = std::abs(f[j] - f[i]);
      const double h0 = std::abs(f0[j] - f0[i]);
      const double h1 = std::abs(f1[j] - f1[i]);
      const double wij = w[i] * w[j];
      s += wij * ((1.0 - p) * (h0 - h) * (h0 - h) + p * (h1 - h) * (h1 - h));
      d += wij * h * (1.0 - h);
    }
  }
  double sc = 0.0, dc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sc += w[i] * ((1.0 - p) * (f0[i] - f[i]) * (f0[i] - f[i]) + p * (f1[i] - f[i]) * (f1[i] - f[i]));
    dc += w[i] * f[i] * (1.0 - f[i]);
  }
  Example1Truth out;
  out.s1 = s;
  out.b1 = d > 0.0 ? s / d : 0.0;
  out.c1 = dc > 0.0 ? sc / dc : 0.0;
  out.d1_cvm = dc;
  return out;
}

// --- finite discrete models ----------------------------------------------------

/// Independent finite inputs; `outputs` lists f over the grid in row-major
/// order (last coordinate fastest).
struct DiscreteModel {
  std::vector<std::vector<double>> weights; // per coordinate, sums to 1
  std::vector<ManifoldPoint> outputs;
  ManifoldKind kind;

  std::size_t cells() const {
    std::size_t c = 1;
    for (const auto& w : weights) c *= w.size();
    return c;
  }

  void validate() const {
    if (weights.empty()) fail(ErrorCode::InvalidSpec, "discrete model has no inputs");
    for (const auto& w : weights) {
      if (w.empty()) fail(ErrorCode::InvalidSpec, "empty input grid");
      double sum = 0.0;
      for (double v : w) {
        if (!(v >= 0.0)) fail(ErrorCode::InvalidSpec, "negative grid weight");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) fail(ErrorCode::InvalidSpec, "grid weights do not sum to 1");
    }
    if (outputs.size() != cells()) fail(ErrorCode::InvalidSpec, "output table size does not match the grid");
    for (const auto& o : outputs) {
      if (auto err = validate_point(kind, o)) fail(ErrorCode::InvalidPoint, *err);
    }
  }

  /// Flat cell index of a multi-index.
  std::size_t cell(const std::vector<std::size_t>& idx) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) c = c * weights[i].size() + idx[i];
    return c;
  }
};

struct PopulationIndex {
  double s = 0.0;
  double d = 0.0;
  std::optional<double> b; // undefined when d == 0
  std::size_t dropped_pairs = 0; // (z1, z2) without a unique geodesic
};

inline constexpr std::size_t kMaxEnumerationCells = 10000;

/// S, D and B of a discrete model by summing over every (z1, z2) ball and
/// every value of the frozen inputs.
inline PopulationIndex enumerate_population_index(const DiscreteModel& dm, IndexSet nu) {
  if (dm.cells() > kMaxEnumerationCells) {
    fail(ErrorCode::GridTooLarge, std::to_string(dm.cells()) + " cells exceed the enumeration limit");
  }
  dm.validate();
  const std::size_t dim = dm.weights.size();
  nu = checked_index_set(std::move(nu), dim);
  std::vector<bool> frozen(dim, false);
  for (int i : nu) frozen[static_cast<std::size_t>(i - 1)] = true;

  // per cell: probability, frozen-group id, distinct output id
  const std::size_t cells = dm.cells();
  std::vector<double> prob(cells);
  std::vector<std::size_t> group(cells);
  std::vector<std::size_t> idx(dim, 0);
  std::size_t n_groups = 1;
  for (std::size_t i = 0; i < dim; ++i) {
    if (frozen[i]) n_groups *= dm.weights[i].size();
  }
  for (std::size_t c = 0; c < cells; ++c) {
    double pr = 1.0;
    std::size_t g = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      pr *= dm.weights[i][idx[i]];
      if (frozen[i]) g = g * dm.weights[i].size() + idx[i];
    }
    prob[c] = pr;
    group[c] = g;
    for (std::size_t i = dim; i-- > 0;) {
      if (++idx[i] < dm.weights[i].size()) break;
      idx[i] = 0;
    }
  }

  return with_backend(dm.kind, [&](const auto& b) {
    using Point = typename std::decay_t<decltype(b)>::Point;
    std::vector<Point> values;
    std::vector<std::size_t> value_of(cells);
    for (std::size_t c = 0; c < cells; ++c) {
      Point p = b.load(dm.outputs[c]);
      std::size_t found = values.size();
      for (std::size_t v = 0; v < values.size(); ++v) {
        if (b.equal(values[v], p)) {
          found = v;
          break;
        }
      }
      if (found == values.size()) values.push_back(std::move(p));
      value_of[c] = found;
    }
    const std::size_t nv = values.size();
    std::vector<double> pz(nv, 0.0);                   // P(Z = v)
    std::vector<double> pg(n_groups, 0.0);             // P(X_nu = g)
    std::vector<double> pzg(n_groups * nv, 0.0);       // P(Z = v, X_nu = g)
    for (std::size_t c = 0; c < cells; ++c) {
      pz[value_of[c]] += prob[c];
      pg[group[c]] += prob[c];
      pzg[group[c] * nv + value_of[c]] += prob[c];
    }

    double s = 0.0, d = 0.0, mass = 0.0;
    std::size_t dropped = 0;
    std::vector<int> h(nv);
    for (std::size_t v1 = 0; v1 < nv; ++v1) {
      for (std::size_t v2 = 0; v2 < nv; ++v2) {
        const double w12 = pz[v1] * pz[v2];
        if (w12 == 0.0) continue;
        std::optional<typename std::decay_t<decltype(b)>::Ball> ball;
        try {
          ball.emplace(b.ball(values[v1], values[v2]));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AntipodalPoints) throw;
          ++dropped;
          continue;
        }
        double hz = 0.0;
        for (std::size_t v = 0; v < nv; ++v) {
          h[v] = b.contains(*ball, values[v]) ? 1 : 0;
          hz += pz[v] * h[v];
        }
        double var_cond = 0.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
          if (pg[g] == 0.0) continue;
          double hg = 0.0;
          for (std::size_t v = 0; v < nv; ++v) hg += pzg[g * nv + v] * h[v];
          hg /= pg[g];
          var_cond += pg[g] * (hg - hz) * (hg - hz);
        }
        s += w12 * var_cond;
        d += w12 * hz * (1.0 - hz);
        mass += w12;
      }
    }
    if (mass == 0.0) fail(ErrorCode::DegenerateBalls, "every output pair is antipodal");
    PopulationIndex out;
    out.s = s / mass;
    out.d = d / mass;
    out.dropped_pairs = dropped;
    if (out.d > 0.0) out.b = out.s / out.d;
    return out;
  });
}

/// Samples a DiscreteModel: each coordinate is a Uniform(0,1) draw mapped to
/// its grid by the inverse CDF.
inline Custom as_model(const DiscreteModel& dm, std::string name = "discrete") {
  dm.validate();
  auto shared = std::make_shared<const DiscreteModel>(dm);
  DistributionSpec inputs;
  for (std::size_t i = 0; i < dm.weights.size(); ++i) inputs.laws.push_back(Uniform{0.0, 1.0});
  Custom out{std::move(name), std::move(inputs), dm.kind, nullptr};
  out.evaluate = [shared](std::span<const double> u) -> ManifoldPoint {
    std::size_t c = 0;
    for (std::size_t i = 0; i < shared->weights.size(); ++i) {
      const auto& w = shared->weights[i];
      double acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < w.size(); ++k) {
        acc += w[k];
        if (u[i] < acc) break;
      }
      c = c * w.size() + k;
    }
    return shared->outputs[c];
  };
  return out;
}

// --- naive reference estimator ------------------------------------------------

struct NaiveEstimate {
  double s = 0.0;
  double d = 0.0;
};

inline constexpr std::size_t kMaxNaiveSize = 50;

/// Literal double/triple sums over (j, i, tau):
///   S = 1/(N T) sum_tau sum_j G_j - 1/(N^2 T) sum_tau sum_i sum_j J_i J_j
///   D = 1/(N T) sum_tau sum_j J_j - 1/(N^2 T) sum_tau sum_i sum_j J_i J_j
/// over the T pairs tau with a unique geodesic.
inline NaiveEstimate naive_estimate_reference(const PickFreezeSample& pairs, const WPool& pool,
                                              const ManifoldKind& kind) {
  const std::size_t n = pairs.size();
  const std::size_t nw = pool.size();
  if (n > kMaxNaiveSize || nw > kMaxNaiveSize) fail(ErrorCode::TooLarge, "naive reference is limited to N, Nw <= 50");
  if (n < 2 || nw < 2) fail(ErrorCode::TooFewSamples, "need N >= 2 and Nw >= 2");
  double sum_g = 0.0, sum_j = 0.0, sum_h = 0.0;
  std::size_t tau_count = 0;
  std::vector<double> jv(n);
  for (std::size_t k1 = 0; k1 < nw; ++k1) {
    for (std::size_t k2 = k1 + 1; k2 < nw; ++k2) {
      const auto& w1 = pool.points[k1];
      const auto& w2 = pool.points[k2];
      try {
        for (std::size_t j = 0; j < n; ++j) {
          const double h = ball_contains(kind, w1, w2, pairs.z[j]) ? 1.0 : 0.0;
          const double h_nu = ball_contains(kind, w1, w2, pairs.z_nu[j]) ? 1.0 : 0.0;
          sum_g += h * h_nu;
          jv[j] = 0.5 * (h + h_nu);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AntipodalPoints) throw;
        continue;
      }
      for (std::size_t j = 0; j < n; ++j) sum_j += jv[j];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sum_h += jv[i] * jv[j];
      }
      ++tau_count;
    }
  }
  if (tau_count == 0) fail(ErrorCode::DegenerateBalls, "every W pair failed geodesic uniqueness");
  const double t = static_cast<double>(tau_count);
  const double nn = static_cast<double>(n);
  NaiveEstimate out;
  out.s = sum_g / (nn * t) - sum_h / (nn * nn * t);
  out.d = sum_j / (nn * t) - sum_h / (nn * nn * t);
  return out;
}

} // namespace geosens

#endif // GEOSENS_ORACLES_HPP
