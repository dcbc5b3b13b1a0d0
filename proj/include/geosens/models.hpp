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

#ifndef GEOSENS_MODELS_HPP
#define GEOSENS_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "manifold.hpp"
#include "rng.hpp"

namespace geosens {

// --- input laws ---------------------------------------------------------------

struct Bernoulli {
  double p = 0.5;
};
struct Uniform {
  double a = 0.0;
  double b = 1.0;
};
struct Normal {
  double mean = 0.0;
  double variance = 1.0;
};
/// Gamma(shape k, scale theta): mean k theta, variance k theta^2.
struct Gamma {
  double shape = 1.0;
  double scale = 1.0;
};

using Law = std::variant<Bernoulli, Uniform, Normal, Gamma>;

/// Product law P_1 x ... x P_d of independent inputs.
struct DistributionSpec {
  std::vector<Law> laws;

  std::size_t dimension() const { return laws.size(); }

  void validate() const {
    if (laws.empty()) fail(ErrorCode::InvalidSpec, "distribution has no coordinates");
    for (const auto& law : laws) {
      std::visit(overloaded{
                     [](const Bernoulli& l) {
                       if (!(l.p >= 0.0 && l.p <= 1.0)) fail(ErrorCode::InvalidSpec, "Bernoulli p outside [0,1]");
                     },
                     [](const Uniform& l) {
                       if (!(l.b > l.a)) fail(ErrorCode::InvalidSpec, "Uniform needs b > a");
                     },
                     [](const Normal& l) {
                       if (!(l.variance > 0.0)) fail(ErrorCode::InvalidSpec, "Normal variance must be > 0");
                     },
                     [](const Gamma& l) {
                       if (!(l.shape > 0.0 && l.scale > 0.0)) {
                         fail(ErrorCode::InvalidSpec, "Gamma shape and scale must be > 0");
                       }
                     },
                 },
                 law);
    }
  }
};

/// Draws input vectors coordinate by coordinate from one stream.
class InputSampler {
public:
  explicit InputSampler(const DistributionSpec& dist) {
    dist.validate();
    samplers_.reserve(dist.laws.size());
    for (const auto& law : dist.laws) {
      samplers_.push_back(std::visit(
          overloaded{
              [](const Bernoulli& l) -> Coord { return std::bernoulli_distribution(l.p); },
              [](const Uniform& l) -> Coord { return std::uniform_real_distribution<double>(l.a, l.b); },
              [](const Normal& l) -> Coord { return std::normal_distribution<double>(l.mean, std::sqrt(l.variance)); },
              [](const Gamma& l) -> Coord { return std::gamma_distribution<double>(l.shape, l.scale); },
          },
          law));
    }
  }

  std::size_t dimension() const { return samplers_.size(); }

  void draw(PhiloxStream& rng, std::span<double> out) {
    for (std::size_t i = 0; i < samplers_.size(); ++i) {
      out[i] = std::visit([&](auto& d) { return static_cast<double>(d(rng)); }, samplers_[i]);
    }
  }

private:
  using Coord = std::variant<std::bernoulli_distribution, std::uniform_real_distribution<double>,
                             std::normal_distribution<double>, std::gamma_distribution<double>>;
  std::vector<Coord> samplers_;
};

/// n x d matrix of i.i.d. rows from the product law.
inline Eigen::MatrixXd sample_inputs(const DistributionSpec& dist, std::size_t n, PhiloxStream& rng) {
  if (n < 1) fail(ErrorCode::InvalidSpec, "sample_inputs needs n >= 1");
  InputSampler sampler(dist);
  const auto d = sampler.dimension();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    sampler.draw(rng, row);
    for (std::size_t k = 0; k < d; ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return out;
}

// --- models -------------------------------------------------------------------

/// Z = alpha X1 + X2, X1 ~ Bernoulli(p), X2 ~ U(0, b).
struct Example1 {
  double alpha = 1.0;
  double p = 0.5;
  double b = 1.0;

  /// b = sqrt(12 alpha^2 p (1 - p)), so that Var(X2) = alpha^2 p (1 - p).
  static Example1 standard(double p, double alpha) {
    return {alpha, p, std::sqrt(12.0 * alpha * alpha * p * (1.0 - p))};
  }
};

/// Z = X / |X| on the circle, X ~ N((mu1, mu2), diag(sigma1sq, sigma2sq)).
struct Example2 {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double sigma1sq = 1.0;
  double sigma2sq = 1.0;
};

/// Z = (X + Y, 1/X, X/(X + Y)) on xyz = 1, X, Y i.i.d. Gamma(mu1, 1).
struct Example3 {
  double mu1 = 1.0;
};

enum class StiffnessCase { GammaCase, UniformCase };

/// 6x6 isotropic stiffness matrix; inputs ordered (mu, K) so that input 1 is
/// the shear modulus.
struct Stiffness {
  StiffnessCase which = StiffnessCase::GammaCase;
  double lambda_k = 0.1;
  double lambda_mu = 0.1;
};

/// User model: `evaluate` maps an input vector of `inputs.dimension()`
/// coordinates to a point of `output`.
struct Custom {
  std::string name;
  DistributionSpec inputs;
  ManifoldKind output;
  std::function<ManifoldPoint(std::span<const double>)> evaluate;
};

using ModelSpec = std::variant<Example1, Example2, Example3, Stiffness, Custom>;

/// Modulus draws at or below this are rejected (keeps stiffness outputs SPD).
inline constexpr double kStiffnessFloor = 1e-10;

inline DistributionSpec input_law(const ModelSpec& model) {
  return std::visit(
      overloaded{
          [](const Example1& m) { return DistributionSpec{{Bernoulli{m.p}, Uniform{0.0, m.b}}}; },
          [](const Example2& m) {
            return DistributionSpec{{Normal{m.mu1, m.sigma1sq}, Normal{m.mu2, m.sigma2sq}}};
          },
          [](const Example3& m) { return DistributionSpec{{Gamma{m.mu1, 1.0}, Gamma{m.mu1, 1.0}}}; },
          [](const Stiffness& m) {
            if (m.which == StiffnessCase::GammaCase) {
              return DistributionSpec{{Gamma{1.0 / m.lambda_mu, m.lambda_mu}, Gamma{1.0 / m.lambda_k, m.lambda_k}}};
            }
            return DistributionSpec{{Uniform{1.0 - m.lambda_mu, 1.0 + m.lambda_mu},
                                     Uniform{1.0 - m.lambda_k, 1.0 + m.lambda_k}}};
          },
          [](const Custom& m) { return m.inputs; },
      },
      model);
}

inline ManifoldKind output_kind(const ModelSpec& model) {
  return std::visit(overloaded{
                        [](const Example1&) { return ManifoldKind::real_line(); },
                        [](const Example2&) { return ManifoldKind::circle(2); },
                        [](const Example3&) { return ManifoldKind::log_surface(); },
                        [](const Stiffness&) { return ManifoldKind::spd(6); },
                        [](const Custom& m) { return m.output; },
                    },
                    model);
}

inline void validate_model(const ModelSpec& model) {
  std::visit(overloaded{
                 [](const Example1& m) {
                   if (!(m.alpha >= 0.0)) fail(ErrorCode::InvalidSpec, "Example1 needs alpha >= 0");
                 },
                 [](const Example2&) {},
                 [](const Example3& m) {
                   if (!(m.mu1 > 0.0)) fail(ErrorCode::InvalidSpec, "Example3 needs mu1 > 0");
                 },
                 [](const Stiffness& m) {
                   if (!(m.lambda_k > 0.0 && m.lambda_mu > 0.0)) {
                     fail(ErrorCode::InvalidSpec, "Stiffness needs lambda_k, lambda_mu > 0");
                   }
                 },
                 [](const Custom& m) {
                   if (!m.evaluate) fail(ErrorCode::InvalidSpec, "custom model has no evaluation hook");
                 },
             },
             model);
  input_law(model).validate();
}

/// Stiffness matrix with volumetric modulus K and shear modulus mu.
inline Eigen::MatrixXd stiffness_matrix(double k, double mu) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) z(i, j) = (i == j) ? k + 4.0 * mu / 3.0 : k - 2.0 * mu / 3.0;
    z(i + 3, i + 3) = mu;
  }
  return z;
}

inline ManifoldPoint evaluate_model(const ModelSpec& model, std::span<const double> x) {
  auto need = [&](std::size_t d) {
    if (x.size() != d) fail(ErrorCode::InvalidSpec, "input vector has wrong dimension");
  };
  return std::visit(
      overloaded{
          [&](const Example1& m) -> ManifoldPoint {
            need(2);
            return Scalar{m.alpha * x[0] + x[1]};
          },
          [&](const Example2&) -> ManifoldPoint {
            need(2);
            const double norm = std::hypot(x[0], x[1]);
            if (!(norm >= 1e-12)) fail(ErrorCode::DegenerateInput, "Example2 input too close to the origin");
            Eigen::VectorXd v(2);
            v << x[0] / norm, x[1] / norm;
            return UnitVector{std::move(v)};
          },
          [&](const Example3&) -> ManifoldPoint {
            need(2);
            const double a = x[0];
            const double s = x[0] + x[1];
            if (!(a > 0.0) || !(x[1] >= 0.0)) fail(ErrorCode::DegenerateInput, "Example3 needs X > 0");
            const double inv = 1.0 / a;
            if (!std::isfinite(inv) || !std::isfinite(s)) {
              fail(ErrorCode::DegenerateInput, "Example3 output overflows");
            }
            return LogSurface{{s, inv, a / s}};
          },
          [&](const Stiffness&) -> ManifoldPoint {
            need(2);
            const double mu = x[0];
            const double k = x[1];
            if (!(k > kStiffnessFloor) || !(mu > kStiffnessFloor)) {
              fail(ErrorCode::DegenerateInput, "stiffness moduli must be positive");
            }
            return Spd{stiffness_matrix(k, mu)};
          },
          [&](const Custom& m) -> ManifoldPoint {
            need(m.inputs.dimension());
            return m.evaluate(x);
          },
      },
      model);
}

// --- pick-freeze sampling --------------------------------------------------------

/// 1-based input labels, sorted and unique.
using IndexSet = std::vector<int>;

inline IndexSet checked_index_set(IndexSet nu, std::size_t d) {
  std::sort(nu.begin(), nu.end());
  if (nu.empty()) fail(ErrorCode::InvalidNu, "frozen index set is empty");
  if (std::adjacent_find(nu.begin(), nu.end()) != nu.end()) fail(ErrorCode::InvalidNu, "repeated index");
  if (nu.front() < 1 || nu.back() > static_cast<int>(d)) fail(ErrorCode::InvalidNu, "index outside 1..d");
  if (nu.size() == d) fail(ErrorCode::InvalidNu, "freezing every input leaves nothing to resample");
  return nu;
}

/// N aligned pairs (Z_j, Z_j^nu): Z_j^nu shares the inputs in nu with Z_j and
/// redraws the rest.
struct PickFreezeSample {
  IndexSet nu;
  std::vector<ManifoldPoint> z;
  std::vector<ManifoldPoint> z_nu;
  StreamId stream{0, StreamRole::Pairs, 0, 0};

  std::size_t size() const { return z.size(); }
};

/// Independent copies of Z indexing the geodesic balls.
struct WPool {
  std::vector<ManifoldPoint> points;
  StreamId stream{0, StreamRole::WPool, 0, 0};

  std::size_t size() const { return points.size(); }
};

inline constexpr int kMaxRejectionsPerDraw = 100;

inline PickFreezeSample pick_freeze(const ModelSpec& model, const DistributionSpec& dist, IndexSet nu,
                                    std::size_t n, const StreamId& stream) {
  validate_model(model);
  const std::size_t d = dist.dimension();
  nu = checked_index_set(std::move(nu), d);
  if (n < 2) fail(ErrorCode::TooFewSamples, "pick-freeze needs N >= 2");

  std::vector<bool> frozen(d, false);
  for (int i : nu) frozen[static_cast<std::size_t>(i - 1)] = true;

  PhiloxStream rng(stream);
  InputSampler sampler(dist);
  PickFreezeSample out{nu, {}, {}, stream};
  out.z.reserve(n);
  out.z_nu.reserve(n);
  std::vector<double> x(d), x_prime(d), x_nu(d);
  for (std::size_t j = 0; j < n; ++j) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRejectionsPerDraw) {
        fail(ErrorCode::SamplingStalled, "too many rejected input draws for one pick-freeze pair");
      }
      sampler.draw(rng, x);
      sampler.draw(rng, x_prime);
      for (std::size_t k = 0; k < d; ++k) x_nu[k] = frozen[k] ? x[k] : x_prime[k];
      try {
        ManifoldPoint zj = evaluate_model(model, x);
        ManifoldPoint zj_nu = evaluate_model(model, x_nu);
        out.z.push_back(std::move(zj));
        out.z_nu.push_back(std::move(zj_nu));
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
    }
  }
  return out;
}

inline WPool sample_w_pool(const ModelSpec& model, const DistributionSpec& dist, std::size_t nw,
                           const StreamId& stream) {
  validate_model(model);
  if (nw < 2) fail(ErrorCode::TooFewSamples, "W pool needs Nw >= 2");
  PhiloxStream rng(stream);
  InputSampler sampler(dist);
  WPool out{{}, stream};
  out.points.reserve(nw);
  std::vector<double> x(dist.dimension());
  for (std::size_t k = 0; k < nw; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxRejectionsPerDraw) {
        fail(ErrorCode::SamplingStalled, "too many rejected input draws for one W point");
      }
      sampler.draw(rng, x);
      try {
        out.points.push_back(evaluate_model(model, x));
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
    }
  }
  return out;
}

} // namespace geosens

#endif // GEOSENS_MODELS_HPP
