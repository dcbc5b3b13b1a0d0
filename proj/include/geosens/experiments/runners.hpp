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

#ifndef GEOSENS_EXPERIMENTS_RUNNERS_HPP
#define GEOSENS_EXPERIMENTS_RUNNERS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "../estimators.hpp"
#include "../inference.hpp"
#include "../models.hpp"
#include "../oracles.hpp"
#include "config.hpp"
#include "table.hpp"

namespace geosens::experiments {

// --- custom model registry ----------------------------------------------------

/// Named user models selectable with `model = NAME`.
inline Custom custom_model(const std::string& name, const ExperimentConfig& cfg) {
  auto unit_square = [] { return DistributionSpec{{Uniform{0.0, 1.0}, Uniform{0.0, 1.0}}}; };
  auto std_normal2 = [] { return DistributionSpec{{Normal{0.0, 1.0}, Normal{0.0, 1.0}}}; };
  if (name == "linear") {
    const auto c = cfg.grid("coefficients", {1.0, 1.0});
    DistributionSpec in;
    for (std::size_t i = 0; i < c.size(); ++i) in.laws.push_back(Uniform{0.0, 1.0});
    return {name, in, ManifoldKind::real_line(), [c](std::span<const double> x) -> ManifoldPoint {
              double z = 0.0;
              for (std::size_t i = 0; i < c.size(); ++i) z += c[i] * x[i];
              return Scalar{z};
            }};
  }
  if (name == "only_first") {
    return {name, unit_square(), ManifoldKind::real_line(),
            [](std::span<const double> x) -> ManifoldPoint { return Scalar{x[0]}; }};
  }
  if (name == "constant") {
    return {name, unit_square(), ManifoldKind::real_line(),
            [](std::span<const double>) -> ManifoldPoint { return Scalar{0.0}; }};
  }
  if (name == "angle") {
    return {name, unit_square(), ManifoldKind::circle(2), [](std::span<const double> x) -> ManifoldPoint {
              const double theta = std::numbers::pi * (x[0] - 0.5) + 0.5 * std::numbers::pi * (x[1] - 0.5);
              return circle_point(theta);
            }};
  }
  if (name == "spd_diag") {
    return {name, std_normal2(), ManifoldKind::spd(2), [](std::span<const double> x) -> ManifoldPoint {
              Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
              m(0, 0) = std::exp(x[0]);
              m(1, 1) = std::exp(0.5 * x[1]);
              return Spd{m};
            }};
  }
  if (name == "surface") {
    return {name, std_normal2(), ManifoldKind::log_surface(), [](std::span<const double> x) -> ManifoldPoint {
              const double a = x[0];
              const double b = 0.5 * x[1];
              return log_surface_point(std::exp(a), std::exp(b), std::exp(-a - b));
            }};
  }
  config_error("unknown custom model '" + name + "' (linear, only_first, constant, angle, spd_diag, surface)");
}

// --- shared row machinery -------------------------------------------------------

struct PointRequest {
  ModelSpec model;
  IndexSet nu;
  std::uint32_t group = 0; // stream group of this sweep point
  bool cvm = true;
  std::optional<double> b_true;
  std::optional<double> c_true;
};

inline std::string nu_label(const IndexSet& nu) {
  std::string out;
  for (std::size_t i = 0; i < nu.size(); ++i) out += (i ? ";" : "") + std::to_string(nu[i]);
  return out;
}

inline std::size_t resolved_n(const ExperimentConfig& cfg, std::size_t fallback) {
  return cfg.n == 0 ? fallback : cfg.n;
}

inline std::size_t resolved_nw(const ExperimentConfig& cfg, std::size_t n) { return cfg.nw == 0 ? n : cfg.nw; }

/// Estimates B (and C when requested) at one sweep point and fills a row.
inline Row analyze_point(const ExperimentConfig& cfg, std::size_t n, const PointRequest& req, ResultTable& table) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = cfg.require_seed();
  const std::size_t nw = resolved_nw(cfg, n);
  const auto dist = input_law(req.model);
  const auto kind = output_kind(req.model);
  const auto pairs = pick_freeze(req.model, dist, req.nu, n, StreamId{seed, StreamRole::Pairs, 0, req.group});
  const auto pool = sample_w_pool(req.model, dist, nw, StreamId{seed, StreamRole::WPool, 0, req.group});
  EstimatorOptions opts;
  opts.threads = cfg.threads;

  std::vector<std::string> status;
  Row row;
  row.set("schema_version", kSchemaVersion)
      .set("row_type", "estimate")
      .set("experiment", cfg.experiment)
      .set("nu", nu_label(req.nu))
      .set("seed", seed)
      .set("n", n)
      .set("nw", nw)
      .set("mode", cfg.mode.label());
  if (req.b_true) row.set("b_true", *req.b_true);
  if (req.c_true) row.set("c_true", *req.c_true);

  const auto ball = analyze_ball(pairs, pool, kind, cfg.bootstrap, cfg.level, cfg.mode, opts);
  row.set("s_hat", ball.estimate.s_hat).set("d_hat", ball.estimate.d_hat).set("dropped_tau", ball.estimate.tau_dropped);
  if (ball.estimate.degenerate()) {
    status.push_back("b_degenerate");
    table.degenerate_index = true;
  } else {
    row.set("b_hat", ball.estimate.b_hat);
  }
  if (ball.ci) {
    row.set("b_ci_lower", ball.ci->lower).set("b_ci_upper", ball.ci->upper).set("b_se", ball.ci->standard_error);
    row.set("replicates", ball.ci->replicates);
    for (const auto& w : ball.ci->warnings) table.warnings.push_back(w);
  } else if (cfg.bootstrap > 0) {
    status.push_back("b_ci_unavailable");
  }
  for (const auto& w : ball.estimate.warnings) {
    table.warnings.push_back(w);
    status.push_back("dropped_tau_warning");
  }

  if (req.cvm) {
    const auto cvm = analyze_cvm(pairs, pool, cfg.bootstrap, cfg.level, cfg.mode, opts);
    if (cvm.estimate.degenerate()) {
      status.push_back("c_degenerate");
    } else {
      row.set("c_hat", cvm.estimate.b_hat);
    }
    if (cvm.ci) {
      row.set("c_ci_lower", cvm.ci->lower).set("c_ci_upper", cvm.ci->upper).set("c_se", cvm.ci->standard_error);
    } else if (cfg.bootstrap > 0 && !cvm.estimate.degenerate()) {
      status.push_back("c_ci_unavailable");
    }
  }

  std::string joined;
  for (std::size_t i = 0; i < status.size(); ++i) joined += (i ? ";" : "") + status[i];
  row.set("status", status.empty() ? std::string("ok") : joined);
  if (cfg.timing) {
    row.set("elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return row;
}

inline std::uint32_t point_group(std::size_t point, std::size_t slot) {
  return static_cast<std::uint32_t>(point * 8 + slot);
}

/// A sweep point and the columns that label it.
struct PlannedPoint {
  PointRequest request;
  std::function<void(Row&)> label;
};

/// Runs every point concurrently and appends rows in grid order.
inline void run_points(const ExperimentConfig& cfg, std::size_t n, const std::vector<PlannedPoint>& points,
                       ResultTable& table) {
  const unsigned total = detail::resolve_threads(cfg.threads);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(total, std::max<std::size_t>(points.size(), 1)));
  ExperimentConfig inner = cfg;
  inner.threads = std::max(1u, total / std::max(1u, workers));
  std::vector<ResultTable> partial(points.size());
  std::vector<Row> rows(points.size());
  std::atomic<std::size_t> next{0};
  detail::parallel_chunks(workers, workers, [&](std::size_t, std::size_t, unsigned) {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      rows[i] = analyze_point(inner, n, points[i].request, partial[i]);
      if (points[i].label) points[i].label(rows[i]);
    }
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (auto& w : partial[i].warnings) table.warnings.push_back(std::move(w));
    table.degenerate_index = table.degenerate_index || partial[i].degenerate_index;
    table.rows.push_back(std::move(rows[i]));
  }
}

// --- experiments ----------------------------------------------------------------

/// Z = alpha X1 + X2 swept over p; B_hat and C_hat against the closed form,
/// plus an optional MSD summary over the same grid.
inline ResultTable run_example1(const ExperimentConfig& cfg) {
  validate_common(cfg);
  const double alpha = cfg.scalar("alpha", 1.0);
  const auto ps = cfg.grid("p", parse_grid("p", {"0.1:0.9:9"}));
  const std::optional<double> b_fixed =
      cfg.grids.count("b") ? std::optional<double>(cfg.scalar("b", 1.0)) : std::nullopt;
  const std::size_t n = resolved_n(cfg, 1000);

  auto model_at = [&](double p) {
    if (!(p > 0.0 && p < 1.0) && !b_fixed) config_error("p must lie in (0,1) when b is derived from p");
    return b_fixed ? Example1{alpha, p, *b_fixed} : Example1::standard(p, alpha);
  };

  ResultTable table;
  std::vector<PlannedPoint> points;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto model = model_at(ps[i]);
    const auto truth = closed_form_example1(model.p, model.alpha, model.b);
    const double p = ps[i];
    points.push_back({{model, {1}, point_group(i, 0), true, truth.b1, truth.c1},
                      [p](Row& row) { row.set("param", "p").set("value", p); }});
  }
  run_points(cfg, n, points, table);

  const auto reps = static_cast<std::size_t>(cfg.scalar("msd_replicates", 0.0));
  if (reps > 0) {
    const auto sizes = cfg.grid("msd_sizes", {100.0, 500.0, 1000.0});
    const auto msd_mode = parse_mode(cfg.word("msd_mode", cfg.mode.label()));
    for (double size : sizes) {
      const auto start = std::chrono::steady_clock::now();
      const auto ns = static_cast<std::size_t>(size);
      if (ns < 2) config_error("msd_sizes must be >= 2");
      double sum_b = 0.0, sum_c = 0.0, var_b = 0.0, var_c = 0.0;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto model = model_at(ps[i]);
        const auto truth = closed_form_example1(model.p, model.alpha, model.b);
        MsdOptions mo;
        mo.truth_ball = truth.b1;
        mo.truth_cvm = truth.c1;
        mo.nw = cfg.nw;
        mo.mode = msd_mode;
        mo.estimator.threads = cfg.threads;
        const StreamId base{cfg.require_seed(), StreamRole::Pairs, 0, static_cast<std::uint32_t>((1u << 19) + i)};
        for (const auto& r : msd_study(model, {1}, {ns}, reps, base, mo)) {
          if (r.index == IndexKind::Ball) {
            sum_b += r.msd;
            var_b += r.standard_error * r.standard_error;
          } else {
            sum_c += r.msd;
            var_c += r.standard_error * r.standard_error;
          }
        }
      }
      const double k = static_cast<double>(ps.size());
      Row row;
      row.set("schema_version", kSchemaVersion)
          .set("row_type", "msd_summary")
          .set("experiment", cfg.experiment)
          .set("nu", "1")
          .set("param", "p")
          .set("msd_b", sum_b / k)
          .set("msd_b_se", std::sqrt(var_b) / k)
          .set("msd_c", sum_c / k)
          .set("msd_c_se", std::sqrt(var_c) / k)
          .set("replicates", reps)
          .set("status", "ok")
          .set("seed", cfg.require_seed())
          .set("n", ns)
          .set("nw", cfg.nw == 0 ? ns : cfg.nw)
          .set("mode", msd_mode.label());
      if (cfg.timing) {
        row.set("elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

/// Projected normal on the circle swept over mu1, both inputs.
inline ResultTable run_example2(const ExperimentConfig& cfg) {
  validate_common(cfg);
  const auto mu1s = cfg.grid("mu1", parse_grid("mu1", {"-5:0:11"}));
  const double mu2 = cfg.scalar("mu2", 0.0);
  const double s1 = cfg.scalar("sigma1sq", 1.0);
  const double s2 = cfg.scalar("sigma2sq", 1.0);
  const std::size_t n = resolved_n(cfg, 300);
  ResultTable table;
  std::vector<PlannedPoint> points;
  for (std::size_t i = 0; i < mu1s.size(); ++i) {
    const double mu1 = mu1s[i];
    for (int nu = 1; nu <= 2; ++nu) {
      points.push_back({{Example2{mu1, mu2, s1, s2}, {nu}, point_group(i, static_cast<std::size_t>(nu)), true,
                         std::nullopt, std::nullopt},
                        [mu1](Row& row) { row.set("param", "mu1").set("value", mu1); }});
    }
  }
  run_points(cfg, n, points, table);
  return table;
}

/// Outputs on the surface xyz = 1 swept over the Gamma shape.
inline ResultTable run_example3(const ExperimentConfig& cfg) {
  validate_common(cfg);
  const auto mu1s = cfg.grid("mu1", parse_grid("mu1", {"0.5:5:10"}));
  const std::size_t n = resolved_n(cfg, 1000);
  ResultTable table;
  std::vector<PlannedPoint> points;
  for (std::size_t i = 0; i < mu1s.size(); ++i) {
    const double mu1 = mu1s[i];
    if (!(mu1 > 0.0)) config_error("mu1 must be > 0");
    for (int nu = 1; nu <= 2; ++nu) {
      points.push_back({{Example3{mu1}, {nu}, point_group(i, static_cast<std::size_t>(nu)), true, std::nullopt,
                         std::nullopt},
                        [mu1](Row& row) { row.set("param", "mu1").set("value", mu1); }});
    }
  }
  run_points(cfg, n, points, table);
  return table;
}

/// Isotropic stiffness matrices over the (lambda_mu, lambda_k) grid; input 1
/// is the shear modulus mu, input 2 the volumetric modulus K.
inline ResultTable run_stiffness(const ExperimentConfig& cfg) {
  validate_common(cfg);
  const std::vector<double> defaults{0.001, 0.01, 0.1, 1.0};
  const auto lmu = cfg.grid("lambda_mu", defaults);
  const auto lk = cfg.grid("lambda_k", defaults);
  const std::string which = cfg.word("case", "both");
  std::vector<StiffnessCase> cases;
  if (which == "gamma" || which == "both") cases.push_back(StiffnessCase::GammaCase);
  if (which == "uniform" || which == "both") cases.push_back(StiffnessCase::UniformCase);
  if (cases.empty()) config_error("case must be gamma, uniform or both");
  for (double l : lmu) {
    if (!(l > 0.0)) config_error("lambda_mu must be > 0");
  }
  for (double l : lk) {
    if (!(l > 0.0)) config_error("lambda_k must be > 0");
  }
  const std::size_t n = resolved_n(cfg, 500);
  ResultTable table;
  std::vector<PlannedPoint> points;
  std::size_t point = 0;
  for (auto c : cases) {
    for (double a : lmu) {
      for (double b : lk) {
        if (c == StiffnessCase::UniformCase && (a > 1.0 || b > 1.0)) {
          config_error("uniform case needs lambda <= 1 (moduli must stay positive)");
        }
        const std::string label = c == StiffnessCase::GammaCase ? "gamma" : "uniform";
        for (int nu = 1; nu <= 2; ++nu) {
          points.push_back({{Stiffness{c, b, a}, {nu}, point_group(point, static_cast<std::size_t>(nu)), false,
                             std::nullopt, std::nullopt},
                            [label, a, b](Row& row) {
                              row.set("case", label)
                                  .set("param", "lambda_mu")
                                  .set("value", a)
                                  .set("param2", "lambda_k")
                                  .set("value2", b);
                            }});
        }
        ++point;
      }
    }
  }
  run_points(cfg, n, points, table);
  return table;
}

/// One estimate for a registered user model.
inline ResultTable run_custom(const ExperimentConfig& cfg) {
  validate_common(cfg);
  const std::string name = cfg.word("model", "");
  if (name.empty()) config_error("custom experiment needs 'model = NAME'");
  const Custom model = custom_model(name, cfg);
  IndexSet nu;
  for (double v : cfg.grid("nu", {1.0})) {
    if (v != std::floor(v)) config_error("nu entries must be integers");
    nu.push_back(static_cast<int>(v));
  }
  try {
    nu = checked_index_set(nu, model.inputs.dimension());
  } catch (const Error& e) {
    config_error(std::string("nu: ") + e.what());
  }
  const bool embeddable = !std::holds_alternative<SpdAffineKind>(model.output.shape);
  ResultTable table;
  PointRequest req{model, nu, point_group(0, 0), embeddable, std::nullopt, std::nullopt};
  Row row = analyze_point(cfg, resolved_n(cfg, 1000), req, table);
  row.set("case", name);
  table.rows.push_back(std::move(row));
  return table;
}

inline ResultTable run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "example1") return run_example1(cfg);
  if (cfg.experiment == "example2") return run_example2(cfg);
  if (cfg.experiment == "example3") return run_example3(cfg);
  if (cfg.experiment == "stiffness") return run_stiffness(cfg);
  if (cfg.experiment == "custom") return run_custom(cfg);
  config_error("unknown experiment '" + cfg.experiment + "'");
}

} // namespace geosens::experiments

#endif // GEOSENS_EXPERIMENTS_RUNNERS_HPP
