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

#ifndef GEOSENS_INFERENCE_HPP
#define GEOSENS_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "estimators.hpp"
#include "models.hpp"
#include "rng.hpp"

namespace geosens {

inline constexpr std::size_t kMinBootstrapReplicates = 100;
inline constexpr double kDiscardedReplicateWarning = 0.05;

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::size_t replicates = 0; // valid replicates used
  std::size_t requested = 0;
  std::size_t discarded = 0;  // degenerate-denominator replicates
  double standard_error = 0.0; // sd of the valid replicate estimates
  std::string method = "percentile-bootstrap";
  std::vector<std::string> warnings;
};

/// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidSpec, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {

/// Percentile bootstrap over any kernel exposing sample() and the weighted
/// estimate(); pairs and W are resampled jointly, replicate r on its own
/// bootstrap stream.
template <class Kernel>
ConfidenceInterval bootstrap_kernel(Kernel& kernel, std::size_t reps, double level, const StreamId& stream,
                                    EstimationMode mode) {
  if (reps < kMinBootstrapReplicates) {
    fail(ErrorCode::InvalidSpec, "bootstrap needs at least " + std::to_string(kMinBootstrapReplicates) +
                                     " replicates (got " + std::to_string(reps) + ")");
  }
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvalidSpec, "confidence level must lie in (0,1)");
  const auto& sample = kernel.sample();
  const std::size_t n = sample.n_pairs();
  const std::size_t nw = sample.n_w();

  std::vector<double> values;
  values.reserve(reps);
  std::vector<std::int64_t> pair_counts(n), w_counts(nw);
  std::vector<std::uint32_t> w_raw(nw);
  for (std::size_t r = 0; r < reps; ++r) {
    PhiloxStream rng(stream.with_role(StreamRole::Bootstrap).with_replicate(static_cast<std::uint32_t>(r)));
    std::fill(pair_counts.begin(), pair_counts.end(), 0);
    std::fill(w_counts.begin(), w_counts.end(), 0);
    for (std::size_t j = 0; j < n; ++j) ++pair_counts[rng.below(n)];
    for (std::size_t k = 0; k < nw; ++k) {
      const auto pick = rng.below(nw);
      ++w_counts[pick];
      w_raw[k] = sample.w_of[pick];
    }
    const auto pw = sample.pair_weights_from_counts(pair_counts);
    const auto ww = sample.w_weights_from_counts(w_counts);
    IndexEstimate est;
    try {
      est = kernel.estimate(pw, ww, w_raw, mode, &rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateBalls) throw;
      continue;
    }
    if (est.degenerate()) continue;
    values.push_back(est.b_hat);
  }

  ConfidenceInterval ci;
  ci.level = level;
  ci.requested = reps;
  ci.replicates = values.size();
  ci.discarded = reps - values.size();
  if (2 * values.size() < reps) {
    fail(ErrorCode::TooFewValidReplicates, std::to_string(values.size()) + " of " + std::to_string(reps) +
                                               " bootstrap replicates had a usable denominator");
  }
  if (static_cast<double>(ci.discarded) > kDiscardedReplicateWarning * static_cast<double>(reps)) {
    ci.warnings.push_back(std::to_string(ci.discarded) + " of " + std::to_string(reps) +
                          " bootstrap replicates discarded (degenerate denominator)");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  ci.standard_error = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  ci.lower = sorted_quantile(values, 0.5 * (1.0 - level));
  ci.upper = sorted_quantile(values, 1.0 - 0.5 * (1.0 - level));
  return ci;
}

} // namespace detail

/// Percentile bootstrap interval for B_hat.
inline ConfidenceInterval bootstrap_ci(const PickFreezeSample& pairs, const WPool& pool, const ManifoldKind& kind,
                                       std::size_t reps, double level, const StreamId& stream,
                                       EstimationMode mode = {}, const EstimatorOptions& opts = {}) {
  return with_backend(kind, [&](auto b) {
    detail::BallKernel<decltype(b)> kernel(b, pairs, pool, opts);
    return detail::bootstrap_kernel(kernel, reps, level, stream, mode);
  });
}

/// Percentile bootstrap interval for the Cramér-von Mises index.
inline ConfidenceInterval bootstrap_cvm_ci(const PickFreezeSample& pairs, const WPool& pool, std::size_t reps,
                                           double level, const StreamId& stream,
                                           const Embedding& embed = default_embedding, EstimationMode mode = {},
                                           const EstimatorOptions& opts = {}) {
  detail::QuadrantKernel kernel(pairs, pool, embed, opts);
  return detail::bootstrap_kernel(kernel, reps, level, stream, mode);
}

/// Point estimate plus (optionally) its bootstrap interval, sharing one
/// kernel so the membership cache serves every replicate.
struct IndexResult {
  IndexEstimate estimate;
  std::optional<ConfidenceInterval> ci;
  std::optional<std::string> ci_failure;
};

namespace detail {

template <class Kernel>
IndexResult analyze_kernel(Kernel& kernel, std::size_t reps, double level, const StreamId& stream,
                           EstimationMode mode) {
  IndexResult out{kernel.estimate(mode), std::nullopt, std::nullopt};
  if (reps == 0) return out;
  if (out.estimate.degenerate()) {
    out.ci_failure = "no interval for a degenerate estimate";
    return out;
  }
  try {
    out.ci = bootstrap_kernel(kernel, reps, level, stream, mode);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewValidReplicates) throw;
    out.ci_failure = e.what();
  }
  return out;
}

} // namespace detail

inline IndexResult analyze_ball(const PickFreezeSample& pairs, const WPool& pool, const ManifoldKind& kind,
                                std::size_t reps, double level, EstimationMode mode = {},
                                const EstimatorOptions& opts = {}) {
  return with_backend(kind, [&](auto b) {
    detail::BallKernel<decltype(b)> kernel(b, pairs, pool, opts);
    return detail::analyze_kernel(kernel, reps, level, pairs.stream, mode);
  });
}

inline IndexResult analyze_cvm(const PickFreezeSample& pairs, const WPool& pool, std::size_t reps, double level,
                               EstimationMode mode = {}, const EstimatorOptions& opts = {},
                               const Embedding& embed = default_embedding) {
  detail::QuadrantKernel kernel(pairs, pool, embed, opts);
  return detail::analyze_kernel(kernel, reps, level, pairs.stream, mode);
}

// --- Monte Carlo studies ------------------------------------------------------

enum class IndexKind { Ball, Cvm };

inline std::string to_string(IndexKind k) { return k == IndexKind::Ball ? "ball" : "cvm"; }

/// Streams of replicate r at sub-study `slot` (e.g. the sample-size index).
inline StreamId study_stream(const StreamId& base, StreamRole role, std::size_t slot, std::size_t r) {
  if (slot >= 16 || base.group >= (1u << 20)) fail(ErrorCode::InvalidSpec, "study stream slot out of range");
  return StreamId{base.seed, role, static_cast<std::uint32_t>(r),
                  static_cast<std::uint32_t>((base.group << 4) | slot)};
}

struct MsdRow {
  std::size_t n = 0;
  IndexKind index = IndexKind::Ball;
  double truth = 0.0;
  double msd = 0.0;
  double standard_error = 0.0; // Monte Carlo SE of the MSD
  std::size_t replicates = 0;
  std::size_t degenerate = 0;
};

struct MsdOptions {
  std::optional<double> truth_ball; // study B_hat when set
  std::optional<double> truth_cvm;  // study C_hat when set
  std::size_t nw = 0;               // 0: Nw = N
  EstimationMode mode;
  EstimatorOptions estimator;
};

namespace detail {

inline void summarize_squared_errors(MsdRow& row, const std::vector<double>& sq) {
  row.replicates = sq.size();
  if (sq.empty()) return;
  double mean = 0.0;
  for (double v : sq) mean += v;
  mean /= static_cast<double>(sq.size());
  double ss = 0.0;
  for (double v : sq) ss += (v - mean) * (v - mean);
  row.msd = mean;
  row.standard_error =
      sq.size() > 1 ? std::sqrt(ss / static_cast<double>(sq.size() - 1) / static_cast<double>(sq.size())) : 0.0;
}

} // namespace detail

/// MSD(N) = (1/R) sum_r (estimate_r - truth)^2 for each N in `sizes`.
inline std::vector<MsdRow> msd_study(const ModelSpec& model, const IndexSet& nu, const std::vector<std::size_t>& sizes,
                                     std::size_t replicates, const StreamId& stream, const MsdOptions& opts) {
  if (replicates < 1) fail(ErrorCode::InvalidSpec, "msd_study needs R >= 1");
  if (!opts.truth_ball && !opts.truth_cvm) fail(ErrorCode::InvalidSpec, "msd_study needs a true index");
  const auto dist = input_law(model);
  const auto kind = output_kind(model);
  std::vector<MsdRow> out;
  for (std::size_t slot = 0; slot < sizes.size(); ++slot) {
    const std::size_t n = sizes[slot];
    const std::size_t nw = opts.nw == 0 ? n : opts.nw;
    std::vector<double> sq_ball, sq_cvm;
    std::size_t deg_ball = 0, deg_cvm = 0;
    for (std::size_t r = 0; r < replicates; ++r) {
      const auto pairs = pick_freeze(model, dist, nu, n, study_stream(stream, StreamRole::Pairs, slot, r));
      const auto pool = sample_w_pool(model, dist, nw, study_stream(stream, StreamRole::WPool, slot, r));
      if (opts.truth_ball) {
        const auto est = estimate_ball_statistics(pairs, pool, kind, opts.mode, opts.estimator);
        if (est.degenerate()) {
          ++deg_ball;
        } else {
          sq_ball.push_back((est.b_hat - *opts.truth_ball) * (est.b_hat - *opts.truth_ball));
        }
      }
      if (opts.truth_cvm) {
        const auto est = estimate_cvm_statistics(pairs, pool, default_embedding, opts.mode, opts.estimator);
        if (est.degenerate()) {
          ++deg_cvm;
        } else {
          sq_cvm.push_back((est.b_hat - *opts.truth_cvm) * (est.b_hat - *opts.truth_cvm));
        }
      }
    }
    if (opts.truth_ball) {
      MsdRow row{n, IndexKind::Ball, *opts.truth_ball};
      detail::summarize_squared_errors(row, sq_ball);
      row.degenerate = deg_ball;
      out.push_back(row);
    }
    if (opts.truth_cvm) {
      MsdRow row{n, IndexKind::Cvm, *opts.truth_cvm};
      detail::summarize_squared_errors(row, sq_cvm);
      row.degenerate = deg_cvm;
      out.push_back(row);
    }
  }
  return out;
}

// --- concentration ------------------------------------------------------------

struct ConcentrationReport {
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::vector<double> s_grid;
  std::vector<double> tail;  // fraction of replicates with |S_hat - S| > s
  std::vector<double> bound; // 16 exp(-N (s/9)^2 / 8)
  std::vector<double> abs_errors; // sorted |S_hat - S|
  double q90 = 0.0;               // 90th percentile of |S_hat - S|

  bool monotone() const {
    for (std::size_t i = 1; i < tail.size(); ++i) {
      if (tail[i] > tail[i - 1]) return false;
    }
    return true;
  }
  bool within_bound() const {
    for (std::size_t i = 0; i < tail.size(); ++i) {
      if (tail[i] > bound[i]) return false;
    }
    return true;
  }
};

inline double concentration_bound(std::size_t n, double s) {
  return 16.0 * std::exp(-static_cast<double>(n) * (s / 9.0) * (s / 9.0) / 8.0);
}

/// Empirical tail of |S_hat - S| over `replicates` independent runs at size N.
inline ConcentrationReport concentration_diagnostic(const ModelSpec& model, const IndexSet& nu, std::size_t n,
                                                    std::size_t replicates, std::vector<double> s_grid,
                                                    const StreamId& stream, double s_true,
                                                    EstimationMode mode = {}, const EstimatorOptions& opts = {}) {
  if (replicates < 1) fail(ErrorCode::InvalidSpec, "concentration_diagnostic needs R >= 1");
  std::sort(s_grid.begin(), s_grid.end());
  const auto dist = input_law(model);
  const auto kind = output_kind(model);
  ConcentrationReport rep;
  rep.n = n;
  rep.replicates = replicates;
  rep.abs_errors.reserve(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto pairs = pick_freeze(model, dist, nu, n, study_stream(stream, StreamRole::Pairs, 0, r));
    const auto pool = sample_w_pool(model, dist, n, study_stream(stream, StreamRole::WPool, 0, r));
    const auto est = estimate_ball_statistics(pairs, pool, kind, mode, opts);
    rep.abs_errors.push_back(std::abs(est.s_hat - s_true));
  }
  std::sort(rep.abs_errors.begin(), rep.abs_errors.end());
  rep.q90 = sorted_quantile(rep.abs_errors, 0.9);
  for (double s : s_grid) {
    const auto above = rep.abs_errors.end() - std::upper_bound(rep.abs_errors.begin(), rep.abs_errors.end(), s);
    rep.s_grid.push_back(s);
    rep.tail.push_back(static_cast<double>(above) / static_cast<double>(replicates));
    rep.bound.push_back(concentration_bound(n, s));
  }
  return rep;
}

} // namespace geosens

#endif // GEOSENS_INFERENCE_HPP
