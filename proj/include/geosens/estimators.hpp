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

#ifndef GEOSENS_ESTIMATORS_HPP
#define GEOSENS_ESTIMATORS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "manifold.hpp"
#include "models.hpp"
#include "rng.hpp"

namespace geosens {

// --- public types -------------------------------------------------------------

enum class ModeKind { ExactU, IncompleteU };

/// ExactU averages over every W pair; IncompleteU(m) over m pairs drawn
/// without replacement.
struct EstimationMode {
  ModeKind kind = ModeKind::ExactU;
  std::uint64_t m = 0;

  static EstimationMode exact() { return {}; }
  static EstimationMode incomplete(std::uint64_t m) {
    if (m < 1) fail(ErrorCode::InvalidSpec, "incomplete U-statistic needs m >= 1");
    return {ModeKind::IncompleteU, m};
  }

  std::string label() const {
    return kind == ModeKind::ExactU ? std::string("exact") : "incomplete:" + std::to_string(m);
  }

  friend bool operator==(const EstimationMode&, const EstimationMode&) = default;
};

struct EstimatorOptions {
  unsigned threads = 0;                                  // 0: hardware concurrency
  std::size_t cache_budget_bytes = std::size_t{256} << 20; // membership bit cache
  /// Stream for IncompleteU pair selection; defaults to the bootstrap role of
  /// the pick-freeze stream.
  std::optional<StreamId> tau_stream;
};

inline constexpr double kDegenerateDenominator = 1e-12;
inline constexpr double kDroppedTauWarning = 0.01;
/// Replicate index reserved for IncompleteU pair selection.
inline constexpr std::uint32_t kTauSamplingReplicate = 0xFFFFFFFFu;

struct IndexEstimate {
  double s_hat = 0.0;
  double d_hat = 0.0;
  double b_hat = 0.0; // s_hat / d_hat; only meaningful when !degenerate()
  std::size_t n_pairs = 0;
  std::size_t n_w = 0;
  EstimationMode mode;
  std::uint64_t tau_used = 0;
  std::uint64_t tau_dropped = 0;
  std::chrono::duration<double> elapsed{0};
  std::vector<std::string> warnings;

  bool degenerate() const { return !(d_hat > kDegenerateDenominator); }
};

// --- kernels ------------------------------------------------------------------

/// h_W(t): membership of t in the ball of diameter W = (w1, w2).
inline bool kernel_h(const ManifoldKind& kind, const ManifoldPoint& w1, const ManifoldPoint& w2,
                     const ManifoldPoint& t) {
  return ball_contains(kind, w1, w2, t);
}

/// G(Z_j, W) = h_W(Z_j) h_W(Z_j^nu).
inline int kernel_G(const ManifoldKind& kind, const ManifoldPoint& z, const ManifoldPoint& z_nu,
                    const ManifoldPoint& w1, const ManifoldPoint& w2) {
  return with_backend(kind, [&](const auto& b) {
    const auto ball = b.ball(b.load(w1), b.load(w2));
    return (b.contains(ball, b.load(z)) && b.contains(ball, b.load(z_nu))) ? 1 : 0;
  });
}

/// J(Z_j, W) = (h_W(Z_j) + h_W(Z_j^nu)) / 2.
inline double kernel_J(const ManifoldKind& kind, const ManifoldPoint& z, const ManifoldPoint& z_nu,
                       const ManifoldPoint& w1, const ManifoldPoint& w2) {
  return with_backend(kind, [&](const auto& b) {
    const auto ball = b.ball(b.load(w1), b.load(w2));
    const int hits = (b.contains(ball, b.load(z)) ? 1 : 0) + (b.contains(ball, b.load(z_nu)) ? 1 : 0);
    return 0.5 * hits;
  });
}

// --- internals ----------------------------------------------------------------

namespace detail {

__extension__ typedef __int128 Wide; // exact accumulation of integer kernel sums

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs body(begin, end, worker) over [0, n) in contiguous chunks.
template <class Body>
void parallel_chunks(std::size_t n, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    body(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end, t] {
      try {
        body(begin, end, t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Assigns each distinct point (under backend equality) a dense index.
template <class Backend>
class Interner {
public:
  using Point = typename Backend::Point;

  explicit Interner(const Backend& b) : b_(b) {}

  std::uint32_t intern(Point p) {
    auto& bucket = buckets_[b_.hash(p)];
    for (std::uint32_t idx : bucket) {
      if (b_.equal(values_[idx], p)) return idx;
    }
    const auto idx = static_cast<std::uint32_t>(values_.size());
    values_.push_back(std::move(p));
    bucket.push_back(idx);
    return idx;
  }

  std::vector<Point> release() { return std::move(values_); }

private:
  const Backend& b_;
  std::vector<Point> values_;
  std::unordered_map<std::size_t, std::vector<std::uint32_t>> buckets_;
};

/// One ball (or quadrant) of the U-statistic with its multiplicity.
struct TauEntry {
  std::uint32_t a;
  std::uint32_t b; // == a for order-1 statistics and for repeated W values
  std::int64_t weight;
};

struct Accumulator {
  Wide num_s = 0;
  Wide num_d = 0;
  std::int64_t tau_weight = 0;
  std::int64_t dropped = 0;

  void add_term(std::int64_t weight, std::int64_t n_total, std::int64_t g, std::int64_t j2) {
    num_s += Wide{weight} * (Wide{4} * n_total * g - Wide{j2} * j2);
    num_d += Wide{weight} * (Wide{j2} * (Wide{2} * n_total - j2));
    tau_weight += weight;
  }

  Accumulator& operator+=(const Accumulator& o) {
    num_s += o.num_s;
    num_d += o.num_d;
    tau_weight += o.tau_weight;
    dropped += o.dropped;
    return *this;
  }
};

/// Output sample compressed to distinct values, with pair/W multiplicities.
template <class Backend>
struct CompressedSample {
  using Point = typename Backend::Point;

  std::vector<Point> singles;              // distinct values among Z_j, Z_j^nu
  std::vector<std::uint32_t> pair_first;   // distinct pair -> single index of Z_j
  std::vector<std::uint32_t> pair_second;  // distinct pair -> single index of Z_j^nu
  std::vector<std::uint32_t> pair_of;      // original j -> distinct pair
  std::vector<Point> w_values;             // distinct W values
  std::vector<std::uint32_t> w_of;         // original k -> distinct W

  std::size_t n_pairs() const { return pair_of.size(); }
  std::size_t n_w() const { return w_of.size(); }

  std::vector<std::int64_t> base_pair_weights() const {
    std::vector<std::int64_t> out(pair_first.size(), 0);
    for (auto u : pair_of) ++out[u];
    return out;
  }
  std::vector<std::int64_t> base_w_weights() const {
    std::vector<std::int64_t> out(w_values.size(), 0);
    for (auto u : w_of) ++out[u];
    return out;
  }
  /// Aggregates per-original-index counts onto the distinct values.
  std::vector<std::int64_t> pair_weights_from_counts(std::span<const std::int64_t> counts) const {
    std::vector<std::int64_t> out(pair_first.size(), 0);
    for (std::size_t j = 0; j < counts.size(); ++j) out[pair_of[j]] += counts[j];
    return out;
  }
  std::vector<std::int64_t> w_weights_from_counts(std::span<const std::int64_t> counts) const {
    std::vector<std::int64_t> out(w_values.size(), 0);
    for (std::size_t k = 0; k < counts.size(); ++k) out[w_of[k]] += counts[k];
    return out;
  }
};

template <class Backend>
CompressedSample<Backend> compress(const Backend& b, std::span<const ManifoldPoint> z,
                                   std::span<const ManifoldPoint> z_nu, std::span<const ManifoldPoint> w) {
  CompressedSample<Backend> out;
  Interner<Backend> singles(b);
  std::unordered_map<std::uint64_t, std::uint32_t> pair_index;
  out.pair_of.reserve(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const std::uint32_t f = singles.intern(b.load(z[j]));
    const std::uint32_t s = singles.intern(b.load(z_nu[j]));
    const std::uint64_t key = (std::uint64_t{f} << 32) | s;
    auto [it, inserted] = pair_index.try_emplace(key, static_cast<std::uint32_t>(out.pair_first.size()));
    if (inserted) {
      out.pair_first.push_back(f);
      out.pair_second.push_back(s);
    }
    out.pair_of.push_back(it->second);
  }
  out.singles = singles.release();

  Interner<Backend> wvals(b);
  out.w_of.reserve(w.size());
  for (const auto& p : w) out.w_of.push_back(wvals.intern(b.load(p)));
  out.w_values = wvals.release();
  return out;
}

/// All pairs of distinct W values (a <= b) with U-statistic multiplicities.
inline std::vector<TauEntry> exact_pair_plan(std::span<const std::int64_t> w_weights) {
  std::vector<TauEntry> plan;
  const auto n = static_cast<std::uint32_t>(w_weights.size());
  for (std::uint32_t a = 0; a < n; ++a) {
    const std::int64_t wa = w_weights[a];
    if (wa == 0) continue;
    if (wa >= 2) plan.push_back({a, a, wa * (wa - 1) / 2});
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (w_weights[b] != 0) plan.push_back({a, b, wa * w_weights[b]});
    }
  }
  return plan;
}

inline std::vector<TauEntry> single_plan(std::span<const std::int64_t> w_weights) {
  std::vector<TauEntry> plan;
  for (std::uint32_t a = 0; a < w_weights.size(); ++a) {
    if (w_weights[a] != 0) plan.push_back({a, a, w_weights[a]});
  }
  return plan;
}

/// m distinct elements of [0, total) (Floyd's algorithm), sorted.
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t total, std::uint64_t m,
                                                             PhiloxStream& rng) {
  std::vector<std::uint64_t> out;
  if (m >= total) {
    out.resize(total);
    std::iota(out.begin(), out.end(), std::uint64_t{0});
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(m * 2);
  for (std::uint64_t j = total - m; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// m index pairs i < k drawn uniformly without replacement from the `n`
/// entries of `w_raw` (raw position -> distinct W), aggregated by value.
inline std::vector<TauEntry> incomplete_pair_plan(std::span<const std::uint32_t> w_raw, std::uint64_t m,
                                                  PhiloxStream& rng) {
  const std::uint64_t n = w_raw.size();
  const std::uint64_t total = n * (n - 1) / 2;
  const auto linear = sample_without_replacement(total, m, rng);
  std::unordered_map<std::uint64_t, std::int64_t> weights;
  std::uint64_t row = 0;
  std::uint64_t row_start = 0; // linear index of (row, row + 1)
  for (std::uint64_t idx : linear) {
    while (idx >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    const std::uint64_t col = row + 1 + (idx - row_start);
    std::uint32_t a = w_raw[row];
    std::uint32_t b = w_raw[col];
    if (b < a) std::swap(a, b);
    weights[(std::uint64_t{a} << 32) | b] += 1;
  }
  std::vector<TauEntry> plan;
  plan.reserve(weights.size());
  for (const auto& [key, wt] : weights) {
    plan.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key), wt});
  }
  std::sort(plan.begin(), plan.end(), [](const TauEntry& x, const TauEntry& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return plan;
}

inline IndexEstimate finish(const Accumulator& acc, std::int64_t n_total, std::size_t n_pairs, std::size_t n_w,
                            EstimationMode mode) {
  if (acc.tau_weight == 0) {
    fail(ErrorCode::DegenerateBalls, "every W pair failed geodesic uniqueness");
  }
  IndexEstimate out;
  const long double scale = 4.0L * static_cast<long double>(n_total) * static_cast<long double>(n_total) *
                            static_cast<long double>(acc.tau_weight);
  out.s_hat = static_cast<double>(static_cast<long double>(acc.num_s) / scale);
  out.d_hat = static_cast<double>(static_cast<long double>(acc.num_d) / scale);
  out.n_pairs = n_pairs;
  out.n_w = n_w;
  out.mode = mode;
  out.tau_used = static_cast<std::uint64_t>(acc.tau_weight);
  out.tau_dropped = static_cast<std::uint64_t>(acc.dropped);
  const auto total = acc.tau_weight + acc.dropped;
  if (acc.dropped > 0 && static_cast<double>(acc.dropped) > kDroppedTauWarning * static_cast<double>(total)) {
    out.warnings.push_back(std::to_string(acc.dropped) + " of " + std::to_string(total) +
                           " W pairs dropped (non-unique geodesic)");
  }
  if (!out.degenerate()) out.b_hat = out.s_hat / out.d_hat;
  return out;
}

/// Evaluates the ball statistic for one backend. Holds the compressed sample
/// and a lazily filled cache of membership bits per distinct W pair (the
/// kernel cache), reused across bootstrap replicates.
template <class Backend>
class BallKernel {
public:
  using Point = typename Backend::Point;
  using Ball = typename Backend::Ball;

  BallKernel(Backend b, const PickFreezeSample& pairs, const WPool& pool, EstimatorOptions opts = {})
      : b_(std::move(b)), opts_(std::move(opts)) {
    if (pairs.z.size() != pairs.z_nu.size()) fail(ErrorCode::InvalidSpec, "pick-freeze pairs are misaligned");
    if (pairs.size() < 2) fail(ErrorCode::TooFewSamples, "need N >= 2 pick-freeze pairs");
    if (pool.size() < 2) fail(ErrorCode::TooFewSamples, "need Nw >= 2 W points");
    if (pairs.stream == pool.stream) {
      fail(ErrorCode::InvalidSpec, "W pool and pick-freeze pairs were drawn from the same stream");
    }
    sample_ = compress(b_, pairs.z, pairs.z_nu, pool.points);
    const std::size_t nw = sample_.w_values.size();
    const std::size_t rows = nw * (nw + 1) / 2;
    words_ = (sample_.singles.size() + 63) / 64;
    if (rows * (words_ * 8 + 1) <= opts_.cache_budget_bytes) {
      cache_bits_.assign(rows * words_, 0);
      cache_state_.assign(rows, kUnfilled);
    }
    tau_stream_ = opts_.tau_stream.value_or(
        pairs.stream.with_role(StreamRole::Bootstrap).with_replicate(kTauSamplingReplicate));
  }

  const CompressedSample<Backend>& sample() const { return sample_; }
  const StreamId& tau_stream() const { return tau_stream_; }
  bool caching() const { return !cache_state_.empty(); }

  /// Estimate with the given multiplicities on distinct pairs and distinct W
  /// values. `w_raw` lists the W multiset by position (needed for IncompleteU).
  IndexEstimate estimate(std::span<const std::int64_t> pair_weights, std::span<const std::int64_t> w_weights,
                         std::span<const std::uint32_t> w_raw, EstimationMode mode, PhiloxStream* tau_rng) {
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t n_total = std::accumulate(pair_weights.begin(), pair_weights.end(), std::int64_t{0});
    Accumulator acc;
    if (mode.kind == ModeKind::ExactU) {
      if constexpr (std::is_same_v<Backend, backend::RealLine>) {
        acc = sweep_real_line(pair_weights, w_weights, n_total);
      } else if constexpr (std::is_same_v<Backend, backend::Sphere<2>>) {
        acc = sweep_circle(pair_weights, w_weights, n_total);
      } else {
        acc = run_plan(exact_pair_plan(w_weights), pair_weights, n_total);
      }
    } else {
      if (tau_rng == nullptr) fail(ErrorCode::InvalidSpec, "IncompleteU needs a pair-selection stream");
      acc = run_plan(incomplete_pair_plan(w_raw, mode.m, *tau_rng), pair_weights, n_total);
    }
    auto est = finish(acc, n_total, static_cast<std::size_t>(n_total), w_raw.size(), mode);
    est.elapsed = std::chrono::steady_clock::now() - start;
    return est;
  }

  IndexEstimate estimate(EstimationMode mode) {
    const auto pw = sample_.base_pair_weights();
    const auto ww = sample_.base_w_weights();
    PhiloxStream tau_rng(tau_stream_);
    return estimate(pw, ww, sample_.w_of, mode, &tau_rng);
  }

private:
  static constexpr std::uint8_t kUnfilled = 0;
  static constexpr std::uint8_t kFilled = 1;
  static constexpr std::uint8_t kDropped = 2;

  std::size_t tri_index(std::uint32_t a, std::uint32_t b) const {
    // rows a' < a contribute n - a' entries each
    const std::size_t n = sample_.w_values.size();
    return std::size_t{a} * n - std::size_t{a} * (std::size_t{a} - 1) / 2 + (b - a);
  }

  /// Fills `bits` with membership of every distinct single in ball(a, b);
  /// returns false when the W pair has no unique geodesic.
  bool membership(std::uint32_t a, std::uint32_t b, std::vector<std::uint64_t>& bits) {
    std::optional<Ball> ball;
    try {
      ball.emplace(b_.ball(sample_.w_values[a], sample_.w_values[b]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AntipodalPoints) throw;
      return false;
    }
    std::fill(bits.begin(), bits.end(), 0);
    for (std::size_t s = 0; s < sample_.singles.size(); ++s) {
      if (b_.contains(*ball, sample_.singles[s])) bits[s >> 6] |= std::uint64_t{1} << (s & 63);
    }
    return true;
  }

  Accumulator run_plan(const std::vector<TauEntry>& plan, std::span<const std::int64_t> pair_weights,
                       std::int64_t n_total) {
    const unsigned threads = resolve_threads(opts_.threads);
    std::vector<Accumulator> partial(threads);
    parallel_chunks(plan.size(), threads, [&](std::size_t begin, std::size_t end, unsigned worker) {
      std::vector<std::uint64_t> scratch(words_);
      Accumulator acc;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& tau = plan[i];
        const std::uint64_t* bits = nullptr;
        if (caching()) {
          const std::size_t row = tri_index(tau.a, tau.b);
          if (cache_state_[row] == kUnfilled) {
            std::vector<std::uint64_t>& tmp = scratch;
            const bool ok = membership(tau.a, tau.b, tmp);
            if (ok) std::copy(tmp.begin(), tmp.end(), cache_bits_.begin() + static_cast<std::ptrdiff_t>(row * words_));
            cache_state_[row] = ok ? kFilled : kDropped;
          }
          if (cache_state_[row] == kDropped) {
            acc.dropped += tau.weight;
            continue;
          }
          bits = cache_bits_.data() + row * words_;
        } else {
          if (!membership(tau.a, tau.b, scratch)) {
            acc.dropped += tau.weight;
            continue;
          }
          bits = scratch.data();
        }
        std::int64_t g = 0;
        std::int64_t j2 = 0;
        for (std::size_t u = 0; u < pair_weights.size(); ++u) {
          const std::int64_t w = pair_weights[u];
          if (w == 0) continue;
          const std::uint32_t f = sample_.pair_first[u];
          const std::uint32_t s = sample_.pair_second[u];
          const int hf = static_cast<int>((bits[f >> 6] >> (f & 63)) & 1u);
          const int hs = static_cast<int>((bits[s >> 6] >> (s & 63)) & 1u);
          g += w * (hf & hs);
          j2 += w * (hf + hs);
        }
        acc.add_term(tau.weight, n_total, g, j2);
      }
      partial[worker] = acc;
    });
    Accumulator total;
    for (const auto& p : partial) total += p;
    return total;
  }

  /// Exact U-statistic on the real line in O(Nw (N + Nw)): W values are
  /// processed in sorted order so each ball's right end only moves forward.
  Accumulator sweep_real_line(std::span<const std::int64_t> pair_weights, std::span<const std::int64_t> w_weights,
                              std::int64_t n_total) const {
    const auto& singles = sample_.singles;
    const std::size_t k = singles.size();
    std::vector<std::uint32_t> order(k);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return singles[x] < singles[y]; });
    std::vector<std::uint32_t> rank(k);
    std::vector<double> sorted(k);
    for (std::uint32_t r = 0; r < k; ++r) {
      rank[order[r]] = r;
      sorted[r] = singles[order[r]];
    }
    std::vector<std::int64_t> single_weight(k, 0);
    struct RankedPair {
      std::uint32_t lo;
      std::uint32_t hi;
      std::int64_t weight;
    };
    std::vector<RankedPair> ranked;
    ranked.reserve(pair_weights.size());
    for (std::size_t u = 0; u < pair_weights.size(); ++u) {
      const std::int64_t w = pair_weights[u];
      if (w == 0) continue;
      const auto rf = rank[sample_.pair_first[u]];
      const auto rs = rank[sample_.pair_second[u]];
      single_weight[rf] += w;
      single_weight[rs] += w;
      ranked.push_back({std::min(rf, rs), std::max(rf, rs), w});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedPair& x, const RankedPair& y) { return x.hi < y.hi; });
    std::vector<std::int64_t> prefix(k + 1, 0);
    for (std::size_t r = 0; r < k; ++r) prefix[r + 1] = prefix[r] + single_weight[r];

    std::vector<std::uint32_t> wo;
    for (std::uint32_t a = 0; a < w_weights.size(); ++a) {
      if (w_weights[a] != 0) wo.push_back(a);
    }
    const auto& wv = sample_.w_values;
    std::sort(wo.begin(), wo.end(), [&](auto x, auto y) { return wv[x] < wv[y]; });

    Accumulator acc;
    for (std::size_t ia = 0; ia < wo.size(); ++ia) {
      const std::uint32_t a = wo[ia];
      const std::int64_t wa = w_weights[a];
      std::size_t cursor = 0;
      std::int64_t g = 0;
      std::size_t lo_rank = 0;
      for (std::size_t ib = ia; ib < wo.size(); ++ib) {
        const std::uint32_t b = wo[ib];
        const std::int64_t weight = (ib == ia) ? wa * (wa - 1) / 2 : wa * w_weights[b];
        const auto ball = b_.ball(wv[a], wv[b]);
        if (ib == ia) {
          lo_rank = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), ball.lo) - sorted.begin());
        }
        const auto hi_end =
            static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), ball.hi) - sorted.begin());
        while (cursor < ranked.size() && ranked[cursor].hi < hi_end) {
          if (ranked[cursor].lo >= lo_rank) g += ranked[cursor].weight;
          ++cursor;
        }
        if (weight == 0) continue;
        const std::int64_t j2 = hi_end > lo_rank ? prefix[hi_end] - prefix[lo_rank] : 0;
        acc.add_term(weight, n_total, g, j2);
      }
    }
    return acc;
  }

  /// Arcs of the circle as ranges of the angle-sorted singles, laid out twice
  /// around the circle. Built once and shared by every bootstrap replicate.
  struct CircleLayout {
    struct End {
      std::uint32_t a;
      std::uint32_t b;
      std::uint32_t hi; // exclusive end in the doubled order
    };
    struct Start {
      std::uint32_t lo; // first position in the doubled order
      std::vector<End> ends; // by increasing hi
    };
    std::vector<std::uint32_t> pos; // single -> position in angle order
    std::vector<Start> starts;      // by W value
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dropped;
  };

  const CircleLayout& circle_layout() {
    if (circle_) return *circle_;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double tol = b_.tolerance();
    auto angle = [](const Point& p) { return std::atan2(p[1], p[0]); };
    const auto& singles = sample_.singles;
    const std::size_t k = singles.size();
    std::vector<double> theta(k);
    for (std::size_t i = 0; i < k; ++i) theta[i] = angle(singles[i]);
    std::vector<std::uint32_t> order(k);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return theta[x] < theta[y]; });
    CircleLayout out;
    out.pos.resize(k);
    std::vector<double> doubled(2 * k);
    for (std::uint32_t r = 0; r < k; ++r) {
      out.pos[order[r]] = r;
      doubled[r] = theta[order[r]];
      doubled[r + k] = theta[order[r]] + two_pi;
    }
    const auto& wv = sample_.w_values;
    const std::size_t nw = wv.size();
    std::vector<double> phi(nw);
    for (std::size_t a = 0; a < nw; ++a) phi[a] = angle(wv[a]);
    out.starts.resize(nw);
    for (std::uint32_t s = 0; s < nw; ++s) {
      double x = phi[s] - tol;
      if (x < -std::numbers::pi) x += two_pi;
      out.starts[s].lo = static_cast<std::uint32_t>(std::lower_bound(doubled.begin(), doubled.end(), x) - doubled.begin());
    }
    auto add = [&](std::uint32_t s, std::uint32_t a, std::uint32_t b, double delta) {
      double x = phi[s] - tol;
      if (x < -std::numbers::pi) x += two_pi;
      const double y = x + delta + 2.0 * tol;
      const auto hi = static_cast<std::uint32_t>(std::upper_bound(doubled.begin(), doubled.end(), y) - doubled.begin());
      out.starts[s].ends.push_back({a, b, std::max(hi, out.starts[s].lo)});
    };
    for (std::uint32_t a = 0; a < nw; ++a) {
      add(a, a, a, 0.0);
      for (std::uint32_t b = a + 1; b < nw; ++b) {
        try {
          (void)b_.ball(wv[a], wv[b]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AntipodalPoints) throw;
          out.dropped.emplace_back(a, b);
          continue;
        }
        double d = phi[b] - phi[a];
        if (d < 0.0) d += two_pi;
        if (d < std::numbers::pi) {
          add(a, a, b, d);
        } else {
          add(b, a, b, two_pi - d);
        }
      }
    }
    for (auto& st : out.starts) {
      std::sort(st.ends.begin(), st.ends.end(), [](const auto& x, const auto& y) { return x.hi < y.hi; });
    }
    circle_.emplace(std::move(out));
    return *circle_;
  }

  /// Exact U-statistic on the circle in O(Nw (N + Nw)): for each arc start,
  /// arcs grow with their far end, as on the real line.
  Accumulator sweep_circle(std::span<const std::int64_t> pair_weights, std::span<const std::int64_t> w_weights,
                           std::int64_t n_total) {
    const auto& layout = circle_layout();
    const std::size_t k = sample_.singles.size();
    std::vector<std::int64_t> prefix(2 * k + 1, 0);
    {
      std::vector<std::int64_t> single_weight(k, 0);
      for (std::size_t u = 0; u < pair_weights.size(); ++u) {
        single_weight[layout.pos[sample_.pair_first[u]]] += pair_weights[u];
        single_weight[layout.pos[sample_.pair_second[u]]] += pair_weights[u];
      }
      for (std::size_t r = 0; r < 2 * k; ++r) prefix[r + 1] = prefix[r] + single_weight[r % k];
    }
    std::vector<std::uint32_t> active;
    for (std::uint32_t u = 0; u < pair_weights.size(); ++u) {
      if (pair_weights[u] != 0) active.push_back(u);
    }
    auto tau_weight = [&](std::uint32_t a, std::uint32_t b) {
      return a == b ? w_weights[a] * (w_weights[a] - 1) / 2 : w_weights[a] * w_weights[b];
    };

    const unsigned threads = resolve_threads(opts_.threads);
    std::vector<Accumulator> partial(threads);
    parallel_chunks(layout.starts.size(), threads, [&](std::size_t begin, std::size_t end, unsigned worker) {
      Accumulator acc;
      std::vector<std::uint32_t> bucket_start(k + 1);
      std::vector<std::uint32_t> by_reach(active.size());
      std::vector<std::uint32_t> reach(active.size());
      for (std::size_t s = begin; s < end; ++s) {
        const auto& st = layout.starts[s];
        bool any = false;
        for (const auto& e : st.ends) any = any || tau_weight(e.a, e.b) != 0;
        if (!any) continue;
        // counting sort of pairs by the rotated position of their farther member
        const std::uint32_t lo = st.lo;
        std::fill(bucket_start.begin(), bucket_start.end(), 0u);
        for (std::size_t i = 0; i < active.size(); ++i) {
          const std::uint32_t u = active[i];
          const std::uint32_t pf = (layout.pos[sample_.pair_first[u]] + static_cast<std::uint32_t>(k) - lo % k) % k;
          const std::uint32_t ps = (layout.pos[sample_.pair_second[u]] + static_cast<std::uint32_t>(k) - lo % k) % k;
          reach[i] = std::max(pf, ps);
          ++bucket_start[reach[i] + 1];
        }
        for (std::size_t r = 0; r < k; ++r) bucket_start[r + 1] += bucket_start[r];
        for (std::size_t i = 0; i < active.size(); ++i) by_reach[bucket_start[reach[i]]++] = active[i];
        std::size_t cursor = 0;
        std::int64_t g = 0;
        // after the fill above, bucket_start[r] is the end of bucket r
        for (const auto& e : st.ends) {
          const std::uint32_t span = e.hi - lo;
          const std::size_t stop = span == 0 ? 0 : bucket_start[span - 1];
          while (cursor < stop) g += pair_weights[by_reach[cursor++]];
          const std::int64_t weight = tau_weight(e.a, e.b);
          if (weight == 0) continue;
          acc.add_term(weight, n_total, g, prefix[e.hi] - prefix[lo]);
        }
      }
      partial[worker] = acc;
    });
    Accumulator total;
    for (const auto& p : partial) total += p;
    for (const auto& [a, b] : layout.dropped) total.dropped += tau_weight(a, b);
    return total;
  }

  Backend b_;
  EstimatorOptions opts_;
  CompressedSample<Backend> sample_;
  std::optional<CircleLayout> circle_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> cache_bits_;
  std::vector<std::uint8_t> cache_state_;
  StreamId tau_stream_;
};

// Quadrant "balls" {t : t <= w componentwise} for the Cramér-von Mises index.
class Quadrant {
public:
  using Point = Eigen::VectorXd;
  using Ball = Eigen::VectorXd;

  bool contains(const Ball& w, const Point& t) const { return (t.array() <= w.array()).all(); }
  bool equal(const Point& a, const Point& b) const { return a == b; }
  std::size_t hash(const Point& a) const {
    return backend::hash_doubles(a.data(), static_cast<std::size_t>(a.size()));
  }
};

} // namespace detail

// --- ball index ---------------------------------------------------------------

/// (S_hat, D_hat, B_hat) without the degenerate-denominator check.
inline IndexEstimate estimate_ball_statistics(const PickFreezeSample& pairs, const WPool& pool,
                                              const ManifoldKind& kind, EstimationMode mode = {},
                                              const EstimatorOptions& opts = {}) {
  return with_backend(kind, [&](auto b) {
    detail::BallKernel<decltype(b)> kernel(b, pairs, pool, opts);
    return kernel.estimate(mode);
  });
}

inline double estimate_S(const PickFreezeSample& pairs, const WPool& pool, const ManifoldKind& kind,
                         EstimationMode mode = {}, const EstimatorOptions& opts = {}) {
  return estimate_ball_statistics(pairs, pool, kind, mode, opts).s_hat;
}

inline double estimate_D(const PickFreezeSample& pairs, const WPool& pool, const ManifoldKind& kind,
                         EstimationMode mode = {}, const EstimatorOptions& opts = {}) {
  return estimate_ball_statistics(pairs, pool, kind, mode, opts).d_hat;
}

/// B_hat = S_hat / D_hat; throws DegenerateDenominator when D_hat <= 1e-12.
inline IndexEstimate estimate_B(const PickFreezeSample& pairs, const WPool& pool, const ManifoldKind& kind,
                                EstimationMode mode = {}, const EstimatorOptions& opts = {}) {
  auto est = estimate_ball_statistics(pairs, pool, kind, mode, opts);
  if (est.degenerate()) {
    fail(ErrorCode::DegenerateDenominator,
         "ball denominator D_hat = " + std::to_string(est.d_hat) + " (output has no spread over the balls)");
  }
  return est;
}

// --- Cramér-von Mises comparison index ----------------------------------------

using Embedding = std::function<Eigen::VectorXd(const ManifoldPoint&)>;

/// Scalar -> (v); UnitVector, LogSurface, Euclid -> their coordinates.
inline Eigen::VectorXd default_embedding(const ManifoldPoint& p) {
  return std::visit(overloaded{
                        [](const Scalar& s) {
                          Eigen::VectorXd v(1);
                          v[0] = s.value;
                          return v;
                        },
                        [](const UnitVector& u) { return Eigen::VectorXd(u.coords); },
                        [](const LogSurface& l) {
                          Eigen::VectorXd v(3);
                          v << l.coords[0], l.coords[1], l.coords[2];
                          return v;
                        },
                        [](const Euclid& e) { return Eigen::VectorXd(e.coords); },
                        [](const Spd&) -> Eigen::VectorXd {
                          fail(ErrorCode::InvalidSpec, "SPD outputs have no quadrant embedding");
                        },
                    },
                    p);
}

namespace detail {

/// Quadrant statistic over single W points; same integer bookkeeping as the
/// ball kernel.
class QuadrantKernel {
public:
  QuadrantKernel(const PickFreezeSample& pairs, const WPool& pool, const Embedding& embed,
                 EstimatorOptions opts = {})
      : opts_(std::move(opts)) {
    if (pairs.z.size() != pairs.z_nu.size()) fail(ErrorCode::InvalidSpec, "pick-freeze pairs are misaligned");
    if (pairs.size() < 2) fail(ErrorCode::TooFewSamples, "need N >= 2 pick-freeze pairs");
    if (pool.size() < 2) fail(ErrorCode::TooFewSamples, "need Nw >= 2 W points");
    Quadrant q;
    Interner<Quadrant> singles(q);
    std::unordered_map<std::uint64_t, std::uint32_t> pair_index;
    Eigen::Index dim = -1;
    auto load = [&](const ManifoldPoint& p) {
      Eigen::VectorXd v = embed(p);
      if (dim < 0) dim = v.size();
      if (v.size() != dim || !v.allFinite()) fail(ErrorCode::InvalidPoint, "inconsistent quadrant embedding");
      return v;
    };
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const auto f = singles.intern(load(pairs.z[j]));
      const auto s = singles.intern(load(pairs.z_nu[j]));
      auto [it, inserted] = pair_index.try_emplace((std::uint64_t{f} << 32) | s,
                                                   static_cast<std::uint32_t>(sample_.pair_first.size()));
      if (inserted) {
        sample_.pair_first.push_back(f);
        sample_.pair_second.push_back(s);
      }
      sample_.pair_of.push_back(it->second);
    }
    sample_.singles = singles.release();
    Interner<Quadrant> wv(q);
    for (const auto& p : pool.points) sample_.w_of.push_back(wv.intern(load(p)));
    sample_.w_values = wv.release();
    tau_stream_ = opts_.tau_stream.value_or(
        pairs.stream.with_role(StreamRole::Bootstrap).with_replicate(kTauSamplingReplicate));
  }

  const CompressedSample<Quadrant>& sample() const { return sample_; }
  const StreamId& tau_stream() const { return tau_stream_; }

  IndexEstimate estimate(std::span<const std::int64_t> pair_weights, std::span<const std::int64_t> w_weights,
                         std::span<const std::uint32_t> w_raw, EstimationMode mode, PhiloxStream* rng) {
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t n_total = std::accumulate(pair_weights.begin(), pair_weights.end(), std::int64_t{0});
    std::vector<TauEntry> plan;
    if (mode.kind == ModeKind::ExactU || mode.m >= w_raw.size()) {
      plan = single_plan(w_weights);
    } else {
      if (rng == nullptr) fail(ErrorCode::InvalidSpec, "IncompleteU needs a selection stream");
      std::vector<std::int64_t> picked(sample_.w_values.size(), 0);
      for (auto idx : sample_without_replacement(w_raw.size(), mode.m, *rng)) ++picked[w_raw[idx]];
      plan = single_plan(picked);
    }
    Quadrant q;
    Accumulator acc;
    std::vector<std::uint8_t> hit(sample_.singles.size());
    for (const auto& tau : plan) {
      const auto& w = sample_.w_values[tau.a];
      for (std::size_t s = 0; s < hit.size(); ++s) hit[s] = q.contains(w, sample_.singles[s]) ? 1 : 0;
      std::int64_t g = 0;
      std::int64_t j2 = 0;
      for (std::size_t u = 0; u < pair_weights.size(); ++u) {
        const std::int64_t wt = pair_weights[u];
        if (wt == 0) continue;
        const int hf = hit[sample_.pair_first[u]];
        const int hs = hit[sample_.pair_second[u]];
        g += wt * (hf & hs);
        j2 += wt * (hf + hs);
      }
      acc.add_term(tau.weight, n_total, g, j2);
    }
    auto est = finish(acc, n_total, static_cast<std::size_t>(n_total), w_raw.size(), mode);
    est.elapsed = std::chrono::steady_clock::now() - start;
    return est;
  }

  IndexEstimate estimate(EstimationMode mode) {
    const auto pw = sample_.base_pair_weights();
    const auto ww = sample_.base_w_weights();
    PhiloxStream rng(tau_stream_);
    return estimate(pw, ww, sample_.w_of, mode, &rng);
  }

private:
  EstimatorOptions opts_;
  CompressedSample<Quadrant> sample_;
  StreamId tau_stream_;
};

} // namespace detail

/// Cramér-von Mises statistics with quadrant indicators 1{z <= w}.
inline IndexEstimate estimate_cvm_statistics(const PickFreezeSample& pairs, const WPool& pool,
                                             const Embedding& embed = default_embedding, EstimationMode mode = {},
                                             const EstimatorOptions& opts = {}) {
  detail::QuadrantKernel kernel(pairs, pool, embed, opts);
  return kernel.estimate(mode);
}

/// Normalised Cramér-von Mises index C_hat = S_hat / D_hat.
inline IndexEstimate estimate_cvm(const PickFreezeSample& pairs, const WPool& pool,
                                  const Embedding& embed = default_embedding, EstimationMode mode = {},
                                  const EstimatorOptions& opts = {}) {
  auto est = estimate_cvm_statistics(pairs, pool, embed, mode, opts);
  if (est.degenerate()) {
    fail(ErrorCode::DegenerateDenominator, "quadrant denominator vanishes (no output mass below any W)");
  }
  return est;
}

// --- classical pick-freeze estimator --------------------------------------------

/// T = (1/N) sum Z_j Z_j^nu - ((1/2N) sum (Z_j + Z_j^nu))^2 for scalar outputs.
inline double pick_freeze_variance_T(std::span<const double> z, std::span<const double> z_nu) {
  if (z.size() != z_nu.size()) fail(ErrorCode::InvalidSpec, "pairs are misaligned");
  if (z.size() < 2) fail(ErrorCode::TooFewSamples, "need N >= 2 pairs");
  const double n = static_cast<double>(z.size());
  double cross = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    cross += z[j] * z_nu[j];
    sum += z[j] + z_nu[j];
  }
  const double mean = sum / (2.0 * n);
  return cross / n - mean * mean;
}

inline double pick_freeze_variance_T(const PickFreezeSample& pairs) {
  std::vector<double> z, z_nu;
  z.reserve(pairs.size());
  z_nu.reserve(pairs.size());
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto* a = std::get_if<Scalar>(&pairs.z[j]);
    const auto* b = std::get_if<Scalar>(&pairs.z_nu[j]);
    if (!a || !b) fail(ErrorCode::InvalidPoint, "T estimator needs scalar outputs");
    z.push_back(a->value);
    z_nu.push_back(b->value);
  }
  return pick_freeze_variance_T(z, z_nu);
}

} // namespace geosens

#endif // GEOSENS_ESTIMATORS_HPP
