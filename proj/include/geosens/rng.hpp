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

#ifndef GEOSENS_RNG_HPP
#define GEOSENS_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <string>

#include "error.hpp"

namespace geosens {

/// Philox4x32-10 block function (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr int kRounds = 10;

  static constexpr Counter apply(Counter ctr, Key key) {
    for (int r = 0; r < kRounds; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

enum class StreamRole : std::uint8_t {
  Pairs = 1,
  WPool = 2,
  Bootstrap = 3,
  Auxiliary = 4,
};

inline std::string to_string(StreamRole role) {
  switch (role) {
  case StreamRole::Pairs: return "pairs";
  case StreamRole::WPool: return "wpool";
  case StreamRole::Bootstrap: return "bootstrap";
  case StreamRole::Auxiliary: return "auxiliary";
  }
  return "unknown";
}

/// Identifies one independent random stream. Two ids that differ in any field
/// address disjoint regions of the Philox counter space.
struct StreamId {
  std::uint64_t seed = 0;
  StreamRole role = StreamRole::Pairs;
  std::uint32_t replicate = 0;
  std::uint32_t group = 0; // 24 significant bits (sweep grid index)

  static constexpr std::uint32_t kMaxGroup = (1u << 24) - 1;

  friend bool operator==(const StreamId&, const StreamId&) = default;

  StreamId with_role(StreamRole r) const { return {seed, r, replicate, group}; }
  StreamId with_replicate(std::uint32_t rep) const { return {seed, role, rep, group}; }
  StreamId with_group(std::uint32_t g) const { return {seed, role, replicate, g}; }
};

/// Counter-based engine satisfying UniformRandomBitGenerator. Each draw is a
/// pure function of (StreamId, position), so streams can be regenerated or
/// advanced independently on any thread.
class PhiloxStream {
public:
  using result_type = std::uint64_t;

  explicit PhiloxStream(const StreamId& id) : id_(id) {
    if (id.group > StreamId::kMaxGroup) {
      fail(ErrorCode::InvalidSpec, "stream group index exceeds 24 bits");
    }
    const std::uint64_t k = splitmix64(id.seed);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    high_ = {id.replicate, (static_cast<std::uint32_t>(id.role) << 24) | id.group};
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    const std::size_t i = 2 * lane_++;
    return (std::uint64_t{buffer_[i + 1]} << 32) | buffer_[i];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) {
      fail(ErrorCode::InvalidSpec, "below(0)");
    }
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  const StreamId& id() const { return id_; }
  std::uint64_t blocks_consumed() const { return block_; }

private:
  void refill() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32), high_[0], high_[1]};
    buffer_ = Philox4x32::apply(ctr, key_);
    ++block_;
    lane_ = 0;
  }

  StreamId id_;
  Philox4x32::Key key_{};
  std::array<std::uint32_t, 2> high_{};
  Philox4x32::Counter buffer_{};
  std::uint64_t block_ = 0;
  int lane_ = 2;
};

} // namespace geosens

#endif // GEOSENS_RNG_HPP
