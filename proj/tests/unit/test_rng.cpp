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
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "geosens/rng.hpp"

namespace geosens {
namespace {

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PhiloxStream, SameIdSameSequence) {
  const StreamId id{42, StreamRole::Pairs, 3, 17};
  PhiloxStream a(id), b(id);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(PhiloxStream, FieldsSeparateStreams) {
  const StreamId base{42, StreamRole::Pairs, 0, 0};
  const std::vector<StreamId> ids{base,
                                  base.with_role(StreamRole::WPool),
                                  base.with_role(StreamRole::Bootstrap),
                                  base.with_replicate(1),
                                  base.with_group(1),
                                  StreamId{43, StreamRole::Pairs, 0, 0}};
  std::set<std::uint64_t> first;
  for (const auto& id : ids) {
    PhiloxStream s(id);
    first.insert(s());
  }
  EXPECT_EQ(first.size(), ids.size());
}

TEST(PhiloxStream, UniformInUnitInterval) {
  PhiloxStream s({7, StreamRole::Auxiliary, 0, 0});
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(PhiloxStream, BelowStaysInRange) {
  PhiloxStream s({7, StreamRole::Auxiliary, 0, 0});
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = s.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(s.below(0), Error);
}

TEST(PhiloxStream, GroupLimit) {
  EXPECT_THROW(PhiloxStream({1, StreamRole::Pairs, 0, StreamId::kMaxGroup + 1}), Error);
  EXPECT_NO_THROW(PhiloxStream({1, StreamRole::Pairs, 0, StreamId::kMaxGroup}));
}

} // namespace
} // namespace geosens
