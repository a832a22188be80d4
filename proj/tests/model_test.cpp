/**
 * Copyright 2026 The attnseg Authors
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
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "attnseg/model.hpp"
#include "attnseg/synth.hpp"
#include "oracle.hpp"

namespace attnseg {
namespace {

AttentionDump small_dump(std::uint64_t seed = 3) {
  FixtureSpec spec = planted_scene(2, 0.05, seed);
  return make_fixture(spec).dump;
}

TEST(ValidateDump, FixtureIsClean) {
  const auto report = validate_dump(small_dump());
  EXPECT_TRUE(report.ok()) << report.to_string();
}

TEST(ValidateDump, RowSumViolationNamesResolutionLayerAndQuery) {
  AttentionDump dump = small_dump();
  Tensor& t = dump.self.at(16).layers.at(0);
  // Query (2, 5): scale its row so it sums to 1.5.
  const std::size_t n = 16 * 16, q = 2 * 16 + 5;
  for (std::size_t k = 0; k < n; ++k) t[q * n + k] *= 1.5f;

  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 1u) << report.to_string();
  const auto& v = report.violations[0];
  EXPECT_EQ(v.kind, "row_sum");
  EXPECT_NE(v.message.find("r=16"), std::string::npos) << v.message;
  EXPECT_NE(v.message.find("layer 0"), std::string::npos) << v.message;
  EXPECT_NE(v.message.find("(2, 5)"), std::string::npos) << v.message;
  EXPECT_NE(v.message.find("1.5"), std::string::npos) << v.message;
}

TEST(ValidateDump, MissingResolutionIsOneViolation) {
  AttentionDump dump = small_dump();
  dump.cross.erase(32);
  dump.self.erase(32);
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 1u) << report.to_string();
  EXPECT_EQ(report.violations[0].message, "missing self/cross stack at r=32");
}

TEST(ValidateDump, MissingOneKindIsNamed) {
  AttentionDump dump = small_dump();
  dump.self.erase(8);
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].message, "missing self stack at r=8");
}

TEST(ValidateDump, RowSumToleranceIsAbsolute) {
  AttentionDump dump = small_dump();
  Tensor& t = dump.self.at(8).layers.at(0);
  t[0] += 0.0009f;  // inside the tolerance
  EXPECT_TRUE(validate_dump(dump).ok());
  t[0] += 0.0005f;  // now 1.4e-3 off
  EXPECT_EQ(validate_dump(dump).violations.size(), 1u);
}

TEST(ValidateDump, NegativeAndNonFiniteEntries) {
  AttentionDump dump = small_dump();
  Tensor& c = dump.cross.at(8).layers.at(0);
  c[10] = -0.5f;
  c[20] = -0.25f;
  c[30] = std::numeric_limits<float>::quiet_NaN();
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 2u) << report.to_string();
  EXPECT_EQ(report.violations[0].kind, "non_finite");
  EXPECT_EQ(report.violations[1].kind, "negative");
  EXPECT_NE(report.violations[1].message.find("2 negative"), std::string::npos);
  EXPECT_NE(report.violations[1].message.find("index 10"), std::string::npos);
}

TEST(ValidateDump, ShapeErrors) {
  AttentionDump dump = small_dump();
  dump.cross.at(16).layers.at(0) = Tensor({16, 8, 77});
  dump.self.at(32).layers.at(0) = Tensor({32, 32, 32, 16});
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 2u) << report.to_string();
  for (const auto& v : report.violations) EXPECT_EQ(v.kind, "shape");
}

TEST(ValidateDump, TokenCountsMustAgree) {
  AttentionDump dump = small_dump();
  dump.cross.at(64).layers.at(0) = Tensor({64, 64, 76});
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 1u) << report.to_string();
  EXPECT_EQ(report.violations[0].message, "cross stacks disagree on token count T");
}

TEST(ValidateDump, TokenSpanProblems) {
  AttentionDump dump = small_dump();
  dump.token_map.spans[1] = {70, 80};
  EXPECT_EQ(validate_dump(dump).violations.at(0).kind, "token_span");

  dump = small_dump();
  dump.token_map.spans[1] = dump.token_map.spans[0];
  EXPECT_NE(validate_dump(dump).to_string().find("overlap"), std::string::npos);

  dump = small_dump();
  dump.token_map.spans[0] = {4, 4};
  EXPECT_NE(validate_dump(dump).to_string().find("empty span"), std::string::npos);

  dump = small_dump();
  dump.token_map.classes[1] = dump.token_map.classes[0];
  EXPECT_NE(validate_dump(dump).to_string().find("duplicate"), std::string::npos);

  dump = small_dump();
  dump.token_map.spans.pop_back();
  EXPECT_FALSE(validate_dump(dump).ok());
}

TEST(ValidateDump, UnexpectedResolution) {
  AttentionDump dump = small_dump();
  dump.cross[4] = CrossLayerStack{4, {Tensor({4, 4, 77})}};
  const auto report = validate_dump(dump);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].kind, "unexpected_resolution");
}

TEST(ValidateDump, IsIdempotentAndPure) {
  AttentionDump dump = small_dump();
  dump.self.at(8).layers[0][5] = 2.0f;
  dump.cross.at(16).layers[0][0] = -1.0f;
  const AttentionDump before = dump;
  const auto a = validate_dump(dump);
  const auto b = validate_dump(dump);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.ok());
  EXPECT_EQ(dump.cross.at(16).layers, before.cross.at(16).layers);
  EXPECT_EQ(dump.self.at(8).layers, before.self.at(8).layers);
}

TEST(ValidateDump, RandomFixturesAlwaysPass) {
  oracle::Gen g(99);
  for (int trial = 0; trial < 12; ++trial) {
    FixtureSpec spec = planted_scene(1 + g.index(4), g.uniform(0.0, 0.3), trial);
    spec.layers = 1 + g.index(3);
    spec.bandwidth = g.uniform(0.2, 3.0);
    spec.flipped = g.index(2) == 1;
    const auto report = validate_dump(make_fixture(spec).dump);
    EXPECT_TRUE(report.ok()) << "trial " << trial << "\n" << report.to_string();
  }
}

TEST(FusionWeights, DefaultsMatchPublishedValues) {
  const FusionWeights w;
  EXPECT_EQ(w.cross, (LevelWeights{{8, 0.15}, {16, 0.7}, {32, 0.15}, {64, 0.0}}));
  EXPECT_EQ(w.self, (LevelWeights{{8, 0.1}, {16, 0.1}, {32, 0.5}, {64, 0.3}}));
  EXPECT_DOUBLE_EQ(w.alpha, 0.55);
  EXPECT_EQ(w.norm, NormPlacement::kPerResolution);
  EXPECT_TRUE(w.violations().empty());
}

TEST(FusionWeights, Violations) {
  FusionWeights w;
  w.alpha = 1.5;
  EXPECT_EQ(w.violations().size(), 1u);
  w = {};
  w.cross[16] = -0.1;
  EXPECT_FALSE(w.violations().empty());
  w = {};
  for (auto& [r, v] : w.self) v = 0.0;
  EXPECT_FALSE(w.violations().empty());
  w = {};
  w.self[8] = std::nan("");
  EXPECT_FALSE(w.violations().empty());
}

TEST(Legend, BackgroundFirst) {
  EXPECT_EQ(make_legend({"cat", "tv monitor"}),
            (std::vector<std::string>{"background", "cat", "tv monitor"}));
}

TEST(Resolutions, StandardSet) {
  for (std::size_t r : {8, 16, 32, 64}) EXPECT_TRUE(is_standard_resolution(r));
  for (std::size_t r : {0, 2, 4, 12, 128}) EXPECT_FALSE(is_standard_resolution(r));
}

}  // namespace
}  // namespace attnseg
