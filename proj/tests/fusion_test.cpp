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
#include <map>

#include "attnseg/error.hpp"
#include "attnseg/fusion.hpp"
#include "attnseg/reference.hpp"
#include "attnseg/synth.hpp"
#include "attnseg/tensor_ops.hpp"
#include "attnseg/ttf_mask.hpp"
#include "oracle.hpp"

namespace attnseg {
namespace {

using reference::DenseAffinity;

LevelPlanes random_levels(oracle::Gen& g) {
  LevelPlanes maps;
  for (std::size_t r : kResolutions) maps.emplace(r, oracle::random_plane(g, r, r));
  return maps;
}

Plane block_path(const std::map<std::size_t, Tensor>& selfs, const Plane& fused,
                 const LevelWeights& w, NormPlacement norm = NormPlacement::kPerResolution) {
  AffinitySet ops;
  for (const auto& [r, t] : selfs) ops.emplace(r, AffinityOperator(t, fused.rows()));
  return refine_block(ops, fused, w, norm);
}

Plane naive_path(const std::map<std::size_t, Tensor>& selfs, const Plane& fused,
                 const LevelWeights& w, NormPlacement norm = NormPlacement::kPerResolution) {
  std::map<std::size_t, DenseAffinity> dense;
  for (const auto& [r, t] : selfs) dense.emplace(r, reference::up_and_repeat(t, fused.rows()));
  return reference::refine_naive(dense, fused, w, norm);
}

// ---- fuse_cross ------------------------------------------------------------

TEST(FuseCross, OneHotSelectsSingleResolution) {
  oracle::Gen g(1);
  const LevelPlanes maps = random_levels(g);
  const LevelWeights w{{8, 0.0}, {16, 1.0}, {32, 0.0}, {64, 0.0}};
  EXPECT_EQ(fuse_cross(maps, w), upsample_bilinear(maps.at(16), 64, 64));
}

TEST(FuseCross, ConstantMapsStayConstant) {
  LevelPlanes maps;
  for (std::size_t r : kResolutions) maps.emplace(r, Plane(r, r, 0.4));
  const auto fused = fuse_cross(maps, FusionWeights{}.cross);
  for (double v : fused.values()) EXPECT_NEAR(v, 0.4, 1e-12);
}

TEST(FuseCross, DefaultWeightsMatchReferenceLoop) {
  oracle::Gen g(2);
  const FusionWeights fw;
  for (int trial = 0; trial < 5; ++trial) {
    const LevelPlanes maps = random_levels(g);
    Plane want(64, 64);
    for (const auto& [r, w] : fw.cross) {
      const Plane up = oracle::bilinear(maps.at(r), 64, 64);
      for (std::size_t i = 0; i < want.size(); ++i) want.values()[i] += w * up.values()[i];
    }
    EXPECT_LT(oracle::max_abs_diff(fuse_cross(maps, fw.cross), want), 1e-12);
  }
}

TEST(FuseCross, ZeroWeightLevelsMayBeAbsent) {
  oracle::Gen g(3);
  LevelPlanes maps = random_levels(g);
  maps.erase(64);
  EXPECT_NO_THROW(fuse_cross(maps, FusionWeights{}.cross));
}

TEST(FuseCross, MissingPositiveWeightLevelNamesResolution) {
  oracle::Gen g(4);
  LevelPlanes maps = random_levels(g);
  maps.erase(32);
  try {
    fuse_cross(maps, FusionWeights{}.cross);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("r=32"), std::string::npos) << e.what();
  }
}

TEST(FuseCross, AllZeroWeightsRejected) {
  oracle::Gen g(5);
  EXPECT_THROW(fuse_cross(random_levels(g), {{8, 0.0}, {16, 0.0}}), Error);
}

TEST(FuseCross, IsLinearInMaps) {
  oracle::Gen g(6);
  const FusionWeights fw;
  const LevelPlanes a = random_levels(g), b = random_levels(g);
  LevelPlanes sum;
  for (std::size_t r : kResolutions) {
    Plane p(r, r);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.values()[i] = 2.0 * a.at(r).values()[i] - 0.5 * b.at(r).values()[i];
    }
    sum.emplace(r, p);
  }
  const Plane fa = fuse_cross(a, fw.cross), fb = fuse_cross(b, fw.cross);
  const Plane fs = fuse_cross(sum, fw.cross);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_NEAR(fs.values()[i], 2.0 * fa.values()[i] - 0.5 * fb.values()[i], 1e-12);
  }
}

// ---- up_and_repeat ---------------------------------------------------------

TEST(UpAndRepeat, FullSizeIsIdentity) {
  oracle::Gen g(7);
  const Tensor t = oracle::random_self(g, 4);
  const DenseAffinity d = reference::up_and_repeat(t, 4);
  ASSERT_EQ(d.values.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(d.values[i], double(t[i]));
}

TEST(UpAndRepeat, TwoToFourBlockStructure) {
  oracle::Gen g(8);
  const Tensor t = oracle::random_self(g, 2);
  const DenseAffinity d = reference::up_and_repeat(t, 4);
  for (std::size_t I = 0; I < 4; ++I) {
    for (std::size_t J = 0; J < 4; ++J) {
      // Every query in the same 2x2 block shares one slice ...
      const std::size_t lead = (I / 2 * 2) * 4 + J / 2 * 2;
      for (std::size_t key = 0; key < 16; ++key) {
        EXPECT_EQ(d.at(I * 4 + J, key), d.at(lead, key));
      }
      // ... and it is the renormalized bilinear upsampling of s[I/2, J/2].
      const Plane want = oracle::affinity_row(t, 4, I, J);
      for (std::size_t key = 0; key < 16; ++key) {
        EXPECT_NEAR(d.at(I * 4 + J, key), want.values()[key], 1e-12);
      }
    }
  }
}

TEST(UpAndRepeat, RowsSumToOne) {
  oracle::Gen g(9);
  const DenseAffinity d = reference::up_and_repeat(oracle::random_self(g, 4), 8);
  for (std::size_t q = 0; q < 64; ++q) {
    double s = 0.0;
    for (std::size_t k = 0; k < 64; ++k) s += d.at(q, k);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

// ---- refine_naive ------------------------------------------------------------

TEST(RefineNaive, IdentityAffinityGivesNormalizedInput) {
  oracle::Gen g(10);
  const Plane fused = oracle::random_plane(g, 8, 8);
  const Plane out = naive_path({{8, oracle::identity_self(8)}}, fused, {{8, 1.0}});
  EXPECT_EQ(out, minmax_normalize(fused));
}

TEST(RefineNaive, UniformAffinityGivesZeros) {
  oracle::Gen g(11);
  const Plane fused = oracle::random_plane(g, 8, 8);
  const Tensor uniform({8, 8, 8, 8}, 1.0f / 64.0f);
  const auto out = naive_path({{8, uniform}}, fused, {{8, 1.0}});
  for (double v : out.values()) {
    EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(RefineNaive, MatchesQuadrupleLoop) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 4; ++trial) {
    std::map<std::size_t, Tensor> selfs;
    LevelWeights w;
    for (std::size_t r : {2, 4, 8, 16}) {
      selfs.emplace(r, oracle::random_self(g, r));
      w[r] = g.uniform(0.1, 1.0);
    }
    const Plane fused = oracle::random_plane(g, 16, 16);
    EXPECT_LT(oracle::max_abs_diff(naive_path(selfs, fused, w), oracle::refine(selfs, fused, w)),
              1e-9);
    EXPECT_LT(oracle::max_abs_diff(naive_path(selfs, fused, w, NormPlacement::kAfterSum),
                                   oracle::refine(selfs, fused, w, true)),
              1e-9);
  }
}

// ---- refine_block --------------------------------------------------------------

TEST(RefineBlock, AgreesWithNaiveOnRandomInstances) {
  oracle::Gen g(13);
  for (std::size_t r : {2, 4, 8}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::map<std::size_t, Tensor> selfs{{r, oracle::random_self(g, r)}};
      const Plane fused = oracle::random_plane(g, 16, 16);
      const LevelWeights w{{r, g.uniform(0.1, 2.0)}};
      EXPECT_LT(oracle::max_abs_diff(block_path(selfs, fused, w), naive_path(selfs, fused, w)),
                1e-5)
          << "r=" << r << " trial " << trial;
    }
  }
}

TEST(RefineBlock, AgreesWithNaiveAcrossMixedResolutions) {
  oracle::Gen g(14);
  for (int trial = 0; trial < 6; ++trial) {
    std::map<std::size_t, Tensor> selfs;
    LevelWeights w;
    for (std::size_t r : {2, 4, 8, 16}) {
      selfs.emplace(r, oracle::random_self(g, r));
      w[r] = trial == 0 && r == 4 ? 0.0 : g.uniform(0.0, 1.0);
    }
    const Plane fused = oracle::random_plane(g, 16, 16);
    for (auto norm : {NormPlacement::kPerResolution, NormPlacement::kAfterSum}) {
      EXPECT_LT(oracle::max_abs_diff(block_path(selfs, fused, w, norm),
                                     naive_path(selfs, fused, w, norm)),
                1e-5);
    }
  }
}

TEST(RefineBlock, IdentityAffinityExact) {
  oracle::Gen g(15);
  const Plane fused = oracle::random_plane(g, 16, 16);
  const std::map<std::size_t, Tensor> selfs{{16, oracle::identity_self(16)}};
  EXPECT_EQ(block_path(selfs, fused, {{16, 1.0}}), naive_path(selfs, fused, {{16, 1.0}}));
  EXPECT_EQ(block_path(selfs, fused, {{16, 1.0}}), minmax_normalize(fused));
}

TEST(RefineBlock, FullSidePathAgrees) {
  oracle::Gen g(16);
  const std::map<std::size_t, Tensor> selfs{{16, oracle::random_self(g, 16)}};
  const Plane fused = oracle::random_plane(g, 16, 16);
  EXPECT_LT(oracle::max_abs_diff(block_path(selfs, fused, {{16, 1.0}}),
                                 naive_path(selfs, fused, {{16, 1.0}})),
            1e-5);
}

TEST(RefineBlock, ReplicatesCoarseResultInBlocks) {
  oracle::Gen g(17);
  const AffinityOperator op(oracle::random_self(g, 4), 16);
  EXPECT_EQ(op.replication(), 4u);
  const Plane out = op.propagate(oracle::random_plane(g, 16, 16));
  for (std::size_t I = 0; I < 16; ++I) {
    for (std::size_t J = 0; J < 16; ++J) EXPECT_EQ(out(I, J), out(I / 4 * 4, J / 4 * 4));
  }
}

// Row renormalization makes each canvas query a weighted average of the fused
// map, so the unnormalized product never leaves the fused map's range.
TEST(RefineBlock, RenormalizedProductIsAWeightedAverage) {
  oracle::Gen g(18);
  for (std::size_t r : {2, 4, 8, 16}) {
    const AffinityOperator op(oracle::random_self(g, r), 16);
    const Plane fused = oracle::random_plane(g, 16, 16, 0.2, 0.9);
    const auto product = op.propagate(fused);
    for (double v : product.values()) {
      EXPECT_GE(v, 0.2 - 1e-12);
      EXPECT_LE(v, 0.9 + 1e-12);
    }
  }
}

TEST(RefineBlock, ScaleInvariant) {
  oracle::Gen g(19);
  const std::map<std::size_t, Tensor> selfs{{4, oracle::random_self(g, 4)},
                                            {8, oracle::random_self(g, 8)}};
  const LevelWeights w{{4, 0.4}, {8, 0.6}};
  const Plane fused = oracle::random_plane(g, 16, 16);
  const Plane base = block_path(selfs, fused, w);
  for (double s : {0.1, 3.0, 100.0}) {
    Plane scaled = fused;
    for (double& v : scaled.values()) v *= s;
    EXPECT_LT(oracle::max_abs_diff(block_path(selfs, scaled, w), base), 1e-6) << "s=" << s;
  }
}

TEST(RefineBlock, Errors) {
  oracle::Gen g(20);
  const std::map<std::size_t, Tensor> selfs{{4, oracle::random_self(g, 4)}};
  const Plane fused = oracle::random_plane(g, 16, 16);
  EXPECT_THROW(block_path(selfs, fused, {{8, 1.0}}), Error);
  EXPECT_THROW(block_path(selfs, fused, {{4, 0.0}}), Error);
  EXPECT_THROW(block_path(selfs, fused, {{4, -1.0}}), Error);
  EXPECT_THROW(AffinityOperator(oracle::random_self(g, 3), 16), Error);
  EXPECT_THROW(AffinityOperator(Tensor({4, 4, 4, 2}), 16), Error);
  const AffinityOperator op(oracle::random_self(g, 4), 16);
  EXPECT_THROW(op.propagate(Plane(8, 8)), Error);
}

// ---- refine_all_classes ----------------------------------------------------

TEST(RefineAllClasses, SingleBlobIsRecovered) {
  FixtureSpec spec = planted_scene(1);
  const Fixture fx = make_fixture(spec);
  const ScoreStack s = refine_all_classes(fx.dump, FusionWeights{});
  ASSERT_EQ(s.size(), 1u);
  ASSERT_EQ(s.classes[0], "cat");
  const LabelMask mask = labelize(s, 0.55, 64, 64);
  EXPECT_GT(oracle::iou(mask, fx.ground_truth, 1), 0.9);
  // The peak lies inside the blob.
  std::size_t best = 0;
  for (std::size_t i = 0; i < 4096; ++i) {
    if (s.planes[0].values()[i] > s.planes[0].values()[best]) best = i;
  }
  EXPECT_EQ(fx.ground_truth.labels[best], 1);
}

TEST(RefineAllClasses, IdenticalCrossMapsGiveIdenticalPlanes) {
  Fixture fx = make_fixture(planted_scene(2, 0.1, 4));
  // Point the second class at the first class's tokens.
  fx.dump.token_map.spans[1] = fx.dump.token_map.spans[0];
  fx.dump.token_map.spans[0] = {fx.dump.token_map.spans[1].end + 5,
                                fx.dump.token_map.spans[1].end + 6};
  for (auto& [r, stack] : fx.dump.cross) {
    for (auto& t : stack.layers) {
      const std::size_t tokens = t.dim(2);
      const std::size_t a = fx.dump.token_map.spans[1].begin;
      const std::size_t b = fx.dump.token_map.spans[0].begin;
      for (std::size_t cell = 0; cell < r * r; ++cell) t[cell * tokens + b] = t[cell * tokens + a];
    }
  }
  ASSERT_TRUE(validate_dump(fx.dump).ok()) << validate_dump(fx.dump).to_string();
  const ScoreStack s = refine_all_classes(fx.dump, FusionWeights{});
  EXPECT_EQ(s.planes[0], s.planes[1]);
}

TEST(RefineAllClasses, EqualsManualComposition) {
  const Fixture fx = make_fixture(planted_scene(3, 0.05, 9));
  const FusionWeights fw;
  const ScoreStack s = refine_all_classes(fx.dump, fw);
  AffinitySet ops;
  for (const auto& [r, w] : fw.self) {
    if (w > 0) ops.emplace(r, AffinityOperator(average_layers_self(fx.dump.self.at(r))));
  }
  for (std::size_t c = 0; c < 3; ++c) {
    LevelPlanes levels;
    for (const auto& [r, w] : fw.cross) {
      if (w > 0) {
        levels.emplace(r, aggregate_class_tokens(average_layers_cross(fx.dump.cross.at(r)),
                                                 fx.dump.token_map.spans[c]));
      }
    }
    const Plane want = refine_block(ops, fuse_cross(levels, fw.cross), fw.self);
    EXPECT_LT(oracle::max_abs_diff(s.planes[c], want), 1e-12) << "class " << c;
  }
}

TEST(RefineAllClasses, ReducesToNormalizedFusionUnderIdentitySelf) {
  Fixture fx = make_fixture(planted_scene(2, 0.1, 5));
  fx.dump.self.at(64).layers = {oracle::identity_self(64)};
  FusionWeights fw;
  fw.self = {{8, 0.0}, {16, 0.0}, {32, 0.0}, {64, 1.0}};
  const ScoreStack s = refine_all_classes(fx.dump, fw);
  for (std::size_t c = 0; c < 2; ++c) {
    LevelPlanes levels;
    for (std::size_t r : {8, 16, 32}) {
      levels.emplace(r, aggregate_class_tokens(fx.dump.cross.at(r).layers[0],
                                               fx.dump.token_map.spans[c]));
    }
    EXPECT_LT(oracle::max_abs_diff(s.planes[c], minmax_normalize(fuse_cross(levels, fw.cross))),
              1e-12);
  }
}

TEST(RefineAllClasses, ConstantAttentionGivesNoNaN) {
  Fixture fx = make_fixture(planted_scene(2));
  for (auto& [r, stack] : fx.dump.cross) {
    for (auto& t : stack.layers) std::fill(t.values().begin(), t.values().end(), 0.25f);
  }
  const ScoreStack s = refine_all_classes(fx.dump, FusionWeights{});
  for (const auto& p : s.planes) {
    for (double v : p.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(RefineAllClasses, ScoresStayInUnitRangeWhenSelfWeightsExceedOne) {
  const Fixture fx = make_fixture(planted_scene(2, 0.1, 6));
  FusionWeights fw;
  for (auto& [r, w] : fw.self) w = 1.0;
  const ScoreStack s = refine_all_classes(fx.dump, fw);
  for (const auto& p : s.planes) {
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(RefineAllClasses, RejectsInvalidInput) {
  Fixture fx = make_fixture(planted_scene(1));
  FusionWeights fw;
  fw.alpha = -0.1;
  try {
    refine_all_classes(fx.dump, fw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  fx.dump.self.erase(16);
  try {
    refine_all_classes(fx.dump, FusionWeights{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
}

}  // namespace
}  // namespace attnseg
