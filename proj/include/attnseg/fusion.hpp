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
#pragma once

// Hierarchical attention refinement: weighted multi-resolution fusion of
// cross-attention maps, followed by propagation through self-attention
// affinities transformed to the canvas grid.
//
// The affinity for grid side r acts on the canvas as the (G^2 x G^2) matrix
// whose row for canvas query (I, J) is the key slice s[I / k, J / k, :, :]
// bilinearly upsampled to G x G and renormalized to sum 1 (k = G / r).
// That matrix is never built here. Because upsampling is linear,
//
//   <renorm(up(slice)), C> = <slice, up^T(C)> / <slice, up^T(1)>
//
// so each coarse query costs r^2 work and its result is shared by the k x k
// canvas queries it covers. See reference.hpp for the materialized path.

#include <cstddef>
#include <map>
#include <vector>

#include "attnseg/model.hpp"
#include "attnseg/tensor.hpp"

namespace attnseg {

using LevelPlanes = std::map<std::size_t, Plane>;

/// sum_r w[r] * upsample_bilinear(maps[r], canvas, canvas). Zero-weight
/// levels are skipped and may be absent from `maps`.
Plane fuse_cross(const LevelPlanes& maps, const LevelWeights& weights,
                 std::size_t canvas = kCanvas);

/// Layer-averaged self-attention at one grid side with its per-query
/// renormalization constants precomputed. Immutable after construction.
class AffinityOperator {
 public:
  AffinityOperator(Tensor averaged_self, std::size_t canvas = kCanvas);

  std::size_t side() const noexcept { return side_; }
  std::size_t canvas() const noexcept { return canvas_; }
  std::size_t replication() const noexcept { return canvas_ / side_; }

  /// Unnormalized affinity product for a canvas-sized map, as a
  /// (canvas x canvas) plane.
  Plane propagate(const Plane& fused) const;

 private:
  Tensor self_;
  std::size_t side_;
  std::size_t canvas_;
  std::vector<double> row_mass_;  // <slice, up^T(1)>, one per coarse query
};

using AffinitySet = std::map<std::size_t, AffinityOperator>;

Plane refine_block(const AffinitySet& affinities, const Plane& fused,
                   const LevelWeights& w_self,
                   NormPlacement norm = NormPlacement::kPerResolution);

/// Average layers, aggregate class tokens, fuse and refine every class in the
/// dump. Throws Error(kValidation) when the dump or weights are invalid.
/// Planes are divided by sum(w_self) when that sum exceeds one, keeping
/// scores in [0, 1].
ScoreStack refine_all_classes(const AttentionDump& dump,
                              const FusionWeights& weights);

}  // namespace attnseg
