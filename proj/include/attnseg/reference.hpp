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

// Serial reference for the affinity refinement. It materializes the
// (G^2 x G^2) canvas affinity matrices and exists to check refine_block;
// memory is O(G^4), so keep G small outside benchmarks.

#include <cstddef>
#include <map>
#include <vector>

#include "attnseg/model.hpp"
#include "attnseg/tensor.hpp"

namespace attnseg::reference {

/// Row-major (G^2 x G^2) affinity matrix on a G x G canvas. Row index is the
/// query position I * G + J, column index the key position Y * G + X.
struct DenseAffinity {
  std::size_t canvas = 0;
  std::vector<double> values;

  double at(std::size_t query, std::size_t key) const {
    return values[query * canvas * canvas + key];
  }
};

/// Upsample each key slice of an (r, r, r, r) tensor to (G, G), renormalize
/// it to sum 1, then replicate query positions in k x k blocks (k = G / r).
/// With r == G the tensor is returned as-is.
DenseAffinity up_and_repeat(const Tensor& averaged_self, std::size_t canvas);

Plane refine_naive(const std::map<std::size_t, DenseAffinity>& affinities,
                   const Plane& fused, const LevelWeights& w_self,
                   NormPlacement norm = NormPlacement::kPerResolution);

}  // namespace attnseg::reference
