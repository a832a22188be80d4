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
#include "attnseg/reference.hpp"

#include <cmath>

#include "attnseg/error.hpp"
#include "attnseg/tensor_ops.hpp"

namespace attnseg::reference {

DenseAffinity up_and_repeat(const Tensor& averaged_self, std::size_t canvas) {
  const Shape& shape = averaged_self.shape();
  if (shape.size() != 4 || shape[0] == 0 || shape != Shape(4, shape[0])) {
    throw Error(ErrorCode::kShapeMismatch,
                "self-attention tensor must be (r, r, r, r), got " +
                    shape_to_string(shape));
  }
  const std::size_t r = shape[0];
  if (r > canvas || canvas % r != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "grid side " + std::to_string(r) + " does not divide canvas " +
                    std::to_string(canvas));
  }
  const std::size_t cells = canvas * canvas;
  DenseAffinity out{canvas, std::vector<double>(cells * cells)};

  if (r == canvas) {
    for (std::size_t i = 0; i < averaged_self.size(); ++i) {
      out.values[i] = averaged_self[i];
    }
    return out;
  }

  // Step 1: upsample and renormalize the key slice of every coarse query.
  const std::size_t keys = r * r;
  std::vector<Plane> slices;
  slices.reserve(keys);
  for (std::size_t q = 0; q < keys; ++q) {
    Plane slice(r, r);
    for (std::size_t k = 0; k < keys; ++k) {
      slice.values()[k] = averaged_self[q * keys + k];
    }
    Plane up = upsample_bilinear(slice, canvas, canvas);
    double mass = 0.0;
    for (double v : up.values()) mass += v;
    if (mass > 0.0) {
      for (double& v : up.values()) v /= mass;
    }
    slices.push_back(std::move(up));
  }

  // Step 2: nearest-neighbour replication of the query grid.
  const std::size_t k = canvas / r;
  for (std::size_t i = 0; i < canvas; ++i) {
    for (std::size_t j = 0; j < canvas; ++j) {
      const Plane& src = slices[(i / k) * r + j / k];
      double* row = out.values.data() + (i * canvas + j) * cells;
      for (std::size_t key = 0; key < cells; ++key) row[key] = src.values()[key];
    }
  }
  return out;
}

Plane refine_naive(const std::map<std::size_t, DenseAffinity>& affinities,
                   const Plane& fused, const LevelWeights& w_self,
                   NormPlacement norm) {
  const std::size_t canvas = fused.rows();
  if (fused.cols() != canvas) {
    throw Error(ErrorCode::kShapeMismatch, "fused map must be square");
  }
  const std::size_t cells = canvas * canvas;
  Plane acc(canvas, canvas);
  bool any = false;
  for (const auto& [r, w] : w_self) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "self weights must be non-negative");
    }
    if (w == 0.0) continue;
    const auto it = affinities.find(r);
    if (it == affinities.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "missing materialized affinity at r=" + std::to_string(r));
    }
    const DenseAffinity& m = it->second;
    if (m.canvas != canvas || m.values.size() != cells * cells) {
      throw Error(ErrorCode::kShapeMismatch,
                  "affinity at r=" + std::to_string(r) + " is for canvas " +
                      std::to_string(m.canvas) + ", fused map is " +
                      std::to_string(canvas));
    }
    Plane product(canvas, canvas);
    for (std::size_t q = 0; q < cells; ++q) {
      double s = 0.0;
      for (std::size_t key = 0; key < cells; ++key) {
        s += m.at(q, key) * fused.values()[key];
      }
      product.values()[q] = s;
    }
    if (norm == NormPlacement::kPerResolution) product = minmax_normalize(product);
    for (std::size_t i = 0; i < cells; ++i) {
      acc.values()[i] += w * product.values()[i];
    }
    any = true;
  }
  if (!any) {
    throw Error(ErrorCode::kInvalidArgument, "self weights are all zero");
  }
  if (norm == NormPlacement::kAfterSum) acc = minmax_normalize(acc);
  return acc;
}

}  // namespace attnseg::reference
