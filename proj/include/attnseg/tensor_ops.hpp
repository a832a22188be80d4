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

#include <cstddef>
#include <span>
#include <vector>

#include "attnseg/model.hpp"
#include "attnseg/tensor.hpp"

namespace attnseg {

/// Elementwise mean over the layer axis, accumulated in double. A single
/// layer is returned unchanged. Throws on an empty stack or mixed shapes.
Tensor average_layers(std::span<const Tensor> layers);
Tensor average_layers_cross(const CrossLayerStack& stack);
Tensor average_layers_self(const SelfLayerStack& stack);

/// Mean of the token slices in `span` of an (r, r, T) cross tensor.
Plane aggregate_class_tokens(const Tensor& cross, TokenSpan span);

/// Corner-aligned bilinear resampling: output sample i sits at input
/// coordinate i * (in - 1) / (out - 1). Same-size input is copied exactly.
/// The weights are mirror-symmetric, so resampling commutes exactly with
/// hflip.
Plane upsample_bilinear(const Plane& p, std::size_t out_rows,
                        std::size_t out_cols);

/// Exact transpose of upsample_bilinear from (rows, cols) to the shape of `p`:
///   <upsample_bilinear(a, p.rows(), p.cols()), p> == <a, adjoint_upsample(p, ...)>
Plane adjoint_upsample(const Plane& p, std::size_t rows, std::size_t cols);

/// Planes whose spread is at most this fraction of their largest magnitude
/// count as constant. Float32 attention rows only sum to one up to rounding,
/// so a constant map comes back from propagation with ~1e-7 relative ripple
/// that normalization would otherwise stretch to the full [0, 1] range.
inline constexpr double kFlatTolerance = 1e-6;

/// (x - min) / (max - min); a constant plane maps to all zeros.
Plane minmax_normalize(const Plane& p);

/// Reverses column order.
Plane hflip(const Plane& p);

/// Bilinear resize of every plane to (rows, cols), clamped to [0, 1].
ScoreStack resize_scores(const ScoreStack& stack, std::size_t rows,
                         std::size_t cols);

double inner_product(const Plane& a, const Plane& b);

namespace detail {

/// One output sample of a 1D corner-aligned linear interpolation.
struct InterpTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
};

std::vector<InterpTap> interp_taps(std::size_t in, std::size_t out);

}  // namespace detail
}  // namespace attnseg
