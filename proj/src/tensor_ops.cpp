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
#include "attnseg/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "attnseg/error.hpp"

namespace attnseg {

namespace detail {

// Integer arithmetic keeps the tap for sample i and the tap for sample
// out - 1 - i exact mirror images of each other (w_lo <-> w_hi swapped).
std::vector<InterpTap> interp_taps(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) {
    throw Error(ErrorCode::kInvalidArgument, "interpolation over empty axis");
  }
  std::vector<InterpTap> taps(out);
  if (in == 1 || out == 1) return taps;
  const std::size_t span = out - 1;
  const double d = static_cast<double>(span);
  for (std::size_t i = 0; i < out; ++i) {
    const std::size_t num = i * (in - 1);
    const std::size_t lo = num / span;
    const std::size_t rem = num % span;
    if (rem == 0) {
      taps[i] = {lo, lo, 1.0, 0.0};
    } else {
      taps[i] = {lo, lo + 1, static_cast<double>(span - rem) / d,
                 static_cast<double>(rem) / d};
    }
  }
  return taps;
}

}  // namespace detail

using detail::InterpTap;
using detail::interp_taps;

Tensor average_layers(std::span<const Tensor> layers) {
  if (layers.empty()) throw Error(ErrorCode::kInvalidArgument, "empty stack");
  if (layers.size() == 1) return layers.front();
  const Shape& shape = layers.front().shape();
  for (const auto& t : layers) {
    if (t.shape() != shape) {
      throw Error(ErrorCode::kShapeMismatch,
                  "layer shapes differ: " + shape_to_string(shape) + " vs " +
                      shape_to_string(t.shape()));
    }
  }
  Tensor out(shape);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const double inv = 1.0 / static_cast<double>(layers.size());
  float* dst = out.data();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& t : layers) s += t[i];
    dst[i] = static_cast<float>(s * inv);
  }
  return out;
}

Tensor average_layers_cross(const CrossLayerStack& stack) {
  return average_layers(stack.layers);
}

Tensor average_layers_self(const SelfLayerStack& stack) {
  return average_layers(stack.layers);
}

Plane aggregate_class_tokens(const Tensor& cross, TokenSpan span) {
  if (cross.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "cross tensor must be (r, r, T), got " +
                    shape_to_string(cross.shape()));
  }
  const std::size_t rows = cross.dim(0), cols = cross.dim(1),
                    tokens = cross.dim(2);
  if (span.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty token span");
  }
  if (span.end > tokens) {
    throw Error(ErrorCode::kInvalidArgument,
                "token span [" + std::to_string(span.begin) + ", " +
                    std::to_string(span.end) + ") outside T=" +
                    std::to_string(tokens));
  }
  Plane out(rows, cols);
  const double inv = 1.0 / static_cast<double>(span.size());
  for (std::size_t p = 0; p < rows * cols; ++p) {
    const float* cell = cross.data() + p * tokens;
    if (span.size() == 1) {
      out.values()[p] = cell[span.begin];
      continue;
    }
    double s = 0.0;
    for (std::size_t t = span.begin; t < span.end; ++t) s += cell[t];
    out.values()[p] = s * inv;
  }
  return out;
}

Plane upsample_bilinear(const Plane& p, std::size_t out_rows,
                        std::size_t out_cols) {
  if (p.size() == 0 || out_rows == 0 || out_cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bilinear resample of empty plane");
  }
  if (p.rows() == out_rows && p.cols() == out_cols) return p;
  const auto ty = interp_taps(p.rows(), out_rows);
  const auto tx = interp_taps(p.cols(), out_cols);
  Plane out(out_rows, out_cols);
#pragma omp parallel for schedule(static) if (out_rows * out_cols > 16384)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out_rows); ++i) {
    const InterpTap& y = ty[i];
    for (std::size_t j = 0; j < out_cols; ++j) {
      const InterpTap& x = tx[j];
      const double top = x.w_lo * p(y.lo, x.lo) + x.w_hi * p(y.lo, x.hi);
      const double bottom = x.w_lo * p(y.hi, x.lo) + x.w_hi * p(y.hi, x.hi);
      out(i, j) = y.w_lo * top + y.w_hi * bottom;
    }
  }
  return out;
}

Plane adjoint_upsample(const Plane& p, std::size_t rows, std::size_t cols) {
  if (p.size() == 0 || rows == 0 || cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "adjoint of empty plane");
  }
  if (p.rows() == rows && p.cols() == cols) return p;
  const auto ty = interp_taps(rows, p.rows());
  const auto tx = interp_taps(cols, p.cols());

  // Transpose the column pass, then the row pass.
  Plane partial(p.rows(), cols);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const InterpTap& x = tx[j];
      partial(i, x.lo) += x.w_lo * p(i, j);
      partial(i, x.hi) += x.w_hi * p(i, j);
    }
  }
  Plane out(rows, cols);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const InterpTap& y = ty[i];
    for (std::size_t c = 0; c < cols; ++c) {
      out(y.lo, c) += y.w_lo * partial(i, c);
      out(y.hi, c) += y.w_hi * partial(i, c);
    }
  }
  return out;
}

Plane minmax_normalize(const Plane& p) {
  Plane out(p.rows(), p.cols());
  if (p.size() == 0) return out;
  const auto [lo, hi] = std::minmax_element(p.values().begin(), p.values().end());
  const double min = *lo, range = *hi - *lo;
  const double scale = std::max(std::abs(*lo), std::abs(*hi));
  if (!(range > kFlatTolerance * scale)) return out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.values()[i] = (p.values()[i] - min) / range;
  }
  return out;
}

Plane hflip(const Plane& p) {
  Plane out(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      out(r, p.cols() - 1 - c) = p(r, c);
    }
  }
  return out;
}

ScoreStack resize_scores(const ScoreStack& stack, std::size_t rows,
                         std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be non-empty");
  }
  ScoreStack out;
  out.classes = stack.classes;
  out.planes.reserve(stack.planes.size());
  for (const Plane& p : stack.planes) {
    Plane resized = upsample_bilinear(p, rows, cols);
    for (double& v : resized.values()) v = std::clamp(v, 0.0, 1.0);
    out.planes.push_back(std::move(resized));
  }
  return out;
}

double inner_product(const Plane& a, const Plane& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "inner product of unequal planes");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

}  // namespace attnseg
