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
#include "attnseg/ttf_mask.hpp"

#include "attnseg/error.hpp"
#include "attnseg/tensor_ops.hpp"

namespace attnseg {

ScoreStack ttf_merge(const ScoreStack& origin, const ScoreStack& flipped) {
  if (origin.classes != flipped.classes ||
      origin.planes.size() != flipped.planes.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "test-time flip pair has different class lists");
  }
  ScoreStack out;
  out.classes = origin.classes;
  out.planes.reserve(origin.planes.size());
  for (std::size_t c = 0; c < origin.planes.size(); ++c) {
    const Plane& a = origin.planes[c];
    const Plane b = hflip(flipped.planes[c]);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "test-time flip pair planes differ in shape for class '" +
                      origin.classes[c] + "'");
    }
    Plane merged(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
      merged.values()[i] = 0.5 * (a.values()[i] + b.values()[i]);
    }
    out.planes.push_back(std::move(merged));
  }
  return out;
}

LabelMask labelize(const ScoreStack& scores, double alpha, std::size_t rows,
                   std::size_t cols) {
  if (scores.planes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot labelize an empty class list");
  }
  if (scores.planes.size() > 255) {
    throw Error(ErrorCode::kInvalidArgument, "at most 255 classes are supported");
  }
  const ScoreStack resized = resize_scores(scores, rows, cols);
  LabelMask mask;
  mask.rows = rows;
  mask.cols = cols;
  mask.labels.assign(rows * cols, 0);
  mask.legend = make_legend(scores.classes);
  for (std::size_t p = 0; p < rows * cols; ++p) {
    std::size_t best = 0;
    double best_score = resized.planes[0].values()[p];
    for (std::size_t c = 1; c < resized.planes.size(); ++c) {
      const double v = resized.planes[c].values()[p];
      if (v > best_score) {
        best = c;
        best_score = v;
      }
    }
    mask.labels[p] = best_score < alpha ? 0 : static_cast<std::int32_t>(best + 1);
  }
  return mask;
}

}  // namespace attnseg
