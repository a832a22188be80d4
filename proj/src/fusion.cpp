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
#include "attnseg/fusion.hpp"

#include <cmath>
#include <exception>
#include <utility>

#include "attnseg/error.hpp"
#include "attnseg/tensor_ops.hpp"

namespace attnseg {

namespace {

void check_weight(std::size_t r, double w, const char* what) {
  if (!std::isfinite(w) || w < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " weight at r=" + std::to_string(r) +
                    " must be finite and non-negative");
  }
}

}  // namespace

Plane fuse_cross(const LevelPlanes& maps, const LevelWeights& weights,
                 std::size_t canvas) {
  Plane fused(canvas, canvas);
  bool any = false;
  for (const auto& [r, w] : weights) {
    check_weight(r, w, "cross");
    if (w == 0.0) continue;
    const auto it = maps.find(r);
    if (it == maps.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "missing cross-attention map at r=" + std::to_string(r));
    }
    const Plane& level = it->second;
    if (level.rows() != r || level.cols() != r || r > canvas) {
      throw Error(ErrorCode::kShapeMismatch,
                  "cross map keyed r=" + std::to_string(r) + " is " +
                      std::to_string(level.rows()) + "x" +
                      std::to_string(level.cols()));
    }
    const Plane up = upsample_bilinear(level, canvas, canvas);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      fused.values()[i] += w * up.values()[i];
    }
    any = true;
  }
  if (!any) {
    throw Error(ErrorCode::kInvalidArgument, "cross weights are all zero");
  }
  return fused;
}

AffinityOperator::AffinityOperator(Tensor averaged_self, std::size_t canvas)
    : self_(std::move(averaged_self)), side_(0), canvas_(canvas) {
  if (self_.rank() != 4 || self_.dim(0) == 0 ||
      self_.shape() != Shape(4, self_.dim(0))) {
    throw Error(ErrorCode::kShapeMismatch,
                "self-attention tensor must be (r, r, r, r), got " +
                    shape_to_string(self_.shape()));
  }
  side_ = self_.dim(0);
  if (side_ > canvas_ || canvas_ % side_ != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "grid side " + std::to_string(side_) +
                    " does not divide canvas " + std::to_string(canvas_));
  }
  if (side_ == canvas_) return;

  const std::size_t keys = side_ * side_;
  const Plane column_mass =
      adjoint_upsample(Plane(canvas_, canvas_, 1.0), side_, side_);
  row_mass_.resize(keys);
  const float* base = self_.data();
  const double* mass = column_mass.values().data();
#pragma omp parallel for schedule(static) if (keys >= 256)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(keys); ++q) {
    const float* row = base + q * keys;
    double s = 0.0;
    for (std::size_t k = 0; k < keys; ++k) s += row[k] * mass[k];
    row_mass_[q] = s;
  }
}

Plane AffinityOperator::propagate(const Plane& fused) const {
  if (fused.rows() != canvas_ || fused.cols() != canvas_) {
    throw Error(ErrorCode::kShapeMismatch,
                "fused map must be " + std::to_string(canvas_) + "x" +
                    std::to_string(canvas_));
  }
  const std::size_t keys = side_ * side_;
  const float* base = self_.data();

  if (side_ == canvas_) {
    Plane out(canvas_, canvas_);
    const double* c = fused.values().data();
    double* dst = out.values().data();
#pragma omp parallel for schedule(static) if (keys >= 256)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(keys); ++q) {
      const float* row = base + q * keys;
      double s = 0.0;
      for (std::size_t k = 0; k < keys; ++k) s += row[k] * c[k];
      dst[q] = s;
    }
    return out;
  }

  const Plane pulled = adjoint_upsample(fused, side_, side_);
  const double* a = pulled.values().data();
  std::vector<double> coarse(keys);
#pragma omp parallel for schedule(static) if (keys >= 256)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(keys); ++q) {
    const float* row = base + q * keys;
    double s = 0.0;
    for (std::size_t k = 0; k < keys; ++k) s += row[k] * a[k];
    coarse[q] = row_mass_[q] > 0.0 ? s / row_mass_[q] : 0.0;
  }

  const std::size_t k = canvas_ / side_;
  Plane out(canvas_, canvas_);
  for (std::size_t i = 0; i < canvas_; ++i) {
    for (std::size_t j = 0; j < canvas_; ++j) {
      out(i, j) = coarse[(i / k) * side_ + j / k];
    }
  }
  return out;
}

Plane refine_block(const AffinitySet& affinities, const Plane& fused,
                   const LevelWeights& w_self, NormPlacement norm) {
  Plane acc(fused.rows(), fused.cols());
  bool any = false;
  for (const auto& [r, w] : w_self) {
    check_weight(r, w, "self");
    if (w == 0.0) continue;
    const auto it = affinities.find(r);
    if (it == affinities.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "missing self-attention affinity at r=" + std::to_string(r));
    }
    Plane level = it->second.propagate(fused);
    if (norm == NormPlacement::kPerResolution) level = minmax_normalize(level);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc.values()[i] += w * level.values()[i];
    }
    any = true;
  }
  if (!any) {
    throw Error(ErrorCode::kInvalidArgument, "self weights are all zero");
  }
  if (norm == NormPlacement::kAfterSum) acc = minmax_normalize(acc);
  return acc;
}

ScoreStack refine_all_classes(const AttentionDump& dump,
                              const FusionWeights& weights) {
  if (const auto bad = weights.violations(); !bad.empty()) {
    std::string msg = "invalid fusion weights:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw Error(ErrorCode::kValidation, msg);
  }
  if (const auto report = validate_dump(dump); !report.ok()) {
    throw Error(ErrorCode::kValidation,
                "attention dump failed validation:\n" + report.to_string());
  }

  std::map<std::size_t, Tensor> cross;
  for (const auto& [r, w] : weights.cross) {
    if (w > 0.0) cross.emplace(r, average_layers_cross(dump.cross.at(r)));
  }
  AffinitySet affinities;
  double self_mass = 0.0;
  for (const auto& [r, w] : weights.self) {
    if (w > 0.0) {
      affinities.emplace(r, AffinityOperator(average_layers_self(dump.self.at(r))));
      self_mass += w;
    }
  }
  const double scale = (weights.norm == NormPlacement::kPerResolution &&
                        self_mass > 1.0)
                           ? 1.0 / self_mass
                           : 1.0;

  const auto& tokens = dump.token_map;
  ScoreStack out;
  out.classes = tokens.classes;
  out.planes.resize(tokens.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(tokens.size()); ++c) {
    try {
      LevelPlanes levels;
      for (const auto& [r, t] : cross) {
        levels.emplace(r, aggregate_class_tokens(t, tokens.spans[c]));
      }
      Plane refined = refine_block(affinities, fuse_cross(levels, weights.cross),
                                   weights.self, weights.norm);
      if (scale != 1.0) {
        for (double& v : refined.values()) v *= scale;
      }
      out.planes[c] = std::move(refined);
    } catch (...) {
#pragma omp critical(attnseg_refine_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace attnseg
