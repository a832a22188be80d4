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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attnseg/tensor.hpp"

namespace attnseg {

/// Attention grid sides exported by the diffusion UNet. Every side divides the
/// canvas, so the replication factor canvas / side is an integer.
inline constexpr std::array<std::size_t, 4> kResolutions{8, 16, 32, 64};
inline constexpr std::size_t kCanvas = 64;

bool is_standard_resolution(std::size_t side);

/// Per-layer cross-attention maps at one resolution, each (r, r, T).
struct CrossLayerStack {
  std::size_t resolution = 0;
  std::vector<Tensor> layers;
};

/// Per-layer self-attention tensors at one resolution, each (r, r, r, r).
/// Every query slice [i, j, :, :] is a softmax output and sums to one.
struct SelfLayerStack {
  std::size_t resolution = 0;
  std::vector<Tensor> layers;
};

/// Half-open token range [begin, end) into the class-prompt token sequence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct ClassTokenMap {
  std::vector<std::string> classes;
  std::vector<TokenSpan> spans;

  std::size_t size() const noexcept { return classes.size(); }
  friend bool operator==(const ClassTokenMap&, const ClassTokenMap&) = default;
};

struct DumpManifest {
  int format_version = 1;
  std::string model_id;
  std::string prompt;
  std::string class_prompt;
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  bool flipped = false;
  bool layers_preaveraged = false;

  friend bool operator==(const DumpManifest&, const DumpManifest&) = default;
};

/// Everything the refinement stage needs from one image: one cross and one
/// self stack per resolution, plus the class-to-token mapping.
struct AttentionDump {
  DumpManifest manifest;
  std::map<std::size_t, CrossLayerStack> cross;
  std::map<std::size_t, SelfLayerStack> self;
  ClassTokenMap token_map;
};

struct Violation {
  std::string kind;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string to_string() const;
  friend bool operator==(const ValidationReport&, const ValidationReport&) =
      default;
};

/// Absolute tolerance on each self-attention query row sum.
inline constexpr double kRowSumTolerance = 1e-3;

/// Collects every invariant violation in `dump`. A well-formed dump yields an
/// empty report; nothing is thrown.
ValidationReport validate_dump(const AttentionDump& dump);

/// Where min-max normalization sits relative to the weighted sum over
/// resolutions in the affinity refinement.
enum class NormPlacement {
  kPerResolution,  // normalize each resolution's product, then weight
  kAfterSum,       // weight raw products, normalize the sum once
};

using LevelWeights = std::map<std::size_t, double>;

struct FusionWeights {
  LevelWeights cross{{8, 0.15}, {16, 0.7}, {32, 0.15}, {64, 0.0}};
  LevelWeights self{{8, 0.1}, {16, 0.1}, {32, 0.5}, {64, 0.3}};
  double alpha = 0.55;
  NormPlacement norm = NormPlacement::kPerResolution;

  /// Empty when every weight is non-negative, each vector has positive mass
  /// and alpha lies in [0, 1].
  std::vector<std::string> violations() const;
};

/// One refined score plane per candidate class, in class order.
struct ScoreStack {
  std::vector<std::string> classes;
  std::vector<Plane> planes;

  std::size_t size() const noexcept { return planes.size(); }
};

/// Integer label image. 0 is background; 1..M index the legend.
struct LabelMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> labels;
  std::vector<std::string> legend;  // legend[0] == "background"

  std::int32_t operator()(std::size_t r, std::size_t c) const {
    return labels[r * cols + c];
  }
  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

std::vector<std::string> make_legend(const std::vector<std::string>& classes);

}  // namespace attnseg
