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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnseg/error.hpp"
#include "attnseg/model.hpp"

namespace attnseg {

inline constexpr std::int32_t kDefaultIgnoreLabel = 255;

/// Square pixel-count matrix; rows index ground truth, columns prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_labels = 1);

  std::size_t num_labels() const noexcept { return n_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return counts_[gt * n_ + pred];
  }
  std::uint64_t& at(std::size_t gt, std::size_t pred) {
    return counts_[gt * n_ + pred];
  }
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) =
      default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// Adds one count per pixel of the pair; pixels whose ground truth equals
/// `ignore_label` are skipped.
ConfusionMatrix accumulate(ConfusionMatrix conf, const LabelMask& pred,
                           const LabelMask& gt,
                           std::optional<std::int32_t> ignore_label =
                               kDefaultIgnoreLabel);

struct ClassIou {
  std::size_t label = 0;
  std::string name;
  std::uint64_t true_positive = 0;
  std::uint64_t false_positive = 0;
  std::uint64_t false_negative = 0;
  double iou = 0.0;
  std::string iou_exact;  // reduced fraction, e.g. "2/3"
};

struct EvalReport {
  bool include_background = true;
  std::vector<ClassIou> per_class;  // only classes with non-zero union
  double miou = 0.0;
  std::string miou_exact;
  std::uint64_t scored_pixels = 0;
};

/// IoU = TP / (TP + FP + FN) per label; labels with zero union are left out
/// of the mean. Throws when the matrix holds no pixels.
EvalReport miou(const ConfusionMatrix& conf, bool include_background,
                const std::vector<std::string>& legend = {});

struct MaskPair {
  std::filesystem::path pred;
  std::filesystem::path gt;
};

struct PairFailure {
  std::size_t index = 0;
  MaskPair pair;
  ErrorCode code = ErrorCode::kIo;
  std::string message;
};

struct DatasetEvaluation {
  ConfusionMatrix confusion;
  std::vector<std::string> legend;
  std::optional<EvalReport> with_background;
  std::optional<EvalReport> without_background;
  std::size_t pairs_scored = 0;
  std::vector<PairFailure> failures;
};

/// One confusion matrix over every readable pair. Unreadable or mismatched
/// pairs are recorded in `failures` and skipped.
DatasetEvaluation evaluate_dataset(std::span<const MaskPair> pairs,
                                   std::optional<std::int32_t> ignore_label =
                                       kDefaultIgnoreLabel);

/// Whitespace-separated "pred gt" per line; blank lines and '#' comments are
/// skipped. Relative paths resolve against the list file's directory.
std::vector<MaskPair> read_pairs_file(const std::filesystem::path& path);

std::string report_json(const DatasetEvaluation& eval);
std::string report_text(const DatasetEvaluation& eval);

}  // namespace attnseg
