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
#include "attnseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "attnseg/error.hpp"

namespace attnseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kUnsupportedFormat: return "unsupported format";
    case ErrorCode::kSchema: return "schema violation";
    case ErrorCode::kValidation: return "validation failure";
  }
  return "unknown";
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_elements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), values_(shape_elements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_elements(shape_)) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor of shape " + shape_to_string(shape_) + " given " +
                    std::to_string(values_.size()) + " values");
  }
}

Plane::Plane(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Plane::Plane(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kShapeMismatch,
                "plane " + std::to_string(rows_) + "x" +
                    std::to_string(cols_) + " given " +
                    std::to_string(values_.size()) + " values");
  }
}

bool is_standard_resolution(std::size_t side) {
  return std::find(kResolutions.begin(), kResolutions.end(), side) !=
         kResolutions.end();
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.kind << ": " << v.message << '\n';
  return os.str();
}

namespace {

std::string where(const char* kind, std::size_t r, std::size_t layer) {
  return std::string(kind) + " r=" + std::to_string(r) + " layer " +
         std::to_string(layer);
}

// Reports the first offending index and the count, not one line per entry.
void check_entries(const Tensor& t, const std::string& label,
                   std::vector<Violation>& out) {
  std::size_t negative = 0, non_finite = 0;
  std::size_t first_negative = 0, first_non_finite = 0;
  const auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!std::isfinite(v)) {
      if (non_finite++ == 0) first_non_finite = i;
    } else if (v < 0.0f) {
      if (negative++ == 0) first_negative = i;
    }
  }
  if (non_finite) {
    out.push_back({"non_finite", label + ": " + std::to_string(non_finite) +
                                     " non-finite entries, first at flat index " +
                                     std::to_string(first_non_finite)});
  }
  if (negative) {
    out.push_back({"negative", label + ": " + std::to_string(negative) +
                                   " negative entries, first at flat index " +
                                   std::to_string(first_negative)});
  }
}

void check_cross(std::size_t r, const CrossLayerStack& stack,
                 std::vector<Violation>& out, std::set<std::size_t>& token_counts) {
  if (stack.resolution != r) {
    out.push_back({"shape", "cross stack keyed r=" + std::to_string(r) +
                                " declares resolution " +
                                std::to_string(stack.resolution)});
  }
  if (stack.layers.empty()) {
    out.push_back({"empty_stack", "cross stack at r=" + std::to_string(r) +
                                      " has no layers"});
    return;
  }
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const Tensor& t = stack.layers[l];
    const auto label = where("cross", r, l);
    if (t.rank() != 3 || t.dim(0) != r || t.dim(1) != r || t.dim(2) == 0) {
      out.push_back({"shape", label + ": expected (" + std::to_string(r) +
                                  ", " + std::to_string(r) + ", T), got " +
                                  shape_to_string(t.shape())});
      continue;
    }
    token_counts.insert(t.dim(2));
    check_entries(t, label, out);
  }
}

void check_self(std::size_t r, const SelfLayerStack& stack,
                std::vector<Violation>& out) {
  if (stack.resolution != r) {
    out.push_back({"shape", "self stack keyed r=" + std::to_string(r) +
                                " declares resolution " +
                                std::to_string(stack.resolution)});
  }
  if (stack.layers.empty()) {
    out.push_back({"empty_stack", "self stack at r=" + std::to_string(r) +
                                      " has no layers"});
    return;
  }
  const std::size_t queries = r * r;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const Tensor& t = stack.layers[l];
    const auto label = where("self", r, l);
    if (t.shape() != Shape{r, r, r, r}) {
      out.push_back({"shape", label + ": expected " +
                                  shape_to_string({r, r, r, r}) + ", got " +
                                  shape_to_string(t.shape())});
      continue;
    }
    check_entries(t, label, out);

    std::vector<double> sums(queries);
    const float* base = t.data();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(queries); ++q) {
      const float* row = base + q * queries;
      double s = 0.0;
      for (std::size_t k = 0; k < queries; ++k) s += row[k];
      sums[q] = s;
    }
    for (std::size_t q = 0; q < queries; ++q) {
      if (!(std::abs(sums[q] - 1.0) <= kRowSumTolerance)) {
        std::ostringstream os;
        os << label << ": query (" << q / r << ", " << q % r
           << ") row sums to " << sums[q];
        out.push_back({"row_sum", os.str()});
      }
    }
  }
}

void check_tokens(const ClassTokenMap& map,
                  const std::set<std::size_t>& token_counts,
                  std::vector<Violation>& out) {
  if (map.classes.empty()) {
    out.push_back({"token_map", "class list is empty"});
  }
  if (map.spans.size() != map.classes.size()) {
    out.push_back({"token_map", std::to_string(map.classes.size()) +
                                    " classes but " +
                                    std::to_string(map.spans.size()) + " spans"});
  }
  std::set<std::string> seen;
  for (const auto& name : map.classes) {
    if (name.empty()) out.push_back({"token_map", "empty class name"});
    if (!seen.insert(name).second) {
      out.push_back({"token_map", "duplicate class name '" + name + "'"});
    }
  }
  std::vector<std::pair<TokenSpan, std::size_t>> ordered;
  for (std::size_t c = 0; c < map.spans.size(); ++c) {
    const TokenSpan s = map.spans[c];
    const std::string name =
        c < map.classes.size() ? map.classes[c] : std::to_string(c);
    if (s.size() == 0) {
      out.push_back({"token_span", "class '" + name + "' has an empty span"});
      continue;
    }
    for (std::size_t t : token_counts) {
      if (s.end > t) {
        out.push_back({"token_span",
                       "class '" + name + "' span [" + std::to_string(s.begin) +
                           ", " + std::to_string(s.end) +
                           ") exceeds token count " + std::to_string(t)});
      }
    }
    ordered.emplace_back(s, c);
  }
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return a.first.begin < b.first.begin;
  });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i].first.begin < ordered[i - 1].first.end) {
      out.push_back({"token_span", "spans of classes " +
                                       std::to_string(ordered[i - 1].second) +
                                       " and " +
                                       std::to_string(ordered[i].second) +
                                       " overlap"});
    }
  }
}

}  // namespace

ValidationReport validate_dump(const AttentionDump& dump) {
  std::vector<Violation> out;
  const auto& m = dump.manifest;
  if (m.format_version != 1) {
    out.push_back({"manifest", "unsupported format_version " +
                                   std::to_string(m.format_version)});
  }
  if (m.image_height == 0 || m.image_width == 0) {
    out.push_back({"manifest", "image geometry must be positive"});
  }

  for (const auto& [r, _] : dump.cross) {
    if (!is_standard_resolution(r)) {
      out.push_back({"unexpected_resolution",
                     "cross stack at unsupported r=" + std::to_string(r)});
    }
  }
  for (const auto& [r, _] : dump.self) {
    if (!is_standard_resolution(r)) {
      out.push_back({"unexpected_resolution",
                     "self stack at unsupported r=" + std::to_string(r)});
    }
  }

  std::set<std::size_t> token_counts;
  for (std::size_t r : kResolutions) {
    const auto c = dump.cross.find(r);
    const auto s = dump.self.find(r);
    const bool has_cross = c != dump.cross.end();
    const bool has_self = s != dump.self.end();
    if (!has_cross && !has_self) {
      out.push_back({"missing_stack",
                     "missing self/cross stack at r=" + std::to_string(r)});
      continue;
    }
    if (!has_cross) {
      out.push_back(
          {"missing_stack", "missing cross stack at r=" + std::to_string(r)});
    } else {
      check_cross(r, c->second, out, token_counts);
    }
    if (!has_self) {
      out.push_back(
          {"missing_stack", "missing self stack at r=" + std::to_string(r)});
    } else {
      check_self(r, s->second, out);
    }
  }
  if (token_counts.size() > 1) {
    out.push_back({"shape", "cross stacks disagree on token count T"});
  }
  check_tokens(dump.token_map, token_counts, out);
  return ValidationReport{std::move(out)};
}

std::vector<std::string> FusionWeights::violations() const {
  std::vector<std::string> out;
  auto check = [&](const LevelWeights& w, const char* name) {
    double total = 0.0;
    for (const auto& [r, v] : w) {
      if (!std::isfinite(v) || v < 0.0) {
        out.push_back(std::string(name) + " weight at r=" + std::to_string(r) +
                      " must be a finite non-negative number");
      } else {
        total += v;
      }
    }
    if (!(total > 0.0)) {
      out.push_back(std::string(name) + " weights must have positive sum");
    }
  };
  check(cross, "cross");
  check(self, "self");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    out.push_back("alpha must lie in [0, 1]");
  }
  return out;
}

std::vector<std::string> make_legend(const std::vector<std::string>& classes) {
  std::vector<std::string> legend;
  legend.reserve(classes.size() + 1);
  legend.emplace_back("background");
  legend.insert(legend.end(), classes.begin(), classes.end());
  return legend;
}

}  // namespace attnseg
