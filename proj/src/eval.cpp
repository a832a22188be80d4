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
#include "attnseg/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "attnseg/mask_io.hpp"

namespace attnseg {

namespace {

using Rational = boost::multiprecision::cpp_rational;

std::string fraction_string(const Rational& q) {
  std::ostringstream os;
  os << numerator(q) << '/' << denominator(q);
  return os.str();
}

std::string label_name(const std::vector<std::string>& legend, std::size_t l) {
  if (l < legend.size()) return legend[l];
  return l == 0 ? "background" : "class_" + std::to_string(l);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t num_labels)
    : n_(num_labels), counts_(num_labels * num_labels, 0) {
  if (num_labels == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "confusion matrix needs at least one label");
  }
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) {
    throw Error(ErrorCode::kShapeMismatch, "confusion matrices differ in size");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix accumulate(ConfusionMatrix conf, const LabelMask& pred,
                           const LabelMask& gt,
                           std::optional<std::int32_t> ignore_label) {
  if (pred.rows != gt.rows || pred.cols != gt.cols ||
      pred.labels.size() != gt.labels.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "prediction is " + std::to_string(pred.rows) + "x" +
                    std::to_string(pred.cols) + " but ground truth is " +
                    std::to_string(gt.rows) + "x" + std::to_string(gt.cols));
  }
  const auto n = static_cast<std::int32_t>(conf.num_labels());
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::int32_t g = gt.labels[i];
    if (ignore_label && g == *ignore_label) continue;
    const std::int32_t p = pred.labels[i];
    if (g < 0 || g >= n || p < 0 || p >= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label out of range at pixel " + std::to_string(i) +
                      " (gt " + std::to_string(g) + ", pred " +
                      std::to_string(p) + ", labels " + std::to_string(n) + ")");
    }
    ++conf.at(static_cast<std::size_t>(g), static_cast<std::size_t>(p));
  }
  return conf;
}

EvalReport miou(const ConfusionMatrix& conf, bool include_background,
                const std::vector<std::string>& legend) {
  EvalReport report;
  report.include_background = include_background;
  report.scored_pixels = conf.total();
  if (report.scored_pixels == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no scored pixels");
  }
  const std::size_t n = conf.num_labels();
  Rational sum = 0;
  for (std::size_t l = include_background ? 0 : 1; l < n; ++l) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += conf.at(l, k);
      col += conf.at(k, l);
    }
    ClassIou c;
    c.label = l;
    c.name = label_name(legend, l);
    c.true_positive = conf.at(l, l);
    c.false_negative = row - c.true_positive;
    c.false_positive = col - c.true_positive;
    const std::uint64_t uni = c.true_positive + c.false_positive + c.false_negative;
    if (uni == 0) continue;
    const Rational q(Rational(c.true_positive) / Rational(uni));
    c.iou = static_cast<double>(q);
    c.iou_exact = fraction_string(q);
    sum += q;
    report.per_class.push_back(std::move(c));
  }
  if (!report.per_class.empty()) {
    const Rational mean = sum / Rational(report.per_class.size());
    report.miou = static_cast<double>(mean);
    report.miou_exact = fraction_string(mean);
  }
  return report;
}

DatasetEvaluation evaluate_dataset(std::span<const MaskPair> pairs,
                                   std::optional<std::int32_t> ignore_label) {
  DatasetEvaluation eval;
  struct Loaded {
    std::size_t index;
    LabelMask pred, gt;
  };
  std::vector<Loaded> loaded;
  std::int32_t max_label = 0;
  auto fail = [&](std::size_t i, ErrorCode code, std::string msg) {
    eval.failures.push_back({i, pairs[i], code, std::move(msg)});
  };

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      LabelMask pred = read_mask(pairs[i].pred);
      LabelMask gt = read_mask(pairs[i].gt);
      if (pred.rows != gt.rows || pred.cols != gt.cols) {
        fail(i, ErrorCode::kShapeMismatch,
             "prediction " + std::to_string(pred.rows) + "x" +
                 std::to_string(pred.cols) + " vs ground truth " +
                 std::to_string(gt.rows) + "x" + std::to_string(gt.cols));
        continue;
      }
      bool legend_ok = true;
      for (const LabelMask* m : {&pred, &gt}) {
        if (m->legend.empty()) continue;
        if (eval.legend.empty()) {
          eval.legend = m->legend;
        } else if (m->legend != eval.legend) {
          legend_ok = false;
        }
      }
      if (!legend_ok) {
        fail(i, ErrorCode::kSchema, "legend differs from earlier pairs");
        continue;
      }
      for (const LabelMask* m : {&pred, &gt}) {
        for (std::int32_t v : m->labels) {
          if (ignore_label && v == *ignore_label) continue;
          max_label = std::max(max_label, v);
        }
      }
      loaded.push_back({i, std::move(pred), std::move(gt)});
    } catch (const Error& e) {
      fail(i, e.code(), e.what());
    }
  }

  const std::size_t labels = std::max<std::size_t>(
      eval.legend.size(), static_cast<std::size_t>(max_label) + 1);
  eval.confusion = ConfusionMatrix(labels);
  for (const auto& item : loaded) {
    try {
      eval.confusion = accumulate(std::move(eval.confusion), item.pred, item.gt,
                                  ignore_label);
      ++eval.pairs_scored;
    } catch (const Error& e) {
      fail(item.index, e.code(), e.what());
    }
  }
  std::sort(eval.failures.begin(), eval.failures.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  if (eval.confusion.total() > 0) {
    eval.with_background = miou(eval.confusion, true, eval.legend);
    eval.without_background = miou(eval.confusion, false, eval.legend);
  }
  return eval;
}

std::vector<MaskPair> read_pairs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, "cannot open pairs list " + path.string());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<MaskPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string pred, gt, extra;
    if (!(fields >> pred)) continue;
    if (!(fields >> gt) || (fields >> extra)) {
      throw Error(ErrorCode::kSchema, path.string() + ":" +
                                          std::to_string(lineno) +
                                          ": expected '<pred> <gt>'");
    }
    pairs.push_back({resolve(pred), resolve(gt)});
  }
  return pairs;
}

namespace {

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["include_background"] = r.include_background;
  j["miou"] = r.miou;
  j["miou_exact"] = r.miou_exact;
  j["scored_pixels"] = r.scored_pixels;
  auto& classes = j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_class) {
    nlohmann::ordered_json e;
    e["label"] = c.label;
    e["name"] = c.name;
    e["iou"] = c.iou;
    e["iou_exact"] = c.iou_exact;
    e["true_positive"] = c.true_positive;
    e["false_positive"] = c.false_positive;
    e["false_negative"] = c.false_negative;
    classes.push_back(std::move(e));
  }
  return j;
}

}  // namespace

std::string report_json(const DatasetEvaluation& eval) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["pairs_scored"] = eval.pairs_scored;
  j["pairs_failed"] = eval.failures.size();
  j["legend"] = eval.legend;
  j["with_background"] =
      eval.with_background ? report_to_json(*eval.with_background) : nullptr;
  j["without_background"] = eval.without_background
                                ? report_to_json(*eval.without_background)
                                : nullptr;
  auto& conf = j["confusion"] = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < eval.confusion.num_labels(); ++g) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < eval.confusion.num_labels(); ++p) {
      row.push_back(eval.confusion.at(g, p));
    }
    conf.push_back(std::move(row));
  }
  auto& failures = j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : eval.failures) {
    nlohmann::ordered_json e;
    e["index"] = f.index;
    e["pred"] = f.pair.pred.string();
    e["gt"] = f.pair.gt.string();
    e["error"] = std::string(to_string(f.code));
    e["message"] = f.message;
    failures.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string report_text(const DatasetEvaluation& eval) {
  std::ostringstream os;
  os << "pairs scored: " << eval.pairs_scored
     << ", failed: " << eval.failures.size() << '\n';
  for (const auto* r : {&eval.with_background, &eval.without_background}) {
    if (!*r) continue;
    const EvalReport& rep = **r;
    os << (rep.include_background ? "with background" : "without background")
       << ": mIoU " << std::fixed << std::setprecision(4) << rep.miou << " ("
       << rep.miou_exact << ")\n";
    for (const auto& c : rep.per_class) {
      os << "  " << std::setw(3) << c.label << ' ' << std::left << std::setw(20)
         << c.name << std::right << ' ' << std::setprecision(4) << c.iou << '\n';
    }
  }
  for (const auto& f : eval.failures) {
    os << "pair " << f.index << " failed (" << to_string(f.code)
       << "): " << f.message << '\n';
  }
  return os.str();
}

}  // namespace attnseg
