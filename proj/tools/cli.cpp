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
#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnseg/bench.hpp"
#include "attnseg/dump_io.hpp"
#include "attnseg/eval.hpp"
#include "attnseg/fusion.hpp"
#include "attnseg/mask_io.hpp"
#include "attnseg/npy.hpp"
#include "attnseg/synth.hpp"
#include "attnseg/tensor_ops.hpp"
#include "attnseg/ttf_mask.hpp"

namespace attnseg::cli {

namespace fs = std::filesystem;

namespace {

struct RefineArgs {
  std::vector<std::string> dumps;
  std::string weights;
  std::optional<double> alpha;
  std::string out_mask;
  std::string out_scores;
  std::string report;
  int threads = 0;
};

struct EvalArgs {
  std::string pairs;
  std::int32_t ignore_label = kDefaultIgnoreLabel;
  bool no_ignore = false;
  std::string out;
};

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t classes = 3;
  double noise = 0.0;
  std::size_t layers = 1;
  double bandwidth = 0.5;
  bool flipped = false;
  std::string gt;
  std::string dtype = "f32";
};

struct BenchArgs {
  std::size_t canvas = 64;
  std::vector<std::size_t> sides{8};
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
}

int do_refine(const RefineArgs& a, std::ostream& out, std::ostream& err) {
  if (a.threads > 0) omp_set_num_threads(a.threads);
  FusionWeights weights = a.weights.empty() ? FusionWeights{} : read_weights(a.weights);
  if (a.alpha) weights.alpha = *a.alpha;
  if (const auto bad = weights.violations(); !bad.empty()) {
    for (const auto& b : bad) err << "weights: " << b << '\n';
    return kExitData;
  }

  std::vector<AttentionDump> dumps;
  for (const auto& d : a.dumps) {
    dumps.push_back(read_dump(d, /*validate=*/false));
    if (const auto report = validate_dump(dumps.back()); !report.ok()) {
      err << d << " failed validation:\n" << report.to_string();
      return kExitData;
    }
  }

  ScoreStack scores;
  if (dumps.size() == 2) {
    const bool f0 = dumps[0].manifest.flipped, f1 = dumps[1].manifest.flipped;
    if (f0 == f1) {
      err << "a test-time flip pair needs exactly one dump flagged flipped\n";
      return kExitData;
    }
    const AttentionDump& origin = f0 ? dumps[1] : dumps[0];
    const AttentionDump& flipped = f0 ? dumps[0] : dumps[1];
    if (origin.token_map.classes != flipped.token_map.classes ||
        origin.manifest.image_height != flipped.manifest.image_height ||
        origin.manifest.image_width != flipped.manifest.image_width) {
      err << "flip pair dumps disagree on classes or image geometry\n";
      return kExitData;
    }
    scores = ttf_merge(refine_all_classes(origin, weights),
                       refine_all_classes(flipped, weights));
  } else {
    scores = refine_all_classes(dumps[0], weights);
    if (dumps[0].manifest.flipped) {
      // Align a lone mirrored dump with the unflipped image.
      for (auto& p : scores.planes) p = hflip(p);
    }
  }

  const auto& man = dumps[0].manifest;
  const LabelMask mask =
      labelize(scores, weights.alpha, man.image_height, man.image_width);
  write_mask(mask, a.out_mask);

  if (!a.out_scores.empty()) {
    std::error_code ec;
    fs::create_directories(a.out_scores, ec);
    nlohmann::ordered_json index;
    index["classes"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < scores.size(); ++c) {
      const Plane& p = scores.planes[c];
      Tensor t({p.rows(), p.cols()});
      for (std::size_t i = 0; i < p.size(); ++i) {
        t[i] = static_cast<float>(p.values()[i]);
      }
      const std::string file = "score_c" + std::to_string(c + 1) + ".npy";
      write_npy(fs::path(a.out_scores) / file, t);
      nlohmann::ordered_json e;
      e["label"] = c + 1;
      e["name"] = scores.classes[c];
      e["file"] = file;
      index["classes"].push_back(std::move(e));
    }
    write_file(fs::path(a.out_scores) / "scores.json", index.dump(2) + "\n");
  }

  std::vector<std::size_t> counts(mask.legend.size(), 0);
  for (auto v : mask.labels) ++counts[static_cast<std::size_t>(v)];
  if (!a.report.empty()) {
    nlohmann::ordered_json rep;
    rep["format_version"] = 1;
    auto& ds = rep["dumps"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < dumps.size(); ++i) {
      nlohmann::ordered_json e;
      e["path"] = a.dumps[i];
      e["manifest_sha256"] = file_sha256(fs::path(a.dumps[i]) / kManifestName);
      e["flipped"] = dumps[i].manifest.flipped;
      ds.push_back(std::move(e));
    }
    rep["weights"] = nlohmann::ordered_json::parse(weights_json(weights));
    rep["mask"] = a.out_mask;
    rep["height"] = mask.rows;
    rep["width"] = mask.cols;
    auto& px = rep["pixels"] = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < counts.size(); ++l) {
      nlohmann::ordered_json e;
      e["label"] = l;
      e["name"] = mask.legend[l];
      e["pixels"] = counts[l];
      px.push_back(std::move(e));
    }
    write_file(a.report, rep.dump(2) + "\n");
  }

  out << "wrote " << a.out_mask << " (" << mask.cols << "x" << mask.rows
      << ", " << scores.size() << " classes)\n";
  for (std::size_t l = 0; l < counts.size(); ++l) {
    out << "  " << l << ' ' << mask.legend[l] << ": " << counts[l] << " px\n";
  }
  return kExitOk;
}

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto pairs = read_pairs_file(a.pairs);
  std::optional<std::int32_t> ignore;
  if (!a.no_ignore) ignore = a.ignore_label;
  const DatasetEvaluation eval = evaluate_dataset(pairs, ignore);
  out << report_text(eval);
  if (!a.out.empty()) write_file(a.out, report_json(eval));
  if (eval.failures.empty()) return kExitOk;
  int code = kExitData;
  for (const auto& f : eval.failures) code = std::max(code, exit_code_for(f.code));
  err << eval.failures.size() << " of " << pairs.size() << " pairs failed\n";
  return code;
}

int do_synth(const SynthArgs& a, std::ostream& out) {
  FixtureSpec spec = planted_scene(a.classes, a.noise, a.seed);
  spec.layers = a.layers;
  spec.bandwidth = a.bandwidth;
  spec.flipped = a.flipped;
  const Fixture fx = make_fixture(spec);
  write_dump(fx.dump, a.out, a.dtype == "f16" ? NpyDtype::kFloat16 : NpyDtype::kFloat32);
  if (!a.gt.empty()) {
    // Masks on disk are always in original image coordinates.
    LabelMask gt = fx.ground_truth;
    if (a.flipped) {
      for (std::size_t y = 0; y < gt.rows; ++y) {
        auto row = gt.labels.begin() + static_cast<std::ptrdiff_t>(y * gt.cols);
        std::reverse(row, row + static_cast<std::ptrdiff_t>(gt.cols));
      }
    }
    write_mask(gt, a.gt);
  }
  out << "wrote fixture (" << spec.classes.size() << " classes, seed " << a.seed
      << (a.flipped ? ", flipped" : "") << ") to " << a.out << '\n';
  return kExitOk;
}

int do_bench(const BenchArgs& a, std::ostream& out) {
  BenchConfig config;
  config.canvas = a.canvas;
  config.sides = a.sides;
  config.repeats = a.repeats;
  config.seed = a.seed;
  out << bench_table(run_bench(config));
  return kExitOk;
}

int do_validate(const std::string& dir, std::ostream& out) {
  const AttentionDump dump = read_dump(dir, /*validate=*/false);
  const ValidationReport report = validate_dump(dump);
  if (report.ok()) {
    out << dir << ": ok\n";
    return kExitOk;
  }
  out << report.to_string();
  return kExitData;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kUnsupportedFormat:
    case ErrorCode::kSchema:
    case ErrorCode::kValidation:
      return kExitData;
    case ErrorCode::kMissingFile:
    case ErrorCode::kIo:
      return kExitIo;
  }
  return kExitData;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Training-free open-vocabulary segmentation from diffusion attention",
               "attnseg"};
  app.require_subcommand(1);

  RefineArgs refine;
  auto* r = app.add_subcommand("refine", "Turn attention dumps into a label mask");
  r->add_option("--dump", refine.dumps, "Dump directory; give two for a flip pair")
      ->required()
      ->expected(1, 2);
  r->add_option("--weights", refine.weights, "Fusion weights JSON");
  r->add_option("--alpha", refine.alpha, "Background threshold (default 0.55)")
      ->check(CLI::Range(0.0, 1.0));
  r->add_option("--out-mask", refine.out_mask, "Output PGM mask")->required();
  r->add_option("--out-scores", refine.out_scores, "Directory for score planes");
  r->add_option("--report", refine.report, "Run report JSON");
  r->add_option("--threads", refine.threads, "Worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs evala;
  auto* e = app.add_subcommand("eval", "Score predicted masks against ground truth");
  e->add_option("--pairs", evala.pairs, "File of '<pred> <gt>' lines")->required();
  e->add_option("--ignore-label", evala.ignore_label, "Ground-truth label to skip");
  e->add_flag("--no-ignore", evala.no_ignore, "Score every ground-truth pixel");
  e->add_option("--out", evala.out, "Report JSON");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic fixture dump");
  s->add_option("--seed", synth.seed, "Noise seed");
  s->add_option("--out", synth.out, "Dump directory")->required();
  s->add_option("--classes", synth.classes, "Planted classes (1-4)")
      ->check(CLI::Range(1, 4));
  s->add_option("--noise", synth.noise, "Uniform noise amplitude")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--layers", synth.layers, "Layers per resolution")
      ->check(CLI::PositiveNumber);
  s->add_option("--bandwidth", synth.bandwidth,
                "Self-attention sigma in grid cells")
      ->check(CLI::PositiveNumber);
  s->add_flag("--flipped", synth.flipped, "Emit the mirrored variant");
  s->add_option("--gt", synth.gt, "Ground-truth mask output (PGM)");
  s->add_option("--dtype", synth.dtype, "Tensor dtype")
      ->check(CLI::IsMember({"f32", "f16"}));

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time the naive and block refinement paths");
  b->add_option("--canvas", bench.canvas, "Canvas side")->check(CLI::PositiveNumber);
  b->add_option("--res", bench.sides, "Grid side(s)")->check(CLI::PositiveNumber);
  b->add_option("--repeats", bench.repeats, "Repetitions per path")
      ->check(CLI::PositiveNumber);
  b->add_option("--seed", bench.seed, "Instance seed");

  std::string validate_dir;
  auto* v = app.add_subcommand("validate", "Report invariant violations in a dump");
  v->add_option("--dump", validate_dir, "Dump directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (r->parsed()) return do_refine(refine, out, err);
    if (e->parsed()) return do_eval(evala, out, err);
    if (s->parsed()) return do_synth(synth, out);
    if (b->parsed()) return do_bench(bench, out);
    if (v->parsed()) return do_validate(validate_dir, out);
  } catch (const Error& ex) {
    err << "error (" << to_string(ex.code()) << "): " << ex.what() << '\n';
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace attnseg::cli
