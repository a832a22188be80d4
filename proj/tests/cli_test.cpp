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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "attnseg/dump_io.hpp"
#include "attnseg/mask_io.hpp"
#include "cli.hpp"
#include "oracle.hpp"

namespace attnseg {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "attnseg_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run({"synth", "--out", s("origin"), "--seed", "5", "--noise", "0.05",
                   "--gt", s("gt.pgm")}).code, 0);
    ASSERT_EQ(run({"synth", "--out", s("flipped"), "--seed", "5", "--noise", "0.05",
                   "--flipped", "--gt", s("gt_from_flipped.pgm")}).code, 0);
  }
  static std::string s(const std::string& name) { return (root_ / name).string(); }
  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"refine", "--dump", s("origin")}).code, cli::kExitUsage);  // no --out-mask
  EXPECT_EQ(run({"synth", "--out", s("x"), "--classes", "9"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"refine", "--dump", s("origin"), "--out-mask", s("m.pgm"), "--alpha", "2"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, Validate) {
  const Outcome ok = run({"validate", "--dump", s("origin")});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find(": ok"), std::string::npos);

  const fs::path bad = root_ / "bad";
  fs::remove_all(bad);
  fs::copy(root_ / "origin", bad);
  AttentionDump d = read_dump(bad);
  d.self[16].layers[0][5] += 0.5f;
  write_dump(d, bad);
  const Outcome r = run({"validate", "--dump", bad.string()});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.out.find("r=16"), std::string::npos) << r.out;

  EXPECT_EQ(run({"refine", "--dump", bad.string(), "--out-mask", s("bad.pgm")}).code,
            cli::kExitData);
}

TEST_F(Cli, IoFailuresExitThree) {
  EXPECT_EQ(run({"validate", "--dump", s("nowhere")}).code, cli::kExitIo);
  EXPECT_EQ(run({"refine", "--dump", s("nowhere"), "--out-mask", s("m.pgm")}).code, cli::kExitIo);
  EXPECT_EQ(run({"refine", "--dump", s("origin"), "--weights", s("absent.json"), "--out-mask",
                 s("m.pgm")}).code,
            cli::kExitIo);
}

TEST_F(Cli, RefineSingleDumpWithReport) {
  const Outcome r = run({"refine", "--dump", s("origin"), "--out-mask", s("single.pgm"),
                     "--report", s("single.json"), "--out-scores", s("scores")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cat"), std::string::npos);

  const LabelMask mask = read_mask(s("single.pgm"));
  const LabelMask gt = read_mask(s("gt.pgm"));
  EXPECT_EQ(mask.legend, gt.legend);
  for (std::int32_t c = 1; c <= 3; ++c) EXPECT_GE(oracle::iou(mask, gt, c), 0.8) << c;

  const auto report = nlohmann::json::parse(slurp(s("single.json")));
  EXPECT_EQ(report["dumps"][0]["manifest_sha256"],
            file_sha256(root_ / "origin" / "manifest.json"));
  EXPECT_EQ(report["height"], 64);
  std::int64_t total = 0;
  for (const auto& p : report["pixels"]) total += p["pixels"].get<std::int64_t>();
  EXPECT_EQ(total, 64 * 64);

  EXPECT_TRUE(fs::exists(root_ / "scores" / "score_c1.npy"));
  EXPECT_TRUE(fs::exists(root_ / "scores" / "scores.json"));
}

TEST_F(Cli, FlipPairIsOrderIndependent) {
  ASSERT_EQ(run({"refine", "--dump", s("origin"), "--dump", s("flipped"), "--out-mask",
                 s("ttf_a.pgm")}).code,
            0);
  ASSERT_EQ(run({"refine", "--dump", s("flipped"), "--dump", s("origin"), "--out-mask",
                 s("ttf_b.pgm")}).code,
            0);
  EXPECT_EQ(slurp(s("ttf_a.pgm")), slurp(s("ttf_b.pgm")));

  // With noise-free mirrored inputs the pair agrees with the single dump.
  ASSERT_EQ(run({"synth", "--out", s("clean"), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"synth", "--out", s("clean_f"), "--seed", "1", "--flipped"}).code, 0);
  ASSERT_EQ(run({"refine", "--dump", s("clean"), "--out-mask", s("clean.pgm")}).code, 0);
  ASSERT_EQ(run({"refine", "--dump", s("clean"), "--dump", s("clean_f"), "--out-mask",
                 s("clean_ttf.pgm")}).code,
            0);
  ASSERT_EQ(run({"refine", "--dump", s("clean_f"), "--out-mask", s("clean_f.pgm")}).code, 0);
  EXPECT_EQ(read_mask(s("clean.pgm")), read_mask(s("clean_ttf.pgm")));
  EXPECT_EQ(read_mask(s("clean.pgm")), read_mask(s("clean_f.pgm")));
  EXPECT_EQ(read_mask(s("gt.pgm")), read_mask(s("gt_from_flipped.pgm")));
}

TEST_F(Cli, FlipPairNeedsExactlyOneFlipped) {
  const Outcome r = run({"refine", "--dump", s("origin"), "--dump", s("origin"), "--out-mask",
                     s("x.pgm")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("exactly one"), std::string::npos);
  EXPECT_EQ(run({"refine", "--dump", s("origin"), "--dump", s("flipped"), "--dump", s("origin"),
                 "--out-mask", s("x.pgm")}).code,
            cli::kExitUsage);
}

TEST_F(Cli, AlphaOneKeepsAtMostPeakPixels) {
  ASSERT_EQ(run({"refine", "--dump", s("origin"), "--alpha", "1.0", "--out-mask",
                 s("alpha1.pgm")}).code,
            0);
  const LabelMask m = read_mask(s("alpha1.pgm"));
  EXPECT_LE(m.labels.size() - oracle::count_label(m, 0), 3u);
}

TEST_F(Cli, WeightsFile) {
  {
    std::ofstream(root_ / "w.json") << R"({"cross": {"8": 0, "16": 1, "32": 0, "64": 0}})";
    std::ofstream(root_ / "neg.json") << R"({"self": {"8": -1}})";
  }
  EXPECT_EQ(run({"refine", "--dump", s("origin"), "--weights", s("w.json"), "--out-mask",
                 s("w.pgm")}).code,
            0);
  const Outcome neg = run({"refine", "--dump", s("origin"), "--weights", s("neg.json"), "--out-mask",
                       s("w.pgm")});
  EXPECT_EQ(neg.code, cli::kExitData);
  EXPECT_NE(neg.err.find("weights"), std::string::npos);
}

TEST_F(Cli, SynthIsByteIdentical) {
  ASSERT_EQ(run({"synth", "--out", s("twin_a"), "--seed", "9", "--noise", "0.1", "--classes",
                 "2", "--dtype", "f16"}).code,
            0);
  ASSERT_EQ(run({"synth", "--out", s("twin_b"), "--seed", "9", "--noise", "0.1", "--classes",
                 "2", "--dtype", "f16"}).code,
            0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root_ / "twin_a")) {
    EXPECT_EQ(slurp(e.path()), slurp(root_ / "twin_b" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 9u);  // manifest plus one cross and one self file per resolution
}

TEST_F(Cli, EvalSelfPairs) {
  {
    std::ofstream pairs(root_ / "pairs.txt");
    pairs << "# pred gt\n" << s("gt.pgm") << ' ' << s("gt.pgm") << '\n';
  }
  const Outcome r = run({"eval", "--pairs", s("pairs.txt"), "--out", s("eval.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(s("eval.json")));
  EXPECT_EQ(j["with_background"]["miou"], 1.0);
  EXPECT_EQ(j["with_background"]["miou_exact"], "1/1");

  {
    std::ofstream pairs(root_ / "broken.txt");
    pairs << s("gt.pgm") << ' ' << s("missing.pgm") << '\n';
  }
  EXPECT_NE(run({"eval", "--pairs", s("broken.txt")}).code, 0);
  EXPECT_EQ(run({"eval", "--pairs", s("no_such_list.txt")}).code, cli::kExitIo);
}

TEST_F(Cli, Bench) {
  const Outcome r = run({"bench", "--canvas", "16", "--res", "4", "--res", "8", "--repeats", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("block/naive"), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  EXPECT_EQ(run({"bench", "--canvas", "16", "--res", "5"}).code, cli::kExitData);
}

}  // namespace
}  // namespace attnseg
