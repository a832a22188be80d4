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
#include "attnseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "attnseg/error.hpp"

namespace attnseg {

namespace {

[[noreturn]] void bad_spec(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, "fixture spec: " + what);
}

std::vector<std::string> words(const std::string& name) {
  std::istringstream is(name);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

bool inside_canvas(const Region& region, std::size_t canvas) {
  if (const auto* r = std::get_if<Rect>(&region)) {
    return r->x0 < r->x1 && r->y0 < r->y1 && r->x1 <= canvas && r->y1 <= canvas;
  }
  const auto& d = std::get<Disk>(region);
  const double c = static_cast<double>(canvas);
  return d.radius > 0.0 && d.cx - d.radius >= 0.0 && d.cy - d.radius >= 0.0 &&
         d.cx + d.radius <= c && d.cy + d.radius <= c;
}

Tensor mirror_cross(const Tensor& t) {
  const std::size_t r = t.dim(0), tokens = t.dim(2);
  Tensor out(t.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      for (std::size_t k = 0; k < tokens; ++k) {
        out[(i * r + (r - 1 - j)) * tokens + k] = t[(i * r + j) * tokens + k];
      }
    }
  }
  return out;
}

Tensor mirror_self(const Tensor& t) {
  const std::size_t r = t.dim(0), n = r * r;
  Tensor out(t.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      for (std::size_t y = 0; y < r; ++y) {
        for (std::size_t x = 0; x < r; ++x) {
          out[(i * r + (r - 1 - j)) * n + y * r + (r - 1 - x)] =
              t[(i * r + j) * n + y * r + x];
        }
      }
    }
  }
  return out;
}

Tensor gaussian_self(std::size_t r, double sigma) {
  std::vector<double> g(r);
  for (std::size_t d = 0; d < r; ++d) {
    const double dd = static_cast<double>(d);
    g[d] = std::exp(-dd * dd / (2.0 * sigma * sigma));
  }
  auto dist = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
  std::vector<double> norm(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t y = 0; y < r; ++y) s += g[dist(i, y)];
    norm[i] = s;
  }
  const std::size_t n = r * r;
  Tensor out({r, r, r, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      const double z = norm[i] * norm[j];
      float* row = out.data() + (i * r + j) * n;
      for (std::size_t y = 0; y < r; ++y) {
        for (std::size_t x = 0; x < r; ++x) {
          row[y * r + x] = static_cast<float>(g[dist(i, y)] * g[dist(j, x)] / z);
        }
      }
    }
  }
  return out;
}

}  // namespace

bool region_contains(const Region& region, std::size_t x, std::size_t y) {
  if (const auto* r = std::get_if<Rect>(&region)) {
    return x >= r->x0 && x < r->x1 && y >= r->y0 && y < r->y1;
  }
  const auto& d = std::get<Disk>(region);
  const double dx = static_cast<double>(x) + 0.5 - d.cx;
  const double dy = static_cast<double>(y) + 0.5 - d.cy;
  return dx * dx + dy * dy < d.radius * d.radius;
}

Fixture make_fixture(const FixtureSpec& spec) {
  const std::size_t canvas = spec.canvas;
  const std::size_t m = spec.classes.size();
  if (m == 0) bad_spec("at least one class is required");
  if (m > 254) bad_spec("too many classes for an 8-bit mask");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) {
    bad_spec("noise amplitude must be finite and non-negative");
  }
  if (!(spec.bandwidth > 0.0) || !std::isfinite(spec.bandwidth)) {
    bad_spec("bandwidth must be positive");
  }
  if (spec.layers == 0) bad_spec("layers must be at least 1");
  if (canvas == 0 || spec.resolutions.empty()) bad_spec("empty canvas");
  for (std::size_t r : spec.resolutions) {
    if (r == 0 || r > canvas || canvas % r != 0) {
      bad_spec("resolution " + std::to_string(r) + " does not divide canvas");
    }
  }

  // Planted ground truth.
  LabelMask truth;
  truth.rows = truth.cols = canvas;
  truth.labels.assign(canvas * canvas, 0);
  std::set<std::string> names;
  for (std::size_t c = 0; c < m; ++c) {
    const auto& pc = spec.classes[c];
    if (words(pc.name).empty() || !names.insert(pc.name).second) {
      bad_spec("class names must be non-empty and unique");
    }
    if (!inside_canvas(pc.region, canvas)) {
      bad_spec("region of '" + pc.name + "' leaves the canvas");
    }
    for (std::size_t y = 0; y < canvas; ++y) {
      for (std::size_t x = 0; x < canvas; ++x) {
        if (!region_contains(pc.region, x, y)) continue;
        auto& cell = truth.labels[y * canvas + x];
        if (cell != 0) {
          bad_spec("planted regions of '" + spec.classes[cell - 1].name +
                   "' and '" + pc.name + "' overlap");
        }
        cell = static_cast<std::int32_t>(c + 1);
      }
    }
  }

  // Token layout of the class prompt: <start> words , words , ... <end>.
  AttentionDump dump;
  std::string class_prompt;
  std::size_t cursor = 1;
  for (std::size_t c = 0; c < m; ++c) {
    const auto w = words(spec.classes[c].name);
    if (c) {
      class_prompt += ", ";
      ++cursor;
    }
    std::string joined;
    for (std::size_t i = 0; i < w.size(); ++i) joined += (i ? " " : "") + w[i];
    class_prompt += joined;
    dump.token_map.classes.push_back(joined);
    dump.token_map.spans.push_back({cursor, cursor + w.size()});
    cursor += w.size();
  }
  if (cursor + 1 > spec.token_count) {
    bad_spec("class prompt needs " + std::to_string(cursor + 1) +
             " tokens, token_count is " + std::to_string(spec.token_count));
  }
  truth.legend = make_legend(dump.token_map.classes);

  auto& man = dump.manifest;
  man.model_id = "synthetic-fixture";
  man.prompt = "a synthetic scene; " + class_prompt;
  man.class_prompt = class_prompt;
  man.image_height = canvas;
  man.image_width = canvas;
  man.flipped = spec.flipped;
  man.layers_preaveraged = false;

  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };

  std::vector<std::size_t> resolutions = spec.resolutions;
  std::sort(resolutions.begin(), resolutions.end());
  const std::size_t tokens = spec.token_count;
  for (std::size_t r : resolutions) {
    const std::size_t k = canvas / r;
    // Coverage of each grid cell by each class.
    std::vector<double> coverage(m * r * r, 0.0);
    for (std::size_t y = 0; y < canvas; ++y) {
      for (std::size_t x = 0; x < canvas; ++x) {
        const auto label = truth.labels[y * canvas + x];
        if (label) coverage[(label - 1) * r * r + (y / k) * r + x / k] += 1.0;
      }
    }
    for (double& v : coverage) v /= static_cast<double>(k * k);

    std::vector<std::int64_t> owner(tokens, -1);
    for (std::size_t c = 0; c < m; ++c) {
      for (std::size_t t = dump.token_map.spans[c].begin;
           t < dump.token_map.spans[c].end; ++t) {
        owner[t] = static_cast<std::int64_t>(c);
      }
    }

    CrossLayerStack cross{r, {}};
    for (std::size_t l = 0; l < spec.layers; ++l) {
      Tensor t({r, r, tokens});
      for (std::size_t cell = 0; cell < r * r; ++cell) {
        for (std::size_t tok = 0; tok < tokens; ++tok) {
          double v = spec.noise * uniform();
          if (owner[tok] >= 0) v += coverage[owner[tok] * r * r + cell];
          t[cell * tokens + tok] = static_cast<float>(v);
        }
      }
      cross.layers.push_back(spec.flipped ? mirror_cross(t) : std::move(t));
    }
    dump.cross.emplace(r, std::move(cross));

    const Tensor kernel = gaussian_self(r, spec.bandwidth);
    SelfLayerStack self{r, {}};
    for (std::size_t l = 0; l < spec.layers; ++l) {
      self.layers.push_back(spec.flipped ? mirror_self(kernel) : kernel);
    }
    dump.self.emplace(r, std::move(self));
  }

  if (spec.flipped) {
    LabelMask mirrored = truth;
    for (std::size_t y = 0; y < canvas; ++y) {
      for (std::size_t x = 0; x < canvas; ++x) {
        mirrored.labels[y * canvas + (canvas - 1 - x)] = truth.labels[y * canvas + x];
      }
    }
    truth = std::move(mirrored);
  }
  return {std::move(dump), std::move(truth)};
}

FixtureSpec planted_scene(std::size_t num_classes, double noise,
                          std::uint64_t seed) {
  static const std::vector<PlantedClass> kScene{
      {"cat", Rect{4, 6, 28, 30}},
      {"dog", Disk{46.0, 18.0, 12.0}},
      {"tv monitor", Rect{18, 40, 58, 60}},
      {"person", Disk{8.0, 50.0, 6.0}},
  };
  if (num_classes == 0 || num_classes > kScene.size()) {
    bad_spec("planted scene supports 1.." + std::to_string(kScene.size()) +
             " classes");
  }
  FixtureSpec spec;
  spec.classes.assign(kScene.begin(), kScene.begin() + num_classes);
  spec.noise = noise;
  spec.seed = seed;
  return spec;
}

}  // namespace attnseg
