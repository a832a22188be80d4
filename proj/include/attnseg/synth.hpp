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

// Synthetic attention dumps with planted ground truth.
//
// Cross maps: for each class token, the fraction of each grid cell covered by
// the class region, plus uniform noise in [0, noise]; every other token gets
// noise only. Self maps: row-normalized isotropic Gaussian over grid distance
// with sigma = bandwidth cells at every resolution, so the receptive field on
// the canvas (bandwidth * 64 / r pixels) is widest at the coarsest grid.
// Noise comes from std::mt19937_64 (whose output sequence is fixed by the
// standard) mapped to [0, 1) with 53-bit precision, so fixtures are identical
// across platforms.

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "attnseg/model.hpp"

namespace attnseg {

/// Half-open pixel rectangle [x0, x1) x [y0, y1) on the canvas.
struct Rect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Pixels whose centres (x + 0.5, y + 0.5) lie strictly inside the circle.
struct Disk {
  double cx = 0.0, cy = 0.0, radius = 0.0;
};

using Region = std::variant<Rect, Disk>;

struct PlantedClass {
  std::string name;  // words separated by single spaces, one token each
  Region region;
};

struct FixtureSpec {
  std::vector<std::size_t> resolutions{kResolutions.begin(), kResolutions.end()};
  std::size_t canvas = kCanvas;
  std::vector<PlantedClass> classes;
  double noise = 0.0;
  double bandwidth = 0.5;
  std::size_t layers = 1;
  std::size_t token_count = 77;
  std::uint64_t seed = 0;
  bool flipped = false;  // mirror every tensor and the ground truth
};

struct Fixture {
  AttentionDump dump;
  LabelMask ground_truth;
};

/// Throws Error(kInvalidArgument) for out-of-canvas or overlapping regions
/// and other malformed specs.
Fixture make_fixture(const FixtureSpec& spec);

/// A fixed scene of up to four non-overlapping classes: "cat" (rectangle),
/// "dog" (disk), "tv monitor" (rectangle) and "person" (disk).
FixtureSpec planted_scene(std::size_t num_classes = 3, double noise = 0.0,
                          std::uint64_t seed = 0);

bool region_contains(const Region& region, std::size_t x, std::size_t y);

}  // namespace attnseg
