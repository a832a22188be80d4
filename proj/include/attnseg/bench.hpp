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
#include <string>
#include <vector>

#include "attnseg/tensor.hpp"

namespace attnseg {

struct BenchConfig {
  std::size_t canvas = 64;
  std::vector<std::size_t> sides{8};
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
};

/// Best-of-`repeats` wall time of each path on one random instance. The naive
/// time covers materializing the canvas affinity and the dense product; the
/// block time covers building the operator and propagating.
struct BenchRow {
  std::size_t side = 0;
  std::size_t canvas = 0;
  double naive_ms = 0.0;
  double block_ms = 0.0;
  double max_abs_diff = 0.0;
  double ratio() const { return naive_ms > 0.0 ? block_ms / naive_ms : 0.0; }
};

std::vector<BenchRow> run_bench(const BenchConfig& config);
std::string bench_table(const std::vector<BenchRow>& rows);

/// Random (r, r, r, r) tensor with strictly positive, row-stochastic slices.
Tensor random_stochastic_self(std::size_t side, std::uint64_t seed);

/// Random non-negative (rows x cols) plane.
Plane random_plane(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace attnseg
