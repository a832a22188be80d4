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
#include "attnseg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "attnseg/error.hpp"
#include "attnseg/fusion.hpp"
#include "attnseg/reference.hpp"

namespace attnseg {

namespace {

double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

Tensor random_stochastic_self(std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = side * side;
  Tensor t({side, side, side, side});
  std::vector<double> row(n);
  for (std::size_t q = 0; q < n; ++q) {
    double s = 0.0;
    for (auto& v : row) s += (v = 0.05 + unit(rng));
    for (std::size_t k = 0; k < n; ++k) {
      t[q * n + k] = static_cast<float>(row[k] / s);
    }
  }
  return t;
}

Plane random_plane(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Plane p(rows, cols);
  for (double& v : p.values()) v = unit(rng);
  return p;
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  if (config.repeats == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bench needs at least one repeat");
  }
  std::vector<BenchRow> rows;
  for (std::size_t side : config.sides) {
    if (side == 0 || side > config.canvas || config.canvas % side != 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "grid side " + std::to_string(side) + " does not divide canvas " +
                      std::to_string(config.canvas));
    }
    const Tensor self = random_stochastic_self(side, config.seed + side);
    const Plane fused =
        random_plane(config.canvas, config.canvas, config.seed * 31 + side);
    const LevelWeights w{{side, 1.0}};

    BenchRow row;
    row.side = side;
    row.canvas = config.canvas;
    row.naive_ms = row.block_ms = std::numeric_limits<double>::infinity();
    Plane naive, block;
    for (std::size_t rep = 0; rep < config.repeats; ++rep) {
      row.naive_ms = std::min(row.naive_ms, time_ms([&] {
        std::map<std::size_t, reference::DenseAffinity> dense;
        dense.emplace(side, reference::up_and_repeat(self, config.canvas));
        naive = reference::refine_naive(dense, fused, w);
      }));
      row.block_ms = std::min(row.block_ms, time_ms([&] {
        AffinitySet ops;
        ops.emplace(side, AffinityOperator(self, config.canvas));
        block = refine_block(ops, fused, w);
      }));
    }
    for (std::size_t i = 0; i < naive.size(); ++i) {
      row.max_abs_diff = std::max(
          row.max_abs_diff, std::abs(naive.values()[i] - block.values()[i]));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "canvas" << std::setw(6) << "r"
     << std::right << std::setw(14) << "naive_ms" << std::setw(14) << "block_ms"
     << std::setw(12) << "block/naive" << std::setw(14) << "max_abs_diff"
     << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(8) << r.canvas << std::setw(6) << r.side
       << std::right << std::fixed << std::setprecision(3) << std::setw(14)
       << r.naive_ms << std::setw(14) << r.block_ms << std::setprecision(5)
       << std::setw(12) << r.ratio() << std::scientific << std::setprecision(2)
       << std::setw(14) << r.max_abs_diff << std::defaultfloat << '\n';
  }
  return os.str();
}

}  // namespace attnseg
