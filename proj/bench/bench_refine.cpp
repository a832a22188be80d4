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
// Naive (materialized canvas affinity) against block refinement, and the
// block path at one thread against the OpenMP default.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "attnseg/bench.hpp"
#include "attnseg/fusion.hpp"
#include "attnseg/reference.hpp"

namespace {

using namespace attnseg;

void BM_RefineNaive(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor self = random_stochastic_self(side, 1);
  const Plane fused = random_plane(kCanvas, kCanvas, 2);
  for (auto _ : state) {
    std::map<std::size_t, reference::DenseAffinity> dense;
    dense.emplace(side, reference::up_and_repeat(self, kCanvas));
    benchmark::DoNotOptimize(reference::refine_naive(dense, fused, {{side, 1.0}}));
  }
}
BENCHMARK(BM_RefineNaive)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_RefineBlock(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const Tensor self = random_stochastic_self(side, 1);
  const Plane fused = random_plane(kCanvas, kCanvas, 2);
  const int saved = omp_get_max_threads();
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    AffinitySet ops;
    ops.emplace(side, AffinityOperator(self, kCanvas));
    benchmark::DoNotOptimize(refine_block(ops, fused, {{side, 1.0}}));
  }
  omp_set_num_threads(saved);
}
// Second argument: worker threads, 0 for the runtime default.
BENCHMARK(BM_RefineBlock)
    ->ArgsProduct({{8, 16, 32, 64}, {1, 0}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
