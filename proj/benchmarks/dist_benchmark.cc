// Copyright 2026 The DP-Fusion Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dpfusion/dist.h"
#include "dpfusion/fusion.h"
#include "dpfusion/mock_backend.h"
#include "dpfusion/mollifier.h"

namespace {

dpfusion::Dist RandomDist(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> gamma(0.5, 1.0);
  std::vector<double> w(n);
  for (double& x : w) x = gamma(rng) + 1e-6;
  return dpfusion::Dist::Normalized(std::move(w));
}

void BM_RenyiTwo(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = RandomDist(rng, state.range(0));
  const auto q = RandomDist(rng, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpfusion::RenyiDivergence(p, q));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenyiTwo)->RangeMultiplier(8)->Range(8, 1 << 17);

void BM_RenyiGeneral(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = RandomDist(rng, state.range(0));
  const auto q = RandomDist(rng, state.range(0));
  const dpfusion::RenyiOrder order(2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpfusion::RenyiDivergenceGeneralOrder(p, q, order));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenyiGeneral)->RangeMultiplier(8)->Range(8, 1 << 17);

void BM_FindMaxLambda(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto p = RandomDist(rng, state.range(0));
  const auto q = RandomDist(rng, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dpfusion::FindMaxLambda(p, q, dpfusion::RenyiOrder(), 0.02));
  }
}
BENCHMARK(BM_FindMaxLambda)->RangeMultiplier(8)->Range(8, 1 << 17);

// One fused step over a Qwen-sized vocabulary with eight groups.
void BM_FuseStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const std::size_t vocab = 152064;
  const auto pub = RandomDist(rng, vocab);
  std::vector<dpfusion::Dist> priv;
  for (int i = 0; i < state.range(0); ++i) priv.push_back(RandomDist(rng, vocab));
  const std::vector<double> bounds(priv.size(), 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dpfusion::FuseStep(pub, priv, bounds, dpfusion::RenyiOrder()));
  }
}
BENCHMARK(BM_FuseStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GenerateMock(benchmark::State& state) {
  const dpfusion::MockModel model;
  const dpfusion::AnnotatedDocument doc(
      "b", "Mr Kovac was arrested in Trnava on 12 March 2004.",
      {{3, 8, 1}, {25, 31, 2}, {35, 48, 3}},
      {{1, "PERSON", 0.05}, {2, "LOC", 0.05}, {3, "DATE", 0.05}});
  dpfusion::FusionConfig config;
  config.max_tokens = 50;
  const dpfusion::FusionEngine engine(model, dpfusion::PromptBundle::Default(),
                                      config);
  for (auto _ : state) benchmark::DoNotOptimize(engine.Generate(doc));
}
BENCHMARK(BM_GenerateMock)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
