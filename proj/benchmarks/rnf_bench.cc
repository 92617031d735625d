/*
 * Copyright 2026 The RNF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include "rnf/analysis.h"
#include "rnf/losses.h"
#include "rnf/nn.h"

namespace rnf {
namespace {

Matrix Gaussian(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
  return m;
}

Matrix Probabilities(Rng& rng, int rows) {
  Matrix p(rows, 2);
  for (int r = 0; r < rows; ++r) {
    p(r, 0) = rng.Uniform();
    p(r, 1) = 1.0 - p(r, 0);
  }
  return p;
}

// Adult-sized MLP, one batch.
void BM_ForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Rng rng(1);
  const nn::Model m = nn::Model::Initialized({98, 50, 50, 2}, 1, 0.2, 1);
  const Matrix x = Gaussian(rng, batch, 98);
  std::vector<int> y(batch);
  for (int& v : y) v = static_cast<int>(rng.Below(2));
  uint64_t seed = 0;
  for (auto _ : state) {
    const auto trace = nn::Forward(m, x, nn::Mode::kTrain, ++seed);
    const auto loss = losses::CrossEntropyBatch(trace.probabilities, y);
    benchmark::DoNotOptimize(
        nn::Backward(m, trace, loss.d_logits, nn::Scope::kAll));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(512);

void BM_CombinedRnfLoss(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Rng rng(2);
  const nn::Model m = nn::Model::Initialized({98, 50, 50, 2}, 1, 0.2, 2);
  const Matrix z1 = Gaussian(rng, batch, 50).cwiseMax(0.0);
  const Matrix z2 = Gaussian(rng, batch, 50).cwiseMax(0.0);
  const Matrix p1 = Probabilities(rng, batch), p2 = Probabilities(rng, batch);
  losses::RnfLossConfig cfg;
  cfg.temperature = 2.0;
  losses::HeadOptions opts;
  opts.temperature = 2.0;
  opts.mode = nn::Mode::kTrain;
  for (auto _ : state) {
    ++opts.seed;
    benchmark::DoNotOptimize(losses::CombinedRnfLoss(m, z1, z2, p1, p2, cfg, opts));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_CombinedRnfLoss)->Arg(64)->Arg(512);

void BM_KpcaProject(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  const Matrix z = Gaussian(rng, n, 50).cwiseMax(0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(analysis::KpcaProject(z));
  }
}
BENCHMARK(BM_KpcaProject)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rnf

BENCHMARK_MAIN();
