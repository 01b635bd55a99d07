// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ctbg/attention.hpp"
#include "ctbg/dreamer.hpp"
#include "ctbg/metrics.hpp"
#include "ctbg/synthgen.hpp"
#include "ctbg/training.hpp"

namespace {

using namespace ctbg;

ModelConfig bench_model() {
  ModelConfig mc;
  mc.dim = 32;
  mc.layers = 3;
  return mc;
}

void BM_Forward(benchmark::State& state) {
  const Model<float> model(bench_model(), 1);
  const auto scene = generate_scene(static_cast<std::uint64_t>(state.range(0)), hard_difficulty());
  for (auto _ : state) {
    Tape<float> tape;
    auto r = run_scene(model, tape, scene);
    benchmark::DoNotOptimize(r.blocks);
  }
  state.counters["units"] = static_cast<double>(scene.units.size());
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const Model<float> model(bench_model(), 1);
  const auto scene = generate_scene(static_cast<std::uint64_t>(state.range(0)), easy_difficulty());
  const auto labels = successor_labels(scene);
  const auto params = model.params().pointers();
  for (auto _ : state) {
    Tape<float> tape;
    const auto r = run_scene(model, tape, scene);
    const auto loss = loss_overall(r, labels, model.config().layers);
    auto grads = tape.gradients(loss.total, params);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_DeformableAttention(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  DeformAttnConfig cfg;
  ParameterStore<float> store;
  const auto ca = DeformableCrossAttention<float>::create(store, "ca", cfg, kFeatureChannels, rng);
  auto scene = generate_scene(5, hard_difficulty());
  scene.units.resize(std::min(n, scene.units.size()));
  while (scene.units.size() < n) scene.units.push_back(scene.units[scene.units.size() % 4]);
  const auto features = cast_pyramid<float>(rasterize(scene, RasterConfig{64, 64, cfg.levels}));
  std::uniform_real_distribution<float> u(-1, 1);
  Tensor<float> q(Shape{n, cfg.dim});
  for (auto& v : q.data) v = u(rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto y = ca.forward(tape, tape.constant(q), scene.units, features);
    benchmark::DoNotOptimize(y.value().data());
  }
}
BENCHMARK(BM_DeformableAttention)->Arg(8)->Arg(32)->Arg(128);

void BM_Evaluate(benchmark::State& state) {
  const auto scenes = generate_corpus(1, static_cast<std::size_t>(state.range(0)), hard_difficulty());
  std::vector<ScenePrediction> preds;
  std::mt19937_64 rng(4);
  for (const auto& s : scenes) {
    ScenePrediction p{s.units, {}, {}};
    for (std::size_t u = 0; u < s.units.size(); ++u) {
      if (p.blocks.empty() || rng() % 3 == 0) p.blocks.push_back({});
      p.blocks.back().push_back(u);
    }
    preds.push_back(std::move(p));
  }
  for (auto _ : state) {
    auto r = evaluate(preds, scenes);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Evaluate)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
