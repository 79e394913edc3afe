#include <benchmark/benchmark.h>

#include <random>

#include "labelsynth/model.hpp"
#include "labelsynth/shapes_world.hpp"
#include "labelsynth/synthesis.hpp"
#include "labelsynth/training.hpp"

using namespace labelsynth;

namespace {

Tensor<float> random_tensor(int n, int h, int w, int c, std::uint64_t seed) {
  Tensor<float> t(n, h, w, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

void BM_Conv3x3Forward(benchmark::State& state) {
  const int planes = static_cast<int>(state.range(0));
  nn::Conv2d<float> conv(planes, planes, 3, 1, 1, PaddingMode::reflect);
  const auto x = random_tensor(1, 64, 128, planes, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nullptr));
  state.SetItemsProcessed(state.iterations() * 64 * 128 * planes * planes * 9);
}
BENCHMARK(BM_Conv3x3Forward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SynthesizeComposed(benchmark::State& state) {
  ModelSpec spec;
  GanModel<float> model(spec);
  model.init_weights(0);
  const Dataset d = generate_shapes_dataset({0, 1, 128, 256, 4, 0});
  for (auto _ : state)
    benchmark::DoNotOptimize(synthesize(model, d.samples[0].label, d.samples[0].instance));
}
BENCHMARK(BM_SynthesizeComposed)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto kind = static_cast<PhaseKind>(state.range(0));
  TrainConfig cfg = TrainConfig::desk_default();
  GanModel<float> model(cfg.model);
  model.init_weights(0);
  const Dataset d = generate_shapes_dataset({0, 4, 128, 256, 4, 0});
  std::vector<const SamplePair*> batch;
  for (const auto& s : d.samples) batch.push_back(&s);
  Trainer trainer(cfg, model);
  trainer.begin_phase(static_cast<int>(kind));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 2e-4));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
