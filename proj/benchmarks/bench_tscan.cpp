#include <benchmark/benchmark.h>

#include <random>

#include "evpulse/tscan/model.hpp"

using namespace evpulse::tscan;

namespace {

Tensor4<float> noise(std::size_t n, std::size_t c, std::size_t s) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> d;
  Tensor4<float> t(n, c, s, s);
  for (auto& v : t.data) v = d(rng);
  return t;
}

TscanConfig config(std::size_t size, std::size_t width) {
  TscanConfig c;
  c.input_size = size;
  c.channels = {width, width, 2 * width, 2 * width};
  return c;
}

}  // namespace

static void BM_Conv3x3(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const auto x = noise(10, ch, 64);
  const std::vector<float> w(ch * ch * 9, 0.01f), b(ch, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward<float>(x, w, b, {ch, ch, 3, 1}));
}
BENCHMARK(BM_Conv3x3)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

// One frame-depth group forward and backward; the time per frame is the
// reported time divided by 10.
static void BM_GroupForwardBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  TscanModel<float> model(config(size, static_cast<std::size_t>(state.range(1))));
  model.initialize(1);
  const auto x = noise(10, 1, size);
  auto dloss = [](std::span<const float> p) { return std::vector<float>(p.size(), 0.1f); };
  std::mt19937_64 rng(4);
  for (auto _ : state) {
    auto g = model.zero_gradients();
    benchmark::DoNotOptimize(model.forward_backward(x, dloss, g, Mode::kTrain, &rng));
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_GroupForwardBackward)
    ->Args({32, 4})
    ->Args({64, 4})
    ->Args({64, 32})
    ->Unit(benchmark::kMillisecond);

static void BM_Infer(benchmark::State& state) {
  TscanModel<float> model(config(64, 32));
  model.initialize(1);
  const auto x = noise(180, 1, 64);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
  state.SetItemsProcessed(state.iterations() * 180);
}
BENCHMARK(BM_Infer)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
