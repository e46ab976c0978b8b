#include <benchmark/benchmark.h>

#include <random>

#include "evpulse/frame_gen.hpp"
#include "evpulse/synth.hpp"

using namespace evpulse;

namespace {

io::EventStream random_stream(std::size_t n, std::uint16_t side, std::uint64_t span_us) {
  std::mt19937_64 rng(1);
  io::EventStream s{{}, side, side};
  s.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.events.push_back({i * span_us / n, static_cast<std::uint16_t>(rng() % side),
                        static_cast<std::uint16_t>(rng() % side), static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
  }
  return s;
}

}  // namespace

static void BM_Accumulate(benchmark::State& state) {
  const auto s = random_stream(static_cast<std::size_t>(state.range(0)), 144, 33333);
  frames::EventWindow w{1, 0, 33333, s.events};
  for (auto _ : state) benchmark::DoNotOptimize(frames::accumulate_frame(w, 144, 144));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Accumulate)->Arg(10'000)->Arg(1'000'000);

static void BM_GenerateFrames(benchmark::State& state) {
  // 10 s of a 720x720 sensor at 200k events/s, downsampled by 5 to 144x144.
  const auto s = random_stream(2'000'000, 720, 10'000'000);
  frames::FrameParams p;
  p.downsample = 5;
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(frames::generate_frames(s, p, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.events.size()));
}
BENCHMARK(BM_GenerateFrames)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_SynthGenerate(benchmark::State& state) {
  synth::SynthConfig c;
  c.duration_s = 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate(c));
}
BENCHMARK(BM_SynthGenerate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
