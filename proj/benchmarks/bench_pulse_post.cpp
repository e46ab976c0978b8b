#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "evpulse/dsp.hpp"
#include "evpulse/label_pipeline.hpp"
#include "evpulse/pulse_post.hpp"

using namespace evpulse;

namespace {

std::vector<double> pulse(std::size_t n, double fs) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 0.3);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * 3.141592653589793 * 1.2 * static_cast<double>(i) / fs) + d(rng);
  return x;
}

}  // namespace

static void BM_Postprocess(benchmark::State& state) {
  const auto x = pulse(static_cast<std::size_t>(state.range(0)), 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(post::postprocess(x, 30.0));
}
BENCHMARK(BM_Postprocess)->Arg(1800)->Arg(7200)->Unit(benchmark::kMillisecond);

static void BM_EstimateHr(benchmark::State& state) {
  const auto x = pulse(static_cast<std::size_t>(state.range(0)), 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(post::estimate_hr_fft(x, 30.0));
}
BENCHMARK(BM_EstimateHr)->Arg(1800)->Arg(7200);

static void BM_Filtfilt(benchmark::State& state) {
  const auto x = pulse(60'000, 1000.0);
  const auto sos = dsp::butter_bandpass_design(1, dsp::kHeartBand, 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::sos_filtfilt(sos, x));
}
BENCHMARK(BM_Filtfilt)->Unit(benchmark::kMillisecond);

static void BM_ProcessEcg(benchmark::State& state) {
  const auto trace = labels::make_uniform(pulse(60'000, 1000.0), 1000.0);
  std::vector<std::uint64_t> frames;
  for (std::uint64_t t = 0; t < 60'000'000; t += 33333) frames.push_back(t);
  for (auto _ : state) benchmark::DoNotOptimize(labels::process_ecg(trace, frames));
}
BENCHMARK(BM_ProcessEcg)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
