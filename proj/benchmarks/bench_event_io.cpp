#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "evpulse/event_io.hpp"

using namespace evpulse;

namespace {

io::EventStream raw_stream(std::size_t n) {
  std::mt19937_64 rng(2);
  io::EventStream s{{}, 640, 480};
  for (std::size_t i = 0; i < n; ++i) {
    s.events.push_back({i * 3, static_cast<std::uint16_t>(rng() % 640), static_cast<std::uint16_t>(rng() % 480),
                        static_cast<std::int8_t>(rng() % 2)});
  }
  return s;
}

}  // namespace

static void BM_ParseText(benchmark::State& state) {
  std::ostringstream out;
  io::write_text_stream(out, raw_stream(static_cast<std::size_t>(state.range(0))));
  const std::string text = out.str();
  for (auto _ : state) benchmark::DoNotOptimize(io::parse_text_stream(text, 640, 480));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseText)->Arg(100'000);

static void BM_ParseBinary(benchmark::State& state) {
  const auto bytes = io::encode_binary_stream(raw_stream(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(io::parse_binary_stream(bytes));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ParseBinary)->Arg(100'000);

BENCHMARK_MAIN();
