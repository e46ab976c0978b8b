#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "evpulse/count_baseline.hpp"
#include "evpulse/errors.hpp"
#include "evpulse/event_io.hpp"
#include "evpulse/synth.hpp"

using namespace evpulse;
using io::Event;
using io::EventStream;

TEST(CountSignal, Examples) {
  EventStream s;
  s.width = s.height = 4;
  s.events = {{0, 0, 0, 1}, {1, 1, 0, 0}, {9, 2, 0, 1}, {20, 0, 0, 0}, {21, 1, 1, 1},
              {22, 1, 1, 1}, {25, 3, 3, 0}, {29, 3, 3, 1}};
  const auto c = baseline::event_count_signal(s, 10);
  EXPECT_EQ(c.counts, (std::vector<double>{3, 0, 5}));
  EXPECT_DOUBLE_EQ(c.fs(), 1e5);
  EventStream empty;
  empty.width = empty.height = 1;
  EXPECT_TRUE(baseline::event_count_signal(empty, 10).counts.empty());
  EXPECT_THROW(baseline::event_count_signal(s, 0), ParameterError);
}

TEST(CountSignal, PartitionAndPolarityInvariance) {
  synth::RateModulatedConfig rc;
  rc.duration_s = 5.0;
  rc.base_rate = 2000.0;
  const auto s = synth::generate_rate_modulated(rc);
  const auto c = baseline::event_count_signal(s, 10000);
  double total = 0;
  for (double v : c.counts) total += v;
  EXPECT_EQ(total, static_cast<double>(s.size()));
  EXPECT_EQ(baseline::event_count_signal(io::map_polarity(s), 10000).counts, c.counts);
}

TEST(CountSignal, PeriodForRate) {
  EXPECT_EQ(baseline::period_for_rate(30), 33333u);
  EXPECT_EQ(baseline::period_for_rate(60), 16666u);
  EXPECT_EQ(baseline::period_for_rate(120), 8333u);
  EXPECT_EQ(baseline::period_for_rate(100), 10000u);
}

TEST(Baseline, RateModulatedRecoveredAtAllBinRates) {
  synth::RateModulatedConfig rc;
  rc.hr_hz = 1.2;
  rc.depth = 0.5;
  const auto s = synth::generate_rate_modulated(rc);
  for (double rate : {10.0, 30.0, 60.0, 100.0, 120.0}) {
    const auto r = baseline::baseline_hr(baseline::event_count_signal(s, baseline::period_for_rate(rate)));
    EXPECT_LE(std::abs(r.estimate.bpm - 72.0), 1.0) << rate;
    EXPECT_LE(std::abs(r.estimate.bpm - 72.0), r.estimate.resolution_bpm) << rate;
    EXPECT_FALSE(r.low_confidence);
    EXPECT_DOUBLE_EQ(r.bins_per_second, 1e6 / static_cast<double>(baseline::period_for_rate(rate)));
  }
}

TEST(Baseline, ConstantRateIsLowConfidence) {
  for (std::uint64_t seed : {1, 2, 3}) {
    synth::RateModulatedConfig rc;
    rc.depth = 0.0;
    rc.seed = seed;
    const auto s = synth::generate_rate_modulated(rc);
    const auto r = baseline::baseline_hr(baseline::event_count_signal(s, baseline::period_for_rate(30)));
    EXPECT_TRUE(r.low_confidence) << "seed " << seed << " ratio " << r.estimate.peak_to_median;
    EXPECT_GE(r.estimate.bpm, 45.0);
    EXPECT_LE(r.estimate.bpm, 150.0);
  }
}

TEST(Baseline, NeedsTenSeconds) {
  synth::RateModulatedConfig rc;
  rc.duration_s = 5.0;
  const auto s = synth::generate_rate_modulated(rc);
  EXPECT_THROW(baseline::baseline_hr(baseline::event_count_signal(s, 10000)), LengthError);
}

TEST(Synth, SilentWithoutModulationOrNoise) {
  synth::SynthConfig c;
  c.duration_s = 5.0;
  c.noise_rate = 0.0;
  c.pulse_amplitude = 0.0;
  const auto t = synth::generate(c);
  EXPECT_TRUE(t.stream.empty());
  EXPECT_EQ(t.ecg.size(), 5000u);
  EXPECT_DOUBLE_EQ(t.ecg.fs, 1000.0);
  EXPECT_DOUBLE_EQ(t.hr_true_bpm, 72.0);
}

TEST(Synth, PixelPolarityRunsFollowWaveformSlope) {
  synth::SynthConfig c;
  c.duration_s = 10.0;
  c.noise_rate = 0.0;
  c.pulse_amplitude = 2.0;
  c.contrast_threshold = 0.05;
  c.amplitude_jitter = 0.0;
  c.skin = {0, 0, 4, 4};
  c.width = c.height = 4;
  const auto t = synth::generate(c);

  // w' = f(cos th + 0.6 cos 2th) changes sign where cos th = (-1 + sqrt(3.88)) / 2.4.
  const double f = c.hr_hz;
  const double th = std::acos((-1.0 + std::sqrt(3.88)) / 2.4);
  std::vector<double> zeros;
  for (int k = 0; k < 20; ++k) {
    for (double z : {th, 2.0 * std::numbers::pi - th}) {
      const double ts = (z + 2.0 * std::numbers::pi * k) / (2.0 * std::numbers::pi * f);
      if (ts > 0.05 && ts < c.duration_s - 0.05) zeros.push_back(ts);
    }
  }
  std::sort(zeros.begin(), zeros.end());
  EXPECT_NEAR(static_cast<double>(zeros.size()), 2.0 * f * c.duration_s, 1.0);

  std::vector<double> switches;
  int last = -1;
  for (const auto& e : t.stream.events) {
    if (e.x != 1 || e.y != 2) continue;
    if (last >= 0 && e.p != last) switches.push_back(static_cast<double>(e.t) * 1e-6);
    last = e.p;
  }
  ASSERT_EQ(switches.size(), zeros.size());
  for (std::size_t i = 0; i < zeros.size(); ++i) {
    EXPECT_GE(switches[i], zeros[i] - 1e-3);
    EXPECT_LE(switches[i], zeros[i] + 0.08);
  }
}

TEST(Synth, DeterministicPerSeed) {
  synth::SynthConfig c;
  c.duration_s = 3.0;
  c.seed = 17;
  const auto a = synth::generate(c);
  const auto b = synth::generate(c);
  EXPECT_EQ(a.stream, b.stream);
  EXPECT_EQ(a.ecg.values, b.ecg.values);
  c.seed = 18;
  EXPECT_NE(synth::generate(c).stream, a.stream);
}

TEST(Synth, HigherThresholdFewerEvents) {
  synth::SynthConfig c;
  c.duration_s = 4.0;
  c.noise_rate = 0.0;
  std::size_t prev = SIZE_MAX;
  for (double th : {0.05, 0.1, 0.2, 0.4}) {
    c.contrast_threshold = th;
    const auto n = synth::generate(c).stream.size();
    EXPECT_LT(n, prev) << th;
    prev = n;
  }
}

TEST(Synth, StreamsSatisfyEventInvariants) {
  synth::SynthConfig c;
  c.duration_s = 3.0;
  c.noise_rate = 5.0;
  const auto s = synth::generate(c).stream;
  ASSERT_FALSE(s.empty());
  EXPECT_EQ(io::parse_binary_stream(io::encode_binary_stream(s)), s);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s.events[i - 1].t, s.events[i].t);
  for (const auto& e : s.events) {
    EXPECT_TRUE(e.p == 0 || e.p == 1);
    EXPECT_LT(e.x, c.width);
    EXPECT_LT(e.y, c.height);
  }
}

TEST(Synth, Validation) {
  synth::SynthConfig c;
  c.hr_hz = 5.0;
  EXPECT_THROW(synth::generate(c), ParameterError);
  c.hr_hz = 1.2;
  c.contrast_threshold = 0.0;
  EXPECT_THROW(synth::generate(c), ParameterError);
  c.contrast_threshold = 0.1;
  c.skin = {50, 50, 32, 32};
  EXPECT_THROW(synth::generate(c), ParameterError);
}

TEST(Recoverable, DefaultConfigViaCountBaseline) {
  const auto t = synth::generate({});
  const auto r = synth::verify_recoverable(t, synth::Route::kCountBaseline);
  EXPECT_LE(r.error_bpm, 1.0);
  EXPECT_FALSE(r.low_confidence);
}

TEST(Recoverable, PureNoiseIsLowConfidence) {
  synth::SynthConfig c;
  c.pulse_amplitude = 0.0;
  c.noise_rate = 5.0;
  const auto r = synth::verify_recoverable(synth::generate(c), synth::Route::kCountBaseline);
  EXPECT_TRUE(r.low_confidence);
}

TEST(Recoverable, FiftyFourBpmViaFrameMean) {
  synth::SynthConfig c;
  c.hr_hz = 0.9;
  const auto t = synth::generate(c);
  const auto r = synth::verify_recoverable(t, synth::Route::kFrameMean);
  EXPECT_NEAR(r.hr_estimated, 54.0, 1.0);
  EXPECT_FALSE(r.low_confidence);
}

// The slope-driven event rate carries its second harmonic at 2*f; below
// about 1.1 Hz the count route locks onto it (recorded, not hidden).
TEST(Recoverable, CountRouteAtFiftyFourBpmFindsHarmonic) {
  synth::SynthConfig c;
  c.hr_hz = 0.9;
  const auto r = synth::verify_recoverable(synth::generate(c), synth::Route::kCountBaseline);
  EXPECT_NEAR(r.hr_estimated, 108.0, 1.0);
}

TEST(Recoverable, FrameMeanAcrossRatesAndFrameRates) {
  for (double f : {0.9, 1.0, 1.2, 1.5, 2.0}) {
    synth::SynthConfig c;
    c.hr_hz = f;
    c.duration_s = 30.0;
    c.seed = 40;
    const auto t = synth::generate(c);
    for (std::uint64_t period : {33333u, 8333u}) {
      synth::RecoveryOptions o;
      o.frame_period_us = period;
      EXPECT_LE(synth::verify_recoverable(t, synth::Route::kFrameMean, o).error_bpm, 1.0) << f << " " << period;
    }
  }
}
