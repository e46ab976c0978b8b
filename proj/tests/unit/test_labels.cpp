#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "evpulse/errors.hpp"
#include "evpulse/label_pipeline.hpp"
#include "evpulse/pulse_post.hpp"
#include "evpulse/synth.hpp"
#include "test_util.hpp"

using namespace evpulse;
using namespace evpulse::labels;

namespace {

SignalTrace ecg_trace(double hr_hz, double seconds, double amp = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(seconds * 1000.0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = amp * synth::ecg_waveform(hr_hz, static_cast<double>(i) / 1000.0);
  return make_uniform(std::move(v), 1000.0);
}

std::vector<std::uint64_t> frame_times(double seconds, std::uint64_t period = 33333) {
  std::vector<std::uint64_t> ts;
  for (std::uint64_t t = period - 1; t < static_cast<std::uint64_t>(seconds * 1e6); t += period) ts.push_back(t);
  return ts;
}

}  // namespace

TEST(Trace, UniformTimestamps) {
  const auto t = make_uniform(std::vector<double>(2000, 0.0), 1000.0);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NEAR(double(t.timestamps[i] - t.timestamps[i - 1]), 1000.0, 1.0);
  const auto odd = make_uniform(std::vector<double>(100, 0.0), 30.0);
  for (std::size_t i = 1; i < odd.size(); ++i) {
    EXPECT_NEAR(double(odd.timestamps[i] - odd.timestamps[i - 1]), 1e6 / 30.0, 1.0);
  }
}

TEST(Invert, Examples) {
  auto t = make_uniform({1.0, -2.0, 3.0}, 1000.0);
  const auto inv = invert(t);
  EXPECT_EQ(inv.values, (std::vector<double>{-1.0, 2.0, -3.0}));
  EXPECT_EQ(inv.timestamps, t.timestamps);
  EXPECT_EQ(invert(inv).values, t.values);
  const auto z = make_uniform(std::vector<double>(5, 0.0), 10.0);
  for (double v : invert(z).values) EXPECT_EQ(v, 0.0);
}

TEST(Smooth, ConstantAndLengthError) {
  const auto c = savgol_smooth(make_uniform(std::vector<double>(300, 7.0), 1000.0));
  for (double v : c.values) EXPECT_NEAR(v, 7.0, 1e-10);
  EXPECT_THROW(savgol_smooth(make_uniform(std::vector<double>(50, 1.0), 1000.0)), LengthError);
}

TEST(Bandpass, InvalidBandIsParameterError) {
  const auto t = make_uniform(std::vector<double>(1000, 1.0), 4.0);
  EXPECT_THROW(butter_bandpass(t), ParameterError);
}

TEST(Clip, Examples) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < 100; ++i) v[i] = static_cast<double>(i);
  const auto c = percentile_clip(make_uniform(v, 100.0), 0.01);
  EXPECT_NEAR(*std::min_element(c.values.begin(), c.values.end()), 0.99, 1e-12);
  EXPECT_NEAR(*std::max_element(c.values.begin(), c.values.end()), 98.01, 1e-12);
  EXPECT_EQ(c.values[50], 50.0);
  EXPECT_EQ(percentile_clip(make_uniform(v, 100.0), 0.0).values, v);
  const std::vector<double> k(20, 4.0);
  EXPECT_EQ(percentile_clip(make_uniform(k, 100.0), 0.01).values, k);
  EXPECT_THROW(percentile_clip(make_uniform(v, 100.0), 0.5), ParameterError);
}

TEST(Resample, NearestWithEarlierTie) {
  SignalTrace t;
  t.timestamps = {0, 1000, 2000};
  t.values = {10.0, 20.0, 30.0};
  const std::vector<std::uint64_t> frames{900, 500, 5000, 1500, 1501};
  const auto l = resample_to_frames(t, frames);
  EXPECT_EQ(l.values, (std::vector<double>{20.0, 10.0, 30.0, 20.0, 30.0}));
  EXPECT_EQ(l.frame_timestamps, frames);
  EXPECT_THROW(resample_to_frames(SignalTrace{}, frames), Error);
}

TEST(DiffNormalize, WorkedExample) {
  LabelSeries l;
  l.values = {1.0, 2.0, 4.0, 7.0};
  l.frame_timestamps = {10, 20, 30, 40};
  const auto d = diff_normalize(l);
  const double z = 1.0 / std::sqrt(2.0 / 3.0);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d.values[0], -z, 1e-12);
  EXPECT_NEAR(d.values[1], 0.0, 1e-12);
  EXPECT_NEAR(d.values[2], z, 1e-12);
  EXPECT_NEAR(z, 1.2247, 1e-4);
  EXPECT_EQ(d.frame_timestamps, (std::vector<std::uint64_t>{20, 30, 40}));
}

TEST(DiffNormalize, DegenerateAndShort) {
  LabelSeries ramp;
  for (int i = 0; i < 10; ++i) ramp.values.push_back(3.0 * i);
  EXPECT_THROW(diff_normalize(ramp), DegenerateSignalError);
  LabelSeries tiny;
  tiny.values = {1.0, 2.0};
  EXPECT_THROW(diff_normalize(tiny), LengthError);
}

TEST(DiffNormalize, ZeroMeanUnitStd) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(3.0, 2.0);
  LabelSeries l;
  for (int i = 0; i < 777; ++i) l.values.push_back(n(rng));
  const auto d = diff_normalize(l);
  EXPECT_LT(std::abs(dsp::mean(d.values)), 1e-6);
  EXPECT_LT(std::abs(std::sqrt(dsp::variance(d.values)) - 1.0), 1e-6);
}

TEST(ProcessEcg, RecoversSeventyTwoBpm) {
  const auto ts = frame_times(60.0);
  const auto l = process_ecg(ecg_trace(1.2, 60.0), ts);
  EXPECT_EQ(l.size(), ts.size() - 1);
  const double fs = 1e6 / 33333.0;
  const auto est = post::estimate_hr_fft(post::postprocess(l.values, fs), fs);
  EXPECT_LE(std::abs(est.bpm - 72.0), est.resolution_bpm);
  EXPECT_LE(std::abs(est.bpm - 72.0), 1.0);
}

TEST(ProcessEcg, ConstantIsDegenerate) {
  EXPECT_THROW(process_ecg(make_uniform(std::vector<double>(10000, 1.0), 1000.0), frame_times(10.0)),
               DegenerateSignalError);
}

TEST(ProcessEcg, ScaleInvariant) {
  const auto ts = frame_times(20.0);
  const auto a = process_ecg(ecg_trace(1.3, 20.0, 1.0), ts);
  const auto b = process_ecg(ecg_trace(1.3, 20.0, 2.0), ts);
  const auto c = process_ecg(ecg_trace(1.3, 20.0, 0.37), ts);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.values[i], b.values[i], 1e-9);
    EXPECT_NEAR(a.values[i], c.values[i], 1e-9);
  }
}

TEST(ProcessEcg, FrequencyPreservedForPulseShapedInput) {
  const auto ts = frame_times(60.0);
  const double fs = 1e6 / 33333.0;
  for (double f0 : {0.8, 0.9, 1.0, 1.25, 1.6, 2.0, 2.4}) {
    std::vector<double> v(60000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = synth::pulse_waveform(f0, static_cast<double>(i) / 1000.0);
    const auto l = process_ecg(make_uniform(std::move(v), 1000.0), ts);
    const auto est = post::estimate_hr_fft(post::postprocess(l.values, fs), fs);
    EXPECT_LE(std::abs(est.peak_hz - f0) * 60.0, est.resolution_bpm) << "f0=" << f0;
  }
}

TEST(ProcessEcg, FrequencyPreservedForQrsTrainFromOneHertz) {
  const auto ts = frame_times(60.0);
  const double fs = 1e6 / 33333.0;
  for (double f0 : {1.0, 1.1, 1.25, 1.6, 2.0, 2.4}) {
    const auto l = process_ecg(ecg_trace(f0, 60.0), ts);
    const auto est = post::estimate_hr_fft(post::postprocess(l.values, fs), fs);
    EXPECT_LE(std::abs(est.peak_hz - f0) * 60.0, est.resolution_bpm) << "f0=" << f0;
  }
}

// Below 1 Hz the narrow QRS complex leaves the second harmonic as strong as
// the fundamental, and the first-order band passes 2*f0 with more gain.
TEST(ProcessEcg, SlowQrsTrainLocksOntoSecondHarmonic) {
  const auto ts = frame_times(60.0);
  const double fs = 1e6 / 33333.0;
  for (double f0 : {0.8, 0.9}) {
    const auto l = process_ecg(ecg_trace(f0, 60.0), ts);
    const auto est = post::estimate_hr_fft(post::postprocess(l.values, fs), fs);
    EXPECT_LE(std::abs(est.peak_hz - 2.0 * f0) * 60.0, est.resolution_bpm) << "f0=" << f0;
  }
}

TEST(Csv, EcgFormats) {
  test_util::TempDir dir;
  const auto t = ecg_trace(1.1, 2.0);
  write_ecg_csv(dir / "ecg.csv", t);
  const auto back = read_ecg_csv(dir / "ecg.csv");
  EXPECT_EQ(back.timestamps, t.timestamps);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(back.values[i], t.values[i]);
  EXPECT_DOUBLE_EQ(back.fs, 1000.0);

  {
    std::ofstream o(dir / "u.csv");
    o << "value\n1.5\n2.5\n-1\n";
  }
  EXPECT_THROW(read_ecg_csv(dir / "u.csv"), ParameterError);
  const auto u = read_ecg_csv(dir / "u.csv", 500.0);
  EXPECT_EQ(u.values, (std::vector<double>{1.5, 2.5, -1.0}));
  EXPECT_EQ(u.timestamps[1], 2000u);
  {
    std::ofstream o(dir / "bad.csv");
    o << "t,value\n0,1\nzz,2\n";
  }
  EXPECT_THROW(read_ecg_csv(dir / "bad.csv"), ParseError);
}

TEST(Csv, LabelsRoundTrip) {
  test_util::TempDir dir;
  LabelSeries l;
  l.values = {0.25, -1.0 / 3.0, 2.0};
  l.frame_timestamps = {33332, 66665, 99998};
  write_labels_csv(dir / "l.csv", l, 1);
  EXPECT_EQ(test_util::slurp(dir / "l.csv").substr(0, 26), "frame_index,timestamp,labe");
  std::size_t first = 0;
  const auto back = read_labels_csv(dir / "l.csv", &first);
  EXPECT_EQ(first, 1u);
  EXPECT_EQ(back.values, l.values);
  EXPECT_EQ(back.frame_timestamps, l.frame_timestamps);
}
