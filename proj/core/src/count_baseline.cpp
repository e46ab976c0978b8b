#include "evpulse/count_baseline.hpp"

#include <cmath>

#include "evpulse/errors.hpp"
#include "evpulse/frame_gen.hpp"

namespace evpulse::baseline {

CountSignal event_count_signal(const io::EventStream& stream, std::uint64_t bin_period_us) {
  if (bin_period_us == 0) throw ParameterError("bin period must be positive");
  CountSignal s;
  s.bin_period_us = bin_period_us;
  if (stream.empty()) return s;
  const std::uint64_t t0 = stream.events.front().t;
  s.counts.assign(frames::window_count(t0, stream.events.back().t, bin_period_us), 0.0);
  for (const auto& e : stream.events) {
    if (e.t < t0) throw OrderingError("stream is not time-ordered");
    s.counts[(e.t - t0) / bin_period_us] += 1.0;
  }
  return s;
}

BaselineResult baseline_hr(const CountSignal& signal, int filter_order, dsp::Band band) {
  const double fs = signal.fs();
  if (static_cast<double>(signal.counts.size()) < 10.0 * fs) {
    throw LengthError("count baseline needs at least 10 s of bins");
  }
  std::vector<double> x = signal.counts;
  const double m = dsp::mean(x);
  for (double& v : x) v -= m;
  const auto filtered = dsp::sos_filtfilt(dsp::butter_bandpass_design(filter_order, band, fs), x);
  BaselineResult r;
  r.estimate = post::estimate_hr_fft(filtered, fs, band);
  r.bins_per_second = fs;
  r.low_confidence = !(r.estimate.peak_to_median >= kConfidenceRatio);
  return r;
}

std::uint64_t period_for_rate(double bins_per_second) {
  if (!(bins_per_second > 0.0)) throw ParameterError("bin rate must be positive");
  return static_cast<std::uint64_t>(std::floor(1e6 / bins_per_second));
}

}  // namespace evpulse::baseline
