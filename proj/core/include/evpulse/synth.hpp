#pragma once

#include <cstdint>

#include "evpulse/count_baseline.hpp"
#include "evpulse/event_io.hpp"
#include "evpulse/label_pipeline.hpp"

namespace evpulse::synth {

struct Region {
  std::uint16_t x = 16;
  std::uint16_t y = 16;
  std::uint16_t width = 32;
  std::uint16_t height = 32;
};

struct SynthConfig {
  std::uint16_t width = 64;
  std::uint16_t height = 64;
  double duration_s = 60.0;
  double hr_hz = 1.2;
  /// Peak log-intensity modulation of a skin pixel.
  double pulse_amplitude = 0.5;
  /// Per-pixel amplitude varies uniformly within +/- this fraction.
  double amplitude_jitter = 0.2;
  double contrast_threshold = 0.1;
  Region skin;
  /// Background events per pixel per second.
  double noise_rate = 0.5;
  /// Standard deviation of additive ECG noise (R-wave amplitude is 1).
  double ecg_noise = 0.02;
  std::uint64_t seed = 1;
};

inline constexpr double kClockHz = 1000.0;
inline constexpr double kMinHrHz = 0.75;
inline constexpr double kMaxHrHz = 2.5;

struct SynthTruth {
  SynthConfig config;
  /// Raw (0/1) polarities, as a sensor would emit them.
  io::EventStream stream;
  labels::SignalTrace ecg;
  double hr_true_bpm = 0.0;
};

void validate(const SynthConfig& config);

/// Normalized pulse waveform: sin(2 pi f t) + 0.3 sin(4 pi f t).
double pulse_waveform(double hr_hz, double t_s);

/// Sum-of-Gaussians PQRST beat train. R peaks sit at (k + 0.75) / f so the
/// processed label is in phase with the pulse derivative.
double ecg_waveform(double hr_hz, double t_s);

/// Contrast-threshold event simulation of the skin region on a 1 kHz clock,
/// plus homogeneous background noise and a matching 1 kHz ECG.
SynthTruth generate(const SynthConfig& config);

struct RateModulatedConfig {
  std::uint16_t width = 64;
  std::uint16_t height = 64;
  double duration_s = 60.0;
  double hr_hz = 1.2;
  /// Mean total event rate, events per second.
  double base_rate = 20000.0;
  /// Relative modulation depth of the rate (1 = full).
  double depth = 0.5;
  std::uint64_t seed = 1;
};

/// Inhomogeneous Poisson stream with rate base * (1 + depth sin(2 pi f t)).
io::EventStream generate_rate_modulated(const RateModulatedConfig& config);

enum class Route {
  kCountBaseline,
  /// Polarity-signed mean of accumulated frames over the skin region.
  kFrameMean,
};

struct RecoveryOptions {
  double bins_per_second = 100.0;
  std::uint64_t frame_period_us = 33333;
};

struct Recovery {
  double hr_estimated = 0.0;
  double error_bpm = 0.0;
  bool low_confidence = false;
  double peak_to_median = 0.0;
};

Recovery verify_recoverable(const SynthTruth& truth, Route route, const RecoveryOptions& options = {});

}  // namespace evpulse::synth
