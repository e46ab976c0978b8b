#include "evpulse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "evpulse/errors.hpp"
#include "evpulse/frame_gen.hpp"

namespace evpulse::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kStepUs = 1000;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream_id) {
  return std::mt19937_64(mix(mix(seed) ^ mix(stream_id + 0x5157ull)));
}

bool event_less(const io::Event& a, const io::Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

struct Wave {
  double offset;  // beat fraction relative to the R peak
  double amplitude;
  double width;  // beat fraction
};

constexpr Wave kBeat[] = {
    {-0.20, 0.15, 0.025}, {-0.03, -0.15, 0.010}, {0.00, 1.00, 0.012}, {0.03, -0.30, 0.012}, {0.30, 0.30, 0.050},
};

// Pixels draw their amplitude and their initial reference offset from
// per-pixel generators; background noise uses its own generator.
constexpr std::uint64_t kNoiseStream = ~0ull;
constexpr std::uint64_t kEcgStream = ~0ull - 1;

}  // namespace

void validate(const SynthConfig& c) {
  if (c.width == 0 || c.height == 0) throw ParameterError("sensor size must be positive");
  if (!(c.duration_s > 0.0)) throw ParameterError("duration must be positive");
  if (!(c.hr_hz >= kMinHrHz && c.hr_hz <= kMaxHrHz)) {
    throw ParameterError("heart rate must lie in the 0.75-2.5 Hz (45-150 bpm) band");
  }
  if (!(c.contrast_threshold > 0.0)) throw ParameterError("contrast threshold must be positive");
  if (c.pulse_amplitude < 0.0) throw ParameterError("pulse amplitude must be non-negative");
  if (c.amplitude_jitter < 0.0 || c.amplitude_jitter >= 1.0) throw ParameterError("amplitude jitter must lie in [0, 1)");
  if (c.noise_rate < 0.0) throw ParameterError("noise rate must be non-negative");
  if (c.skin.x + c.skin.width > c.width || c.skin.y + c.skin.height > c.height) {
    throw ParameterError("skin region exceeds the sensor");
  }
}

double pulse_waveform(double hr_hz, double t_s) {
  const double ph = kTwoPi * hr_hz * t_s;
  return std::sin(ph) + 0.3 * std::sin(2.0 * ph);
}

double ecg_waveform(double hr_hz, double t_s) {
  // R peaks at (k + 0.75) / f, where the waveform derivative crosses zero
  // going down, so the inverted, band-limited ECG tracks the frame signal.
  const double beats = hr_hz * t_s - 0.75;
  const double k = std::round(beats);
  double v = 0.0;
  for (double nb = k - 1.0; nb <= k + 1.0; nb += 1.0) {
    const double u = beats - nb;
    for (const auto& w : kBeat) {
      const double d = (u - w.offset) / w.width;
      v += w.amplitude * std::exp(-0.5 * d * d);
    }
  }
  return v;
}

SynthTruth generate(const SynthConfig& config) {
  validate(config);
  SynthTruth truth;
  truth.config = config;
  truth.hr_true_bpm = 60.0 * config.hr_hz;
  truth.stream.width = config.width;
  truth.stream.height = config.height;

  const auto steps = static_cast<std::size_t>(std::llround(config.duration_s * kClockHz));
  const std::size_t skin_px = static_cast<std::size_t>(config.skin.width) * config.skin.height;
  const double c = config.contrast_threshold;

  std::vector<double> gain(skin_px), ref(skin_px), level(skin_px);
  for (std::size_t i = 0; i < skin_px; ++i) {
    const std::uint16_t px = static_cast<std::uint16_t>(config.skin.x + i % config.skin.width);
    const std::uint16_t py = static_cast<std::uint16_t>(config.skin.y + i / config.skin.width);
    auto rng = substream(config.seed, static_cast<std::uint64_t>(py) * config.width + px);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    gain[i] = config.pulse_amplitude * (1.0 + config.amplitude_jitter * u(rng));
    level[i] = 0.0;
    ref[i] = 0.5 * c * u(rng);
  }

  auto noise_rng = substream(config.seed, kNoiseStream);
  const double noise_per_step = config.noise_rate * config.width * config.height / kClockHz;
  std::poisson_distribution<int> noise_count(noise_per_step > 0.0 ? noise_per_step : 1.0);
  std::uniform_int_distribution<int> nx(0, config.width - 1), ny(0, config.height - 1), offset(0, kStepUs - 1),
      npol(0, 1);

  std::vector<io::Event> step_events;
  for (std::size_t k = 1; k <= steps; ++k) {
    step_events.clear();
    const std::uint64_t t_prev = (k - 1) * kStepUs;
    const double w = pulse_waveform(config.hr_hz, static_cast<double>(k) / kClockHz);
    for (std::size_t i = 0; i < skin_px; ++i) {
      const double prev = level[i];
      const double now = gain[i] * w;
      level[i] = now;
      const double delta = now - prev;
      if (delta == 0.0) continue;
      const auto px = static_cast<std::uint16_t>(config.skin.x + i % config.skin.width);
      const auto py = static_cast<std::uint16_t>(config.skin.y + i / config.skin.width);
      while (std::abs(now - ref[i]) >= c) {
        const double sign = now > ref[i] ? 1.0 : -1.0;
        const double target = ref[i] + sign * c;
        // Linear interpolation of the crossing inside the clock step.
        double frac = (target - prev) / delta;
        frac = std::clamp(frac, 0.0, 1.0);
        const auto dt = std::min<std::uint64_t>(kStepUs, static_cast<std::uint64_t>(std::llround(frac * kStepUs)));
        step_events.push_back({t_prev + dt, px, py, static_cast<std::int8_t>(sign > 0 ? 1 : 0)});
        ref[i] = target;
      }
    }
    if (noise_per_step > 0.0) {
      const int n = noise_count(noise_rng);
      for (int j = 0; j < n; ++j) {
        io::Event e;
        e.x = static_cast<std::uint16_t>(nx(noise_rng));
        e.y = static_cast<std::uint16_t>(ny(noise_rng));
        e.t = t_prev + static_cast<std::uint64_t>(offset(noise_rng));
        e.p = static_cast<std::int8_t>(npol(noise_rng));
        step_events.push_back(e);
      }
    }
    std::stable_sort(step_events.begin(), step_events.end(), event_less);
    truth.stream.events.insert(truth.stream.events.end(), step_events.begin(), step_events.end());
  }

  auto ecg_rng = substream(config.seed, kEcgStream);
  std::normal_distribution<double> ecg_noise(0.0, 1.0);
  std::vector<double> ecg(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    ecg[k] = ecg_waveform(config.hr_hz, static_cast<double>(k) / kClockHz) + config.ecg_noise * ecg_noise(ecg_rng);
  }
  truth.ecg = labels::make_uniform(std::move(ecg), kClockHz);
  return truth;
}

io::EventStream generate_rate_modulated(const RateModulatedConfig& c) {
  if (c.width == 0 || c.height == 0 || !(c.duration_s > 0.0) || !(c.base_rate > 0.0)) {
    throw ParameterError("invalid rate-modulated stream parameters");
  }
  if (c.depth < 0.0 || c.depth > 1.0) throw ParameterError("modulation depth must lie in [0, 1]");
  io::EventStream s{{}, c.width, c.height};
  auto rng = substream(c.seed, kNoiseStream);
  std::uniform_int_distribution<int> nx(0, c.width - 1), ny(0, c.height - 1), offset(0, kStepUs - 1), npol(0, 1);
  const auto steps = static_cast<std::size_t>(std::llround(c.duration_s * kClockHz));
  std::vector<io::Event> step_events;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / kClockHz;
    const double rate = c.base_rate * (1.0 + c.depth * std::sin(kTwoPi * c.hr_hz * t));
    std::poisson_distribution<int> count(std::max(rate, 1e-12) / kClockHz);
    const int n = count(rng);
    step_events.clear();
    for (int j = 0; j < n; ++j) {
      io::Event e;
      e.x = static_cast<std::uint16_t>(nx(rng));
      e.y = static_cast<std::uint16_t>(ny(rng));
      e.t = k * kStepUs + static_cast<std::uint64_t>(offset(rng));
      e.p = static_cast<std::int8_t>(npol(rng));
      step_events.push_back(e);
    }
    std::stable_sort(step_events.begin(), step_events.end(), event_less);
    s.events.insert(s.events.end(), step_events.begin(), step_events.end());
  }
  return s;
}

Recovery verify_recoverable(const SynthTruth& truth, Route route, const RecoveryOptions& options) {
  Recovery r;
  post::HrEstimate est;
  if (route == Route::kCountBaseline) {
    const auto counts = baseline::event_count_signal(truth.stream, baseline::period_for_rate(options.bins_per_second));
    const auto res = baseline::baseline_hr(counts);
    est = res.estimate;
    r.low_confidence = res.low_confidence;
  } else {
    frames::FrameParams params;
    params.period_us = options.frame_period_us;
    const auto accum = frames::generate_accum_frames(io::map_polarity(truth.stream), params);
    const auto& sk = truth.config.skin;
    auto signal = frames::region_mean(accum, sk.x, sk.y, sk.width, sk.height);
    const double fs = frames::frame_rate(options.frame_period_us);
    const double m = dsp::mean(signal);
    for (double& v : signal) v -= m;
    const auto filtered = dsp::sos_filtfilt(dsp::butter_bandpass_design(1, dsp::kHeartBand, fs), signal);
    est = post::estimate_hr_fft(filtered, fs);
    r.low_confidence = !(est.peak_to_median >= baseline::kConfidenceRatio);
  }
  r.hr_estimated = est.bpm;
  r.peak_to_median = est.peak_to_median;
  r.error_bpm = std::abs(est.bpm - truth.hr_true_bpm);
  return r;
}

}  // namespace evpulse::synth
