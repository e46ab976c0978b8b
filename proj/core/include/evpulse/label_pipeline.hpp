#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "evpulse/dsp.hpp"

namespace evpulse::labels {

/// Timestamped 1-D signal. Timestamps are microseconds, strictly increasing.
struct SignalTrace {
  std::vector<std::uint64_t> timestamps;
  std::vector<double> values;
  double fs = 1000.0;

  std::size_t size() const noexcept { return values.size(); }
};

/// Uniform trace starting at `t0_us`.
SignalTrace make_uniform(std::vector<double> values, double fs, std::uint64_t t0_us = 0);

/// One label per frame.
struct LabelSeries {
  std::vector<double> values;
  std::vector<std::uint64_t> frame_timestamps;

  std::size_t size() const noexcept { return values.size(); }
};

struct EcgOptions {
  int savgol_window = 101;
  int savgol_order = 2;
  int filter_order = 1;
  dsp::Band band = dsp::kHeartBand;
  double clip_fraction = 0.01;
};

SignalTrace invert(SignalTrace trace);
SignalTrace savgol_smooth(SignalTrace trace, int window_len = 101, int poly_order = 2);
SignalTrace butter_bandpass(SignalTrace trace, int order = 1, dsp::Band band = dsp::kHeartBand);
SignalTrace percentile_clip(SignalTrace trace, double frac = 0.01);

/// Nearest-sample lookup; ties go to the earlier sample, out-of-range frames
/// clamp to the end samples.
LabelSeries resample_to_frames(const SignalTrace& trace, std::span<const std::uint64_t> frame_timestamps);

/// First difference followed by population z-normalization. The value
/// label[j+1] - label[j] is stamped with frame j+1.
LabelSeries diff_normalize(const LabelSeries& labels);

/// invert -> smooth -> bandpass -> clip -> resample -> diff-normalize.
LabelSeries process_ecg(const SignalTrace& trace, std::span<const std::uint64_t> frame_timestamps,
                        const EcgOptions& options = {});

/// Reads `t,value` (microsecond timestamps) or `value` with `fs` supplied.
SignalTrace read_ecg_csv(const std::filesystem::path& path, std::optional<double> fs = std::nullopt);
void write_ecg_csv(const std::filesystem::path& path, const SignalTrace& trace);

/// `frame_index,timestamp,label`. `first_index` is the frame index of
/// values[0].
void write_labels_csv(const std::filesystem::path& path, const LabelSeries& labels, std::size_t first_index = 1);
LabelSeries read_labels_csv(const std::filesystem::path& path, std::size_t* first_index = nullptr);

}  // namespace evpulse::labels
