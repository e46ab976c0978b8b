#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evpulse/dsp.hpp"

namespace evpulse::post {

struct HrEstimate {
  double bpm = 0.0;
  double peak_hz = 0.0;
  /// Bin spacing of the zero-padded periodogram, in bpm.
  double resolution_bpm = 0.0;
  /// Peak over median of the in-band averaged (Welch) spectrum.
  double peak_to_median = 0.0;
  std::size_t fft_size = 0;
};

struct HrReport {
  std::string subject_id;
  double hr_true = 0.0;
  double hr_pred = 0.0;
  double d_hr = 0.0;  // hr_pred - hr_true
};

HrReport make_report(std::string subject_id, double hr_true, double hr_pred);

struct MetricSet {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
  double pearson = 0.0;
};

/// Metrics where the correlation may be undefined (fewer than two reports
/// or a zero-variance side).
struct MetricSummary {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  std::optional<double> pearson;
};

struct PostOptions {
  double detrend_lambda = 100.0;
  int filter_order = 1;
  dsp::Band band = dsp::kHeartBand;
};

std::vector<double> cumulative_sum(std::span<const double> pred);

/// Smoothness-priors detrending: x - (I + lambda^2 D2'D2)^-1 x.
std::vector<double> detrend(std::span<const double> x, double lambda = 100.0);

/// Band-restricted periodogram peak. Needs at least ten seconds of signal.
HrEstimate estimate_hr_fft(std::span<const double> trace, double fs, dsp::Band band = dsp::kHeartBand);

/// Non-overlapping segment estimates; a segment of 0 (or longer than the
/// trace) means one estimate over the whole trace.
std::vector<HrEstimate> estimate_hr_segments(std::span<const double> trace, double fs, double segment_seconds,
                                             dsp::Band band = dsp::kHeartBand);

/// Periodogram power of the mean-removed trace at an arbitrary frequency.
double periodogram_power(std::span<const double> trace, double fs, double freq_hz);

/// cumulative sum -> detrend -> zero-phase Butterworth bandpass.
std::vector<double> postprocess(std::span<const double> pred, double fs, const PostOptions& options = {});

double pearson_correlation(std::span<const double> a, std::span<const double> b);

/// Throws DegenerateSignalError when the correlation is undefined.
MetricSet compute_metrics(std::span<const HrReport> reports);
MetricSummary summarize(std::span<const HrReport> reports);

void write_reports_csv(const std::filesystem::path& path, std::span<const HrReport> reports);
std::vector<HrReport> read_reports_csv(const std::filesystem::path& path);
/// `metric,value` rows; an undefined correlation is written as `NA`.
void write_metrics_csv(const std::filesystem::path& path, const MetricSummary& metrics);

/// Overlaid predicted and reference waveforms over [start_s, start_s + span_s).
void write_waveform_svg(const std::filesystem::path& path, std::span<const double> predicted,
                        std::span<const double> reference, double fs, double start_s, double span_s);

}  // namespace evpulse::post
