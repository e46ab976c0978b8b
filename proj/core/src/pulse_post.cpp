#include "evpulse/pulse_post.hpp"

#include <fftw3.h>

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "evpulse/errors.hpp"

namespace evpulse::post {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// |X_k|^2 for k in [0, nfft/2] of the zero-padded input.
std::vector<double> power_spectrum(std::span<const double> x, std::size_t nfft) {
  std::vector<double> in(nfft, 0.0);
  std::copy(x.begin(), x.end(), in.begin());
  std::vector<std::complex<double>> out(nfft / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> p(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) p[k] = std::norm(out[k]);
  return p;
}

std::vector<double> demeaned(std::span<const double> x) {
  const double m = dsp::mean(x);
  std::vector<double> v(x.begin(), x.end());
  for (double& e : v) e -= m;
  return v;
}

std::pair<std::size_t, std::size_t> band_bins(std::size_t nfft, double fs, dsp::Band band) {
  const double df = fs / static_cast<double>(nfft);
  auto lo = static_cast<std::size_t>(std::ceil(band.low_hz / df - 1e-9));
  auto hi = static_cast<std::size_t>(std::floor(band.high_hz / df + 1e-9));
  hi = std::min(hi, nfft / 2);
  if (lo > hi) throw ParameterError("band contains no frequency bins");
  return {lo, hi};
}

// Averaged Hann-windowed spectrum over 10 s half-overlapping segments; the
// in-band peak-to-median ratio measures how distinct the peak is.
double welch_peak_ratio(std::span<const double> x, double fs, dsp::Band band) {
  const std::size_t n = x.size();
  const std::size_t seg = std::min(n, static_cast<std::size_t>(std::llround(10.0 * fs)));
  const std::size_t step = std::max<std::size_t>(1, seg / 2);
  const std::size_t nfft = next_pow2(4 * seg);
  std::vector<double> window(seg);
  for (std::size_t i = 0; i < seg; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
  }
  std::vector<double> acc(nfft / 2 + 1, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= n; start += step) {
    auto piece = demeaned(x.subspan(start, seg));
    for (std::size_t i = 0; i < seg; ++i) piece[i] *= window[i];
    const auto p = power_spectrum(piece, nfft);
    for (std::size_t k = 0; k < p.size(); ++k) acc[k] += p[k];
    ++count;
  }
  const auto [lo, hi] = band_bins(nfft, fs, band);
  std::vector<double> in_band(acc.begin() + static_cast<std::ptrdiff_t>(lo),
                              acc.begin() + static_cast<std::ptrdiff_t>(hi + 1));
  const double peak = *std::max_element(in_band.begin(), in_band.end());
  std::nth_element(in_band.begin(), in_band.begin() + static_cast<std::ptrdiff_t>(in_band.size() / 2), in_band.end());
  const double median = in_band[in_band.size() / 2];
  if (count == 0 || median <= 0.0) return peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return peak / median;
}

}  // namespace

HrReport make_report(std::string subject_id, double hr_true, double hr_pred) {
  return HrReport{std::move(subject_id), hr_true, hr_pred, hr_pred - hr_true};
}

std::vector<double> cumulative_sum(std::span<const double> pred) {
  std::vector<double> out(pred.size());
  std::partial_sum(pred.begin(), pred.end(), out.begin());
  return out;
}

std::vector<double> detrend(std::span<const double> x, double lambda) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n < 3) throw LengthError("detrending needs at least 3 samples");
  if (lambda < 0.0) throw ParameterError("detrending lambda must be non-negative");

  // I + lambda^2 D2'D2 is symmetric pentadiagonal.
  const double l2 = lambda * lambda;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(5 * n));
  for (Eigen::Index i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0);
  const double d[3] = {1.0, -2.0, 1.0};
  for (Eigen::Index r = 0; r + 2 < n; ++r) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) entries.emplace_back(r + a, r + b, l2 * d[a] * d[b]);
    }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> solver(m);
  if (solver.info() != Eigen::Success) throw Error("detrending factorization failed");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::VectorXd trend = solver.solve(xv);
  std::vector<double> out(x.size());
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = xv(i) - trend(i);
  return out;
}

HrEstimate estimate_hr_fft(std::span<const double> trace, double fs, dsp::Band band) {
  if (!(fs > 0.0)) throw ParameterError("sampling rate must be positive");
  if (trace.size() < static_cast<std::size_t>(std::llround(10.0 * fs))) {
    throw LengthError("heart-rate estimation needs at least 10 s of signal");
  }
  const std::size_t nfft = next_pow2(4 * trace.size());
  const auto p = power_spectrum(demeaned(trace), nfft);
  const auto [lo, hi] = band_bins(nfft, fs, band);
  std::size_t best = lo;
  for (std::size_t k = lo; k <= hi; ++k) {
    if (p[k] > p[best]) best = k;
  }
  HrEstimate est;
  est.fft_size = nfft;
  est.peak_hz = static_cast<double>(best) * fs / static_cast<double>(nfft);
  est.bpm = 60.0 * est.peak_hz;
  est.resolution_bpm = 60.0 * fs / static_cast<double>(nfft);
  est.peak_to_median = welch_peak_ratio(trace, fs, band);
  return est;
}

std::vector<HrEstimate> estimate_hr_segments(std::span<const double> trace, double fs, double segment_seconds,
                                             dsp::Band band) {
  const auto seg = static_cast<std::size_t>(std::llround(segment_seconds * fs));
  if (segment_seconds <= 0.0 || seg >= trace.size()) return {estimate_hr_fft(trace, fs, band)};
  std::vector<HrEstimate> out;
  for (std::size_t start = 0; start + seg <= trace.size(); start += seg) {
    out.push_back(estimate_hr_fft(trace.subspan(start, seg), fs, band));
  }
  return out;
}

double periodogram_power(std::span<const double> trace, double fs, double freq_hz) {
  const auto x = demeaned(trace);
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs);
  }
  return std::norm(acc);
}

std::vector<double> postprocess(std::span<const double> pred, double fs, const PostOptions& options) {
  const auto summed = cumulative_sum(pred);
  const auto flat = detrend(summed, options.detrend_lambda);
  const auto sos = dsp::butter_bandpass_design(options.filter_order, options.band, fs);
  return dsp::sos_filtfilt(sos, flat);
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LengthError("correlation inputs differ in length");
  if (a.size() < 2) throw DegenerateSignalError("correlation needs at least two pairs");
  const double ma = dsp::mean(a);
  const double mb = dsp::mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DegenerateSignalError("correlation undefined for a zero-variance side");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricSummary summarize(std::span<const HrReport> reports) {
  if (reports.empty()) throw LengthError("no reports to summarize");
  MetricSummary m;
  double se = 0.0;
  for (const auto& r : reports) {
    if (!(r.hr_true > 0.0)) throw DomainError("true heart rate must be positive");
    const double d = r.hr_pred - r.hr_true;
    m.mae += std::abs(d);
    se += d * d;
    m.mape += std::abs(d) / r.hr_true;
  }
  const auto n = static_cast<double>(reports.size());
  m.mae /= n;
  m.rmse = std::sqrt(se / n);
  m.mape = m.mape / n * 100.0;
  std::vector<double> t, p;
  for (const auto& r : reports) {
    t.push_back(r.hr_true);
    p.push_back(r.hr_pred);
  }
  try {
    m.pearson = pearson_correlation(t, p);
  } catch (const DegenerateSignalError&) {
    m.pearson.reset();
  }
  return m;
}

MetricSet compute_metrics(std::span<const HrReport> reports) {
  const MetricSummary s = summarize(reports);
  if (!s.pearson) throw DegenerateSignalError("Pearson correlation is undefined for these reports");
  return MetricSet{s.mae, s.rmse, s.mape, *s.pearson};
}

void write_reports_csv(const std::filesystem::path& path, std::span<const HrReport> reports) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report file " + path.string());
  out << "subject_id,hr_true,hr_pred,d_hr\n" << std::setprecision(10);
  for (const auto& r : reports) out << r.subject_id << ',' << r.hr_true << ',' << r.hr_pred << ',' << r.d_hr << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<HrReport> read_reports_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report file " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("subject_id,hr_true,hr_pred,d_hr", 0) != 0) throw ParseError(1, "unexpected report header");
  std::vector<HrReport> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, a, b;
    std::getline(ss, id, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    try {
      out.push_back(make_report(id, std::stod(a), std::stod(b)));
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "malformed report row");
    }
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricSummary& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metrics file " + path.string());
  out << "metric,value\n" << std::setprecision(10);
  out << "mae," << m.mae << '\n' << "rmse," << m.rmse << '\n' << "mape," << m.mape << '\n';
  out << "pearson,";
  if (m.pearson) {
    out << *m.pearson << '\n';
  } else {
    out << "NA\n";
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_waveform_svg(const std::filesystem::path& path, std::span<const double> predicted,
                        std::span<const double> reference, double fs, double start_s, double span_s) {
  constexpr double kW = 900.0, kH = 260.0, kPad = 20.0;
  const auto first = static_cast<std::size_t>(std::max(0.0, start_s * fs));
  const auto count = static_cast<std::size_t>(std::max(1.0, span_s * fs));

  auto polyline = [&](std::span<const double> s, const char* colour) {
    std::ostringstream pts;
    const std::size_t end = std::min(s.size(), first + count);
    if (first >= end) return std::string();
    double peak = 0.0;
    for (std::size_t i = first; i < end; ++i) peak = std::max(peak, std::abs(s[i]));
    if (peak == 0.0) peak = 1.0;
    pts << std::fixed << std::setprecision(2);
    for (std::size_t i = first; i < end; ++i) {
      const double x = kPad + (kW - 2 * kPad) * static_cast<double>(i - first) / static_cast<double>(count);
      const double y = kH / 2 - (kH / 2 - kPad) * s[i] / peak;
      pts << x << ',' << y << ' ';
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" + pts.str() +
           "\"/>\n";
  };

  std::ofstream out(path);
  if (!out) throw Error("cannot write plot " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << polyline(reference, "#1f77b4") << polyline(predicted, "#d62728");
  out << "<text x=\"" << kPad << "\" y=\"14\" font-size=\"12\" font-family=\"sans-serif\">"
      << "reference (blue) vs predicted (red), " << start_s << "-" << start_s + span_s << " s</text>\n";
  out << "</svg>\n";
}

}  // namespace evpulse::post
