#include "evpulse/label_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "evpulse/errors.hpp"

namespace evpulse::labels {

SignalTrace make_uniform(std::vector<double> values, double fs, std::uint64_t t0_us) {
  if (!(fs > 0.0)) throw ParameterError("sampling rate must be positive");
  SignalTrace t;
  t.fs = fs;
  t.timestamps.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.timestamps[i] = t0_us + static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * 1e6 / fs));
  }
  t.values = std::move(values);
  return t;
}

SignalTrace invert(SignalTrace trace) {
  for (double& v : trace.values) v = -v;
  return trace;
}

SignalTrace savgol_smooth(SignalTrace trace, int window_len, int poly_order) {
  trace.values = dsp::savgol_filter(trace.values, window_len, poly_order);
  return trace;
}

SignalTrace butter_bandpass(SignalTrace trace, int order, dsp::Band band) {
  const auto sos = dsp::butter_bandpass_design(order, band, trace.fs);
  trace.values = dsp::sos_filtfilt(sos, trace.values);
  return trace;
}

SignalTrace percentile_clip(SignalTrace trace, double frac) {
  if (!(frac >= 0.0 && frac < 0.5)) throw ParameterError("clip fraction must lie in [0, 0.5)");
  if (frac == 0.0 || trace.values.empty()) return trace;
  const double lo = dsp::quantile(trace.values, frac);
  const double hi = dsp::quantile(trace.values, 1.0 - frac);
  for (double& v : trace.values) v = std::clamp(v, lo, hi);
  return trace;
}

LabelSeries resample_to_frames(const SignalTrace& trace, std::span<const std::uint64_t> frame_timestamps) {
  if (trace.values.empty()) throw LengthError("cannot resample an empty trace");
  if (trace.timestamps.size() != trace.values.size()) throw LengthError("trace timestamps and values differ in length");
  LabelSeries out;
  out.frame_timestamps.assign(frame_timestamps.begin(), frame_timestamps.end());
  out.values.reserve(frame_timestamps.size());
  const auto& ts = trace.timestamps;
  for (const auto t : frame_timestamps) {
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t idx;
    if (it == ts.begin()) {
      idx = 0;
    } else if (it == ts.end()) {
      idx = ts.size() - 1;
    } else {
      const auto hi = static_cast<std::size_t>(it - ts.begin());
      const std::size_t lo = hi - 1;
      idx = (t - ts[lo] <= ts[hi] - t) ? lo : hi;
    }
    out.values.push_back(trace.values[idx]);
  }
  return out;
}

LabelSeries diff_normalize(const LabelSeries& labels) {
  if (labels.size() < 3) throw LengthError("diff-normalization needs at least 3 labels");
  LabelSeries out;
  const std::size_t n = labels.size() - 1;
  out.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.values[j] = labels.values[j + 1] - labels.values[j];
  if (labels.frame_timestamps.size() == labels.size()) {
    out.frame_timestamps.assign(labels.frame_timestamps.begin() + 1, labels.frame_timestamps.end());
  }
  const double m = dsp::mean(out.values);
  const double sd = std::sqrt(dsp::variance(out.values));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) throw DegenerateSignalError("label differences have zero variance");
  for (double& v : out.values) v = (v - m) / sd;
  return out;
}

LabelSeries process_ecg(const SignalTrace& trace, std::span<const std::uint64_t> frame_timestamps,
                        const EcgOptions& options) {
  SignalTrace t = invert(trace);
  t = savgol_smooth(std::move(t), options.savgol_window, options.savgol_order);
  t = butter_bandpass(std::move(t), options.filter_order, options.band);
  t = percentile_clip(std::move(t), options.clip_fraction);
  return diff_normalize(resample_to_frames(t, frame_timestamps));
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError(line, "trailing characters in `" + s + "`");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(line, "not a number: `" + s + "`");
  }
}

std::uint64_t to_u64(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size() || s.front() == '-') throw ParseError(line, "bad timestamp `" + s + "`");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(line, "bad timestamp `" + s + "`");
  }
}

std::string chomp(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

SignalTrace read_ecg_csv(const std::filesystem::path& path, std::optional<double> fs) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ECG file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  line = chomp(line);
  SignalTrace trace;
  std::size_t lineno = 1;
  if (line == "t,value") {
    while (std::getline(in, line)) {
      ++lineno;
      line = chomp(line);
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != 2) throw ParseError(lineno, "expected `t,value`");
      const auto t = to_u64(f[0], lineno);
      if (!trace.timestamps.empty() && t <= trace.timestamps.back()) {
        throw OrderingError("line " + std::to_string(lineno) + ": ECG timestamps must strictly increase");
      }
      trace.timestamps.push_back(t);
      trace.values.push_back(to_double(f[1], lineno));
    }
    if (fs) {
      trace.fs = *fs;
    } else if (trace.size() >= 2) {
      const double span = static_cast<double>(trace.timestamps.back() - trace.timestamps.front());
      trace.fs = std::round(1e6 * static_cast<double>(trace.size() - 1) / span * 1e6) / 1e6;
    }
    return trace;
  }
  if (line == "value") {
    if (!fs) throw ParameterError("uniform `value` ECG files need an explicit sampling rate");
    std::vector<double> v;
    while (std::getline(in, line)) {
      ++lineno;
      line = chomp(line);
      if (line.empty()) continue;
      v.push_back(to_double(line, lineno));
    }
    return make_uniform(std::move(v), *fs);
  }
  throw ParseError(1, "expected header `t,value` or `value`");
}

void write_ecg_csv(const std::filesystem::path& path, const SignalTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write ECG file " + path.string());
  out << "t,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) out << trace.timestamps[i] << ',' << trace.values[i] << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

void write_labels_csv(const std::filesystem::path& path, const LabelSeries& labels, std::size_t first_index) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write label file " + path.string());
  out << "frame_index,timestamp,label\n" << std::setprecision(17);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    out << (first_index + j) << ',' << (j < labels.frame_timestamps.size() ? labels.frame_timestamps[j] : 0) << ','
        << labels.values[j] << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

LabelSeries read_labels_csv(const std::filesystem::path& path, std::size_t* first_index) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path.string());
  std::string line;
  if (!std::getline(in, line) || chomp(line) != "frame_index,timestamp,label") {
    throw ParseError(1, "expected header `frame_index,timestamp,label`");
  }
  LabelSeries out;
  std::size_t lineno = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    line = chomp(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw ParseError(lineno, "expected 3 fields");
    const auto idx = to_u64(f[0], lineno);
    if (first && first_index) *first_index = static_cast<std::size_t>(idx);
    first = false;
    out.frame_timestamps.push_back(to_u64(f[1], lineno));
    out.values.push_back(to_double(f[2], lineno));
  }
  return out;
}

}  // namespace evpulse::labels
