#include "evpulse/dsp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "evpulse/errors.hpp"

namespace evpulse::dsp {

namespace {

using cd = std::complex<double>;

struct State {
  double z1 = 0.0;
  double z2 = 0.0;
};

void run(const Sos& sos, std::vector<double>& x, std::vector<State> state) {
  for (double& v : x) {
    double s = v;
    for (std::size_t k = 0; k < sos.size(); ++k) {
      const auto& q = sos[k];
      auto& z = state[k];
      const double y = q.b[0] * s + z.z1;
      z.z1 = q.b[1] * s - q.a[1] * y + z.z2;
      z.z2 = q.b[2] * s - q.a[2] * y;
      s = y;
    }
    v = s;
  }
}

// Steady-state section states for a unit step at the cascade input.
std::vector<State> step_state(const Sos& sos) {
  std::vector<State> zi(sos.size());
  double scale = 1.0;
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& q = sos[k];
    const double dc = (q.b[0] + q.b[1] + q.b[2]) / (q.a[0] + q.a[1] + q.a[2]);
    zi[k].z1 = scale * (dc - q.b[0]);
    zi[k].z2 = scale * (q.b[2] - q.a[2] * dc);
    scale *= dc;
  }
  return zi;
}

std::vector<State> scaled(std::vector<State> s, double f) {
  for (auto& z : s) {
    z.z1 *= f;
    z.z2 *= f;
  }
  return s;
}

}  // namespace

Sos butter_bandpass_design(int order, Band band, double fs) {
  if (order < 1) throw ParameterError("filter order must be >= 1");
  if (!(fs > 0.0)) throw ParameterError("sampling rate must be positive");
  if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < fs / 2.0)) {
    throw ParameterError("band edges must satisfy 0 < low < high < fs/2");
  }
  const double pi = std::numbers::pi;
  const double w_lo = 2.0 * fs * std::tan(pi * band.low_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(pi * band.high_hz / fs);
  const double bw = w_hi - w_lo;
  const double w0sq = w_lo * w_hi;

  std::vector<cd> poles;
  for (int k = 0; k < order; ++k) {
    const cd proto = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
    const cd pb = proto * bw;
    const cd disc = std::sqrt(pb * pb - 4.0 * w0sq);
    for (const cd s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
      poles.push_back((2.0 * fs + s) / (2.0 * fs - s));
    }
  }

  // Pair conjugates; leftover real poles are paired in sorted order.
  constexpr double eps = 1e-12;
  std::vector<cd> upper;
  std::vector<double> reals;
  for (const cd& p : poles) {
    if (std::abs(p.imag()) <= eps) {
      reals.push_back(p.real());
    } else if (p.imag() > 0.0) {
      upper.push_back(p);
    }
  }
  std::sort(reals.begin(), reals.end());
  Sos sos;
  for (const cd& p : upper) sos.push_back({{1.0, 0.0, -1.0}, {1.0, -2.0 * p.real(), std::norm(p)}});
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    sos.push_back({{1.0, 0.0, -1.0}, {1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]}});
  }
  if (static_cast<int>(sos.size()) != order) throw ParameterError("unexpected pole layout in bandpass design");

  const double center = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs)) * fs / (2.0 * pi);
  const double g = 1.0 / std::abs(frequency_response(sos, center, fs));
  for (double& b : sos.front().b) b *= g;
  return sos;
}

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double fs) {
  const cd zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  cd h = 1.0;
  for (const auto& q : sos) {
    h *= (q.b[0] + q.b[1] * zinv + q.b[2] * zinv * zinv) / (q.a[0] + q.a[1] * zinv + q.a[2] * zinv * zinv);
  }
  return h;
}

std::vector<double> sos_filter(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run(sos, y, std::vector<State>(sos.size()));
  return y;
}

std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::size_t pad = 3 * (2 * sos.size() + 1);
  pad = std::min(pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = step_state(sos);
  run(sos, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run(sos, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

namespace {

// Rows map window samples to fitted values at each requested offset.
Eigen::MatrixXd savgol_projection(int window_len, int poly_order, const std::vector<double>& eval_at) {
  const int half = window_len / 2;
  Eigen::MatrixXd a(window_len, poly_order + 1);
  for (int i = 0; i < window_len; ++i) {
    const double t = static_cast<double>(i - half) / std::max(half, 1);
    double v = 1.0;
    for (int k = 0; k <= poly_order; ++k, v *= t) a(i, k) = v;
  }
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::MatrixXd e(static_cast<Eigen::Index>(eval_at.size()), poly_order + 1);
  for (std::size_t r = 0; r < eval_at.size(); ++r) {
    const double t = eval_at[r] / std::max(half, 1);
    double v = 1.0;
    for (int k = 0; k <= poly_order; ++k, v *= t) e(static_cast<Eigen::Index>(r), k) = v;
  }
  return e * pinv;
}

void check_savgol(int window_len, int poly_order) {
  if (window_len < 1 || window_len % 2 == 0) throw ParameterError("Savitzky-Golay window must be odd");
  if (poly_order < 0 || poly_order >= window_len) throw ParameterError("polynomial order must be < window length");
}

}  // namespace

std::vector<double> savgol_coefficients(int window_len, int poly_order) {
  check_savgol(window_len, poly_order);
  const Eigen::MatrixXd p = savgol_projection(window_len, poly_order, {0.0});
  return {p.data(), p.data() + window_len};
}

std::vector<double> savgol_filter(std::span<const double> x, int window_len, int poly_order) {
  check_savgol(window_len, poly_order);
  const std::size_t n = x.size();
  const auto w = static_cast<std::size_t>(window_len);
  if (n < w) throw LengthError("trace shorter than the Savitzky-Golay window");
  const std::size_t half = w / 2;

  const auto c = savgol_coefficients(window_len, poly_order);
  std::vector<double> y(n);
  for (std::size_t i = half; i + half < n; ++i) {
    double acc = 0.0;
    const double* src = x.data() + (i - half);
    for (std::size_t j = 0; j < w; ++j) acc += c[j] * src[j];
    y[i] = acc;
  }

  std::vector<double> offsets(half);
  for (std::size_t i = 0; i < half; ++i) offsets[i] = static_cast<double>(i) - static_cast<double>(half);
  const Eigen::MatrixXd head = savgol_projection(window_len, poly_order, offsets);
  for (std::size_t i = 0; i < half; ++i) offsets[i] = static_cast<double>(i + 1);
  const Eigen::MatrixXd tail = savgol_projection(window_len, poly_order, offsets);
  const Eigen::Map<const Eigen::VectorXd> first(x.data(), window_len);
  const Eigen::Map<const Eigen::VectorXd> last(x.data() + (n - w), window_len);
  const Eigen::VectorXd yh = head * first;
  const Eigen::VectorXd yt = tail * last;
  for (std::size_t i = 0; i < half; ++i) {
    y[i] = yh(static_cast<Eigen::Index>(i));
    y[n - half + i] = yt(static_cast<Eigen::Index>(i));
  }
  return y;
}

double quantile(std::span<const double> x, double q) {
  if (x.empty()) throw LengthError("quantile of an empty sequence");
  if (q < 0.0 || q > 1.0) throw ParameterError("quantile level must lie in [0, 1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + (s[hi] - s[lo]) * frac;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw LengthError("mean of an empty sequence");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size());
}

}  // namespace evpulse::dsp
