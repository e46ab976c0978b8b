#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace evpulse::dsp {

/// Second-order section, a0 normalized to 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

using Sos = std::vector<Biquad>;

struct Band {
  double low_hz = 0.75;
  double high_hz = 2.5;
};

inline constexpr Band kHeartBand{0.75, 2.5};

/// Digital Butterworth bandpass via the bilinear transform with prewarped
/// edges. Order N yields N sections; passband gain is 1 at the center.
Sos butter_bandpass_design(int order, Band band, double fs);

/// Causal cascade filtering with zero initial state.
std::vector<double> sos_filter(const Sos& sos, std::span<const double> x);

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions.
std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x);

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double fs);

/// Smoothing weights for the centre sample of an odd-length window.
std::vector<double> savgol_coefficients(int window_len, int poly_order);

/// Least-squares polynomial smoothing. Edges take the boundary window's fit.
std::vector<double> savgol_filter(std::span<const double> x, int window_len, int poly_order);

/// Linear-interpolation quantile (order statistics at q * (n - 1)).
double quantile(std::span<const double> x, double q);

double mean(std::span<const double> x);
/// Population variance.
double variance(std::span<const double> x);

}  // namespace evpulse::dsp
