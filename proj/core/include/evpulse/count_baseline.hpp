#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evpulse/event_io.hpp"
#include "evpulse/pulse_post.hpp"

namespace evpulse::baseline {

/// Events per bin on the same half-open grid as frame windows.
struct CountSignal {
  std::uint64_t bin_period_us = 10000;
  std::vector<double> counts;

  double fs() const { return 1e6 / static_cast<double>(bin_period_us); }
};

struct BaselineResult {
  post::HrEstimate estimate;
  double bins_per_second = 0.0;
  bool low_confidence = false;
};

/// Peak-to-median ratio below which an estimate is flagged.
inline constexpr double kConfidenceRatio = 3.0;

CountSignal event_count_signal(const io::EventStream& stream, std::uint64_t bin_period_us);

/// Mean removal, zero-phase Butterworth bandpass, periodogram peak.
BaselineResult baseline_hr(const CountSignal& signal, int filter_order = 1, dsp::Band band = dsp::kHeartBand);

/// Bin period for a bins-per-second rate (rounded down to whole microseconds,
/// so 30 -> 33333, 60 -> 16666, 120 -> 8333).
std::uint64_t period_for_rate(double bins_per_second);

}  // namespace evpulse::baseline
