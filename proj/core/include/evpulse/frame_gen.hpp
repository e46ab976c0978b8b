#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "evpulse/event_io.hpp"

namespace evpulse::frames {

using io::Event;
using io::EventStream;

/// Half-open window [t_start, t_end). `index` is 1-based.
struct EventWindow {
  std::size_t index = 1;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  std::vector<Event> events;
};

/// Signed per-pixel polarity sums for one window, row-major.
struct AccumFrame {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::int32_t> pixels;
  std::uint64_t timestamp = 0;

  std::int32_t at(std::size_t x, std::size_t y) const { return pixels[x + y * width]; }
};

/// Quantized model input. Zero accumulation maps to code 128.
struct EventFrame {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> pixels;
  std::uint64_t timestamp = 0;

  friend bool operator==(const EventFrame&, const EventFrame&) = default;
};

struct FrameSet {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<EventFrame> frames;

  friend bool operator==(const FrameSet&, const FrameSet&) = default;
};

struct FrameParams {
  std::uint64_t period_us = 33333;
  std::optional<io::CropBox> crop;
  unsigned downsample = 1;
};

inline constexpr std::int32_t kClipLevel = 8;
inline constexpr std::uint64_t kPeriod30Fps = 33333;
inline constexpr std::uint64_t kPeriod60Fps = 16666;
inline constexpr std::uint64_t kPeriod120Fps = 8333;

/// Frames per second for a window period.
inline double frame_rate(std::uint64_t period_us) { return 1e6 / static_cast<double>(period_us); }

/// Number of windows on the grid anchored at `t_first`.
std::size_t window_count(std::uint64_t t_first, std::uint64_t t_last, std::uint64_t period_us);

std::vector<EventWindow> window_events(const EventStream& stream, std::uint64_t period_us);
/// Integer-divides coordinates. Events landing in the partial trailing
/// block (x >= (src_width / factor) * factor) are dropped.
EventWindow downsample_events(EventWindow window, unsigned factor, std::uint16_t src_width,
                              std::uint16_t src_height);
AccumFrame accumulate_frame(const EventWindow& window, std::uint16_t width, std::uint16_t height);
std::uint8_t quantize_value(std::int32_t accum);
EventFrame normalize_quantize(const AccumFrame& accum);

/// crop -> window -> downsample -> accumulate -> quantize. Expects mapped
/// (+/-1) polarities. Windows are split across `threads` workers; the
/// output does not depend on the thread count.
FrameSet generate_frames(const EventStream& stream, const FrameParams& params, unsigned threads = 1);

/// Signed accumulations without quantization, same grid as generate_frames.
std::vector<AccumFrame> generate_accum_frames(const EventStream& stream, const FrameParams& params);

/// Push-style generator holding one window in memory at a time.
class StreamingFrameGenerator {
 public:
  using Sink = std::function<void(const AccumFrame&)>;

  StreamingFrameGenerator(std::uint16_t sensor_width, std::uint16_t sensor_height, const FrameParams& params,
                          Sink sink);

  std::uint16_t frame_width() const noexcept { return out_w_; }
  std::uint16_t frame_height() const noexcept { return out_h_; }

  /// Events must arrive time-ordered with mapped polarity.
  void push(Event e);
  void finish();

 private:
  void flush();

  FrameParams params_;
  Sink sink_;
  std::uint16_t out_w_;
  std::uint16_t out_h_;
  bool started_ = false;
  std::uint64_t t0_ = 0;
  std::uint64_t window_ = 0;
  bool window_has_events_ = false;
  AccumFrame current_;
};

inline constexpr char kFrameMagic[8] = {'E', 'V', 'F', 'R', 'A', 'M', 'E', '1'};

void write_frames(std::ostream& out, const FrameSet& set);
FrameSet read_frames(std::istream& in);
void write_frames_file(const std::filesystem::path& path, const FrameSet& set);
FrameSet read_frames_file(const std::filesystem::path& path);

/// Appends frames to a container file and patches the count on close.
class FrameFileWriter {
 public:
  FrameFileWriter(const std::filesystem::path& path, std::uint16_t width, std::uint16_t height);
  ~FrameFileWriter();
  FrameFileWriter(const FrameFileWriter&) = delete;
  FrameFileWriter& operator=(const FrameFileWriter&) = delete;

  void append(const EventFrame& frame);
  void close();
  std::uint32_t count() const noexcept { return count_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint16_t width_;
  std::uint16_t height_;
  std::uint32_t count_ = 0;
};

/// Mean signed accumulation inside a region for each frame.
std::vector<double> region_mean(std::span<const AccumFrame> frames, std::uint16_t x0, std::uint16_t y0,
                                std::uint16_t w, std::uint16_t h);

}  // namespace evpulse::frames
