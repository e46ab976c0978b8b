#include "evpulse/frame_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "evpulse/errors.hpp"

namespace evpulse::frames {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) throw FormatError("truncated frame container");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b[i]) << (8 * i));
  return v;
}

void check_params(const FrameParams& params) {
  if (params.period_us == 0) throw ParameterError("window period must be positive");
  if (params.downsample == 0) throw ParameterError("downsampling factor must be >= 1");
}

struct Geometry {
  std::uint16_t in_w;
  std::uint16_t in_h;
  std::uint16_t out_w;
  std::uint16_t out_h;
};

Geometry geometry(std::uint16_t sensor_w, std::uint16_t sensor_h, const FrameParams& params) {
  std::uint16_t w = sensor_w;
  std::uint16_t h = sensor_h;
  if (params.crop) {
    io::validate_crop(*params.crop, sensor_w, sensor_h);
    w = h = params.crop->side;
  }
  const auto ow = static_cast<std::uint16_t>(w / params.downsample);
  const auto oh = static_cast<std::uint16_t>(h / params.downsample);
  if (ow == 0 || oh == 0) throw ParameterError("downsampling factor larger than the frame");
  return {w, h, ow, oh};
}

void add_event(AccumFrame& frame, const Event& e) {
  if (e.x >= frame.width || e.y >= frame.height) {
    throw BoundsError("event (" + std::to_string(e.x) + "," + std::to_string(e.y) + ") outside " +
                      std::to_string(frame.width) + "x" + std::to_string(frame.height) + " frame");
  }
  if (e.p != 1 && e.p != -1) throw DomainError("accumulation expects mapped polarity, got " + std::to_string(e.p));
  frame.pixels[static_cast<std::size_t>(e.x) + static_cast<std::size_t>(e.y) * frame.width] += e.p;
}

AccumFrame blank(std::uint16_t w, std::uint16_t h, std::uint64_t ts) {
  return AccumFrame{w, h, std::vector<std::int32_t>(static_cast<std::size_t>(w) * h, 0), ts};
}

// Accumulates events[begin, end) after downsampling, stamping with the last
// event or t_end - 1 for an empty window.
AccumFrame accumulate_range(std::span<const Event> events, unsigned factor, const Geometry& g,
                            std::uint64_t t_end) {
  AccumFrame frame = blank(g.out_w, g.out_h, t_end - 1);
  for (Event e : events) {
    e.x = static_cast<std::uint16_t>(e.x / factor);
    e.y = static_cast<std::uint16_t>(e.y / factor);
    if (e.x >= g.out_w || e.y >= g.out_h) continue;
    add_event(frame, e);
  }
  if (!events.empty()) frame.timestamp = events.back().t;
  return frame;
}

// Index boundaries of each window over a time-ordered event vector.
std::vector<std::size_t> window_bounds(const std::vector<Event>& events, std::uint64_t period) {
  std::vector<std::size_t> bounds;
  if (events.empty()) return bounds;
  const std::uint64_t t0 = events.front().t;
  const std::size_t n = window_count(t0, events.back().t, period);
  bounds.reserve(n + 1);
  bounds.push_back(0);
  std::size_t i = 0;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::uint64_t end = t0 + j * period;
    while (i < events.size() && events[i].t < end) ++i;
    bounds.push_back(i);
  }
  return bounds;
}

EventStream cropped(const EventStream& stream, const FrameParams& params) {
  if (!params.crop) return stream;
  return io::crop_events(stream, *params.crop);
}

}  // namespace

std::size_t window_count(std::uint64_t t_first, std::uint64_t t_last, std::uint64_t period_us) {
  if (period_us == 0) throw ParameterError("window period must be positive");
  if (t_last < t_first) throw OrderingError("last timestamp precedes first");
  const std::uint64_t span = t_last - t_first + 1;
  return static_cast<std::size_t>((span + period_us - 1) / period_us);
}

std::vector<EventWindow> window_events(const EventStream& stream, std::uint64_t period_us) {
  if (period_us == 0) throw ParameterError("window period must be positive");
  std::vector<EventWindow> windows;
  if (stream.empty()) return windows;
  for (std::size_t i = 1; i < stream.events.size(); ++i) {
    if (stream.events[i].t < stream.events[i - 1].t) throw OrderingError("stream is not time-ordered");
  }
  const auto bounds = window_bounds(stream.events, period_us);
  const std::uint64_t t0 = stream.events.front().t;
  windows.reserve(bounds.size() - 1);
  for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
    EventWindow w;
    w.index = j + 1;
    w.t_start = t0 + j * period_us;
    w.t_end = w.t_start + period_us;
    w.events.assign(stream.events.begin() + static_cast<std::ptrdiff_t>(bounds[j]),
                    stream.events.begin() + static_cast<std::ptrdiff_t>(bounds[j + 1]));
    windows.push_back(std::move(w));
  }
  return windows;
}

EventWindow downsample_events(EventWindow window, unsigned factor, std::uint16_t src_width,
                              std::uint16_t src_height) {
  if (factor == 0) throw ParameterError("downsampling factor must be >= 1");
  if (factor == 1) return window;
  const unsigned ow = src_width / factor;
  const unsigned oh = src_height / factor;
  std::vector<Event> kept;
  kept.reserve(window.events.size());
  for (Event e : window.events) {
    e.x = static_cast<std::uint16_t>(e.x / factor);
    e.y = static_cast<std::uint16_t>(e.y / factor);
    if (e.x < ow && e.y < oh) kept.push_back(e);
  }
  window.events = std::move(kept);
  return window;
}

AccumFrame accumulate_frame(const EventWindow& window, std::uint16_t width, std::uint16_t height) {
  AccumFrame frame = blank(width, height, window.t_end - 1);
  for (const auto& e : window.events) add_event(frame, e);
  if (!window.events.empty()) frame.timestamp = window.events.back().t;
  return frame;
}

std::uint8_t quantize_value(std::int32_t accum) {
  const std::int32_t v = std::clamp(accum, -kClipLevel, kClipLevel);
  const double scaled = (static_cast<double>(v) + kClipLevel) / (2.0 * kClipLevel) * 255.0;
  return static_cast<std::uint8_t>(std::round(scaled));
}

EventFrame normalize_quantize(const AccumFrame& accum) {
  EventFrame out{accum.width, accum.height, std::vector<std::uint8_t>(accum.pixels.size()), accum.timestamp};
  std::transform(accum.pixels.begin(), accum.pixels.end(), out.pixels.begin(), quantize_value);
  return out;
}

std::vector<AccumFrame> generate_accum_frames(const EventStream& stream, const FrameParams& params) {
  check_params(params);
  const Geometry g = geometry(stream.width, stream.height, params);
  const EventStream roi = cropped(stream, params);
  const auto bounds = window_bounds(roi.events, params.period_us);
  std::vector<AccumFrame> out;
  if (bounds.empty()) return out;
  const std::uint64_t t0 = roi.events.front().t;
  const std::span<const Event> all(roi.events);
  out.reserve(bounds.size() - 1);
  for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
    out.push_back(accumulate_range(all.subspan(bounds[j], bounds[j + 1] - bounds[j]), params.downsample, g,
                                   t0 + (j + 1) * params.period_us));
  }
  return out;
}

FrameSet generate_frames(const EventStream& stream, const FrameParams& params, unsigned threads) {
  check_params(params);
  const Geometry g = geometry(stream.width, stream.height, params);
  const EventStream roi = cropped(stream, params);
  for (std::size_t i = 1; i < roi.events.size(); ++i) {
    if (roi.events[i].t < roi.events[i - 1].t) throw OrderingError("stream is not time-ordered");
  }
  FrameSet set{g.out_w, g.out_h, {}};
  const auto bounds = window_bounds(roi.events, params.period_us);
  if (bounds.empty()) return set;

  const std::size_t n = bounds.size() - 1;
  const std::uint64_t t0 = roi.events.front().t;
  const std::span<const Event> all(roi.events);
  set.frames.resize(n);

  auto work = [&](std::size_t first, std::size_t last) {
    for (std::size_t j = first; j < last; ++j) {
      const auto acc = accumulate_range(all.subspan(bounds[j], bounds[j + 1] - bounds[j]), params.downsample, g,
                                        t0 + (j + 1) * params.period_us);
      set.frames[j] = normalize_quantize(acc);
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    work(0, n);
    return set;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t per = (n + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::size_t first = k * per;
      const std::size_t last = std::min(n, first + per);
      pool.emplace_back([&, k, first, last] {
        try {
          work(first, last);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return set;
}

StreamingFrameGenerator::StreamingFrameGenerator(std::uint16_t sensor_width, std::uint16_t sensor_height,
                                                 const FrameParams& params, Sink sink)
    : params_(params), sink_(std::move(sink)) {
  check_params(params_);
  const Geometry g = geometry(sensor_width, sensor_height, params_);
  out_w_ = g.out_w;
  out_h_ = g.out_h;
  current_ = blank(out_w_, out_h_, 0);
}

void StreamingFrameGenerator::flush() {
  if (!window_has_events_) current_.timestamp = t0_ + (window_ + 1) * params_.period_us - 1;
  sink_(current_);
  std::fill(current_.pixels.begin(), current_.pixels.end(), 0);
  window_has_events_ = false;
  ++window_;
}

void StreamingFrameGenerator::push(Event e) {
  if (params_.crop && !io::crop_event(e, *params_.crop)) return;
  if (!started_) {
    started_ = true;
    t0_ = e.t;
    window_ = 0;
  }
  if (e.t < t0_ + window_ * params_.period_us) throw OrderingError("events must be time-ordered");
  const std::uint64_t target = (e.t - t0_) / params_.period_us;
  while (window_ < target) flush();

  const unsigned f = params_.downsample;
  const Event d{e.t, static_cast<std::uint16_t>(e.x / f), static_cast<std::uint16_t>(e.y / f), e.p};
  if (d.x >= out_w_ || d.y >= out_h_) return;
  add_event(current_, d);
  current_.timestamp = e.t;
  window_has_events_ = true;
}

void StreamingFrameGenerator::finish() {
  if (!started_) return;
  flush();
  started_ = false;
}

void write_frames(std::ostream& out, const FrameSet& set) {
  out.write(kFrameMagic, sizeof(kFrameMagic));
  put_le<std::uint16_t>(out, set.width);
  put_le<std::uint16_t>(out, set.height);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.frames.size()));
  for (const auto& f : set.frames) {
    if (f.width != set.width || f.height != set.height) throw ShapeError("frame size differs from container");
    put_le<std::uint64_t>(out, f.timestamp);
    out.write(reinterpret_cast<const char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  }
}

FrameSet read_frames(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != 8 || std::memcmp(magic, kFrameMagic, 8) != 0) throw FormatError("bad magic: not an EVFRAME1 container");
  FrameSet set;
  set.width = get_le<std::uint16_t>(in);
  set.height = get_le<std::uint16_t>(in);
  const auto count = get_le<std::uint32_t>(in);
  const std::size_t px = static_cast<std::size_t>(set.width) * set.height;
  set.frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    EventFrame f{set.width, set.height, std::vector<std::uint8_t>(px), 0};
    f.timestamp = get_le<std::uint64_t>(in);
    in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(px));
    if (in.gcount() != static_cast<std::streamsize>(px)) throw FormatError("truncated frame " + std::to_string(i));
    set.frames.push_back(std::move(f));
  }
  return set;
}

void write_frames_file(const std::filesystem::path& path, const FrameSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write frame file " + path.string());
  write_frames(out, set);
  if (!out) throw Error("write failed for " + path.string());
}

FrameSet read_frames_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open frame file " + path.string());
  return read_frames(in);
}

FrameFileWriter::FrameFileWriter(const std::filesystem::path& path, std::uint16_t width, std::uint16_t height)
    : out_(path, std::ios::binary), path_(path), width_(width), height_(height) {
  if (!out_) throw Error("cannot write frame file " + path.string());
  out_.write(kFrameMagic, sizeof(kFrameMagic));
  put_le<std::uint16_t>(out_, width_);
  put_le<std::uint16_t>(out_, height_);
  put_le<std::uint32_t>(out_, 0);
}

FrameFileWriter::~FrameFileWriter() {
  try {
    close();
  } catch (...) {
  }
}

void FrameFileWriter::append(const EventFrame& frame) {
  if (!out_.is_open()) throw Error("frame writer already closed");
  if (frame.width != width_ || frame.height != height_) throw ShapeError("frame size differs from container");
  put_le<std::uint64_t>(out_, frame.timestamp);
  out_.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
  ++count_;
}

void FrameFileWriter::close() {
  if (!out_.is_open()) return;
  out_.seekp(12);
  put_le<std::uint32_t>(out_, count_);
  out_.close();
  if (out_.fail()) throw Error("write failed for " + path_.string());
}

std::vector<double> region_mean(std::span<const AccumFrame> frames, std::uint16_t x0, std::uint16_t y0,
                                std::uint16_t w, std::uint16_t h) {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (x0 + w > f.width || y0 + h > f.height || w == 0 || h == 0) throw BoundsError("region outside frame");
    double sum = 0.0;
    for (std::size_t y = y0; y < static_cast<std::size_t>(y0 + h); ++y) {
      for (std::size_t x = x0; x < static_cast<std::size_t>(x0 + w); ++x) sum += f.at(x, y);
    }
    out.push_back(sum / (static_cast<double>(w) * h));
  }
  return out;
}

}  // namespace evpulse::frames
