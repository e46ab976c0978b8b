#include "evpulse/event_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "evpulse/errors.hpp"

namespace evpulse::io {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* b) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b[i]) << (8 * i));
  return v;
}

template <typename T>
bool parse_field(std::string_view field, T& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::uint8_t raw_polarity(std::int8_t p) {
  switch (p) {
    case 0:
    case -1:
      return 0;
    case 1:
      return 1;
    default:
      throw DomainError("polarity " + std::to_string(p) + " is not representable");
  }
}

}  // namespace

EventReader::EventReader(std::istream& in, EventFormat format, std::uint16_t width, std::uint16_t height)
    : in_(in), format_(format), width_(width), height_(height) {
  if (format_ == EventFormat::kBinary) {
    unsigned char header[kBinaryHeaderSize];
    in_.read(reinterpret_cast<char*>(header), kBinaryHeaderSize);
    if (in_.gcount() != static_cast<std::streamsize>(kBinaryHeaderSize) ||
        std::memcmp(header, kBinaryMagic, sizeof(kBinaryMagic)) != 0) {
      throw FormatError("bad magic: not an EVPULSE1 event container");
    }
    width_ = get_le<std::uint16_t>(header + 8);
    height_ = get_le<std::uint16_t>(header + 10);
  } else {
    if (width_ == 0 || height_ == 0) throw ParameterError("text event source needs a sensor size");
    if (!std::getline(in_, buf_)) throw ParseError(1, "missing header `t,x,y,p`");
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (buf_ != "t,x,y,p") throw ParseError(1, "expected header `t,x,y,p`, got `" + buf_ + "`");
  }
}

std::optional<Event> EventReader::next() {
  return format_ == EventFormat::kText ? next_text() : next_binary();
}

void EventReader::check(const Event& e, std::size_t record) {
  if (e.x >= width_ || e.y >= height_) {
    std::ostringstream msg;
    msg << "record " << record << ": event (" << e.x << "," << e.y << ") outside " << width_ << "x" << height_;
    throw BoundsError(msg.str());
  }
  if (any_ && e.t < last_t_) {
    std::ostringstream msg;
    msg << "record " << record << ": timestamp " << e.t << " precedes " << last_t_;
    throw OrderingError(msg.str());
  }
  any_ = true;
  last_t_ = e.t;
}

std::optional<Event> EventReader::next_text() {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (buf_.empty()) continue;

    std::string_view rest(buf_);
    std::string_view fields[4];
    int n = 0;
    for (; n < 4; ++n) {
      const auto comma = rest.find(',');
      if (comma == std::string_view::npos) {
        fields[n++] = rest;
        rest = {};
        break;
      }
      fields[n] = rest.substr(0, comma);
      rest.remove_prefix(comma + 1);
    }
    if (n != 4 || !rest.empty()) throw ParseError(line_, "expected 4 fields `t,x,y,p`");

    Event e;
    unsigned x = 0, y = 0;
    int p = 0;
    if (!parse_field(fields[0], e.t) || !parse_field(fields[1], x) || !parse_field(fields[2], y) ||
        !parse_field(fields[3], p)) {
      throw ParseError(line_, "malformed record `" + buf_ + "`");
    }
    if (x > UINT16_MAX || y > UINT16_MAX) throw BoundsError("line " + std::to_string(line_) + ": coordinate overflow");
    if (p != 0 && p != 1) throw ParseError(line_, "raw polarity must be 0 or 1");
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.p = static_cast<std::int8_t>(p);
    check(e, line_);
    ++record_;
    return e;
  }
  return std::nullopt;
}

std::optional<Event> EventReader::next_binary() {
  unsigned char rec[kBinaryRecordSize];
  in_.read(reinterpret_cast<char*>(rec), kBinaryRecordSize);
  const auto got = in_.gcount();
  if (got == 0) return std::nullopt;
  if (got != static_cast<std::streamsize>(kBinaryRecordSize)) {
    throw FormatError("truncated record " + std::to_string(record_) + " (" + std::to_string(got) + " of 13 bytes)");
  }
  Event e;
  e.t = get_le<std::uint64_t>(rec);
  e.x = get_le<std::uint16_t>(rec + 8);
  e.y = get_le<std::uint16_t>(rec + 10);
  if (rec[12] > 1) throw DomainError("record " + std::to_string(record_) + ": raw polarity must be 0 or 1");
  e.p = static_cast<std::int8_t>(rec[12]);
  check(e, record_);
  ++record_;
  return e;
}

EventStream parse_text_stream(std::istream& in, std::uint16_t width, std::uint16_t height) {
  EventReader reader(in, EventFormat::kText, width, height);
  EventStream s{{}, width, height};
  while (auto e = reader.next()) s.events.push_back(*e);
  return s;
}

EventStream parse_text_stream(const std::string& text, std::uint16_t width, std::uint16_t height) {
  std::istringstream in(text);
  return parse_text_stream(in, width, height);
}

EventStream parse_binary_stream(std::istream& in) {
  EventReader reader(in, EventFormat::kBinary);
  EventStream s{{}, reader.width(), reader.height()};
  while (auto e = reader.next()) s.events.push_back(*e);
  return s;
}

EventStream parse_binary_stream(std::span<const std::uint8_t> bytes) {
  std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return parse_binary_stream(in);
}

void write_text_stream(std::ostream& out, const EventStream& stream) {
  out << "t,x,y,p\n";
  for (const auto& e : stream.events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(raw_polarity(e.p)) << '\n';
  }
}

void write_binary_stream(std::ostream& out, const EventStream& stream) {
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  put_le<std::uint16_t>(out, stream.width);
  put_le<std::uint16_t>(out, stream.height);
  put_le<std::uint32_t>(out, 0);
  for (const auto& e : stream.events) {
    put_le<std::uint64_t>(out, e.t);
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::uint8_t>(out, raw_polarity(e.p));
  }
}

std::vector<std::uint8_t> encode_binary_stream(const EventStream& stream) {
  std::ostringstream out;
  write_binary_stream(out, stream);
  const std::string s = out.str();
  return {s.begin(), s.end()};
}

EventFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".evb") ? EventFormat::kBinary : EventFormat::kText;
}

EventStream read_stream_file(const std::filesystem::path& path, std::uint16_t width, std::uint16_t height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open event file " + path.string());
  return format_for_path(path) == EventFormat::kBinary ? parse_binary_stream(in)
                                                       : parse_text_stream(in, width, height);
}

void write_stream_file(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write event file " + path.string());
  if (format_for_path(path) == EventFormat::kBinary) {
    write_binary_stream(out, stream);
  } else {
    write_text_stream(out, stream);
  }
  if (!out) throw Error("write failed for " + path.string());
}

Event map_polarity(Event e) {
  if (e.p == 0) {
    e.p = -1;
  } else if (e.p == 1) {
    e.p = 1;
  } else {
    throw DomainError("raw polarity must be 0 or 1, got " + std::to_string(e.p));
  }
  return e;
}

EventStream map_polarity(EventStream stream) {
  for (auto& e : stream.events) e = map_polarity(e);
  return stream;
}

void validate_crop(const CropBox& box, std::uint16_t width, std::uint16_t height) {
  if (box.side == 0) throw ParameterError("crop side must be positive");
  if (box.x_min + box.side > width || box.y_min + box.side > height) {
    std::ostringstream msg;
    msg << "crop (" << box.x_min << "," << box.y_min << ",+" << box.side << ") exceeds sensor " << width << "x"
        << height;
    throw ParameterError(msg.str());
  }
}

bool crop_event(Event& e, const CropBox& box) {
  if (e.x < box.x_min || e.y < box.y_min) return false;
  const unsigned dx = e.x - box.x_min;
  const unsigned dy = e.y - box.y_min;
  if (dx >= box.side || dy >= box.side) return false;
  e.x = static_cast<std::uint16_t>(dx);
  e.y = static_cast<std::uint16_t>(dy);
  return true;
}

EventStream crop_events(const EventStream& stream, const CropBox& box) {
  validate_crop(box, stream.width, stream.height);
  EventStream out{{}, box.side, box.side};
  for (Event e : stream.events) {
    if (crop_event(e, box)) out.events.push_back(e);
  }
  return out;
}

}  // namespace evpulse::io
