#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evpulse::io {

/// One sensor event. Raw polarity is 0/1; after map_polarity it is -1/+1.
struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  std::vector<Event> events;
  std::uint16_t width = 0;
  std::uint16_t height = 0;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Square region of interest, in sensor coordinates.
struct CropBox {
  std::uint16_t x_min = 0;
  std::uint16_t y_min = 0;
  std::uint16_t side = 0;
};

enum class EventFormat { kText, kBinary };

inline constexpr char kBinaryMagic[8] = {'E', 'V', 'P', 'U', 'L', 'S', 'E', '1'};
inline constexpr std::size_t kBinaryHeaderSize = 16;
inline constexpr std::size_t kBinaryRecordSize = 13;

/// Incremental reader over a text (`t,x,y,p` CSV) or binary event source.
///
/// Validates bounds and timestamp ordering record by record, so a consumer
/// can start windowing before the source is exhausted. The stream must
/// outlive the reader.
class EventReader {
 public:
  /// Text sources carry no geometry, so the sensor size must be supplied.
  EventReader(std::istream& in, EventFormat format, std::uint16_t width = 0,
              std::uint16_t height = 0);

  std::uint16_t width() const noexcept { return width_; }
  std::uint16_t height() const noexcept { return height_; }

  /// Next event, or nullopt at end of input. Throws on malformed records.
  std::optional<Event> next();

 private:
  std::optional<Event> next_text();
  std::optional<Event> next_binary();
  void check(const Event& e, std::size_t record);

  std::istream& in_;
  EventFormat format_;
  std::uint16_t width_;
  std::uint16_t height_;
  std::size_t line_ = 1;
  std::size_t record_ = 0;
  std::uint64_t last_t_ = 0;
  bool any_ = false;
  std::string buf_;
};

EventStream parse_text_stream(std::istream& in, std::uint16_t width, std::uint16_t height);
EventStream parse_text_stream(const std::string& text, std::uint16_t width, std::uint16_t height);
EventStream parse_binary_stream(std::istream& in);
EventStream parse_binary_stream(std::span<const std::uint8_t> bytes);

/// Raw (0/1) polarities are written as-is; mapped (-1/+1) streams are
/// written back in raw form so the files stay compatible.
void write_text_stream(std::ostream& out, const EventStream& stream);
void write_binary_stream(std::ostream& out, const EventStream& stream);
std::vector<std::uint8_t> encode_binary_stream(const EventStream& stream);

/// Format inferred from extension: `.bin`/`.evb` binary, anything else text.
EventFormat format_for_path(const std::filesystem::path& path);
EventStream read_stream_file(const std::filesystem::path& path, std::uint16_t width = 0,
                             std::uint16_t height = 0);
void write_stream_file(const std::filesystem::path& path, const EventStream& stream);

/// 0 -> -1, 1 -> +1. Any other polarity is a DomainError.
EventStream map_polarity(EventStream stream);
Event map_polarity(Event e);

/// Keeps events inside the box and re-bases them to the box origin.
EventStream crop_events(const EventStream& stream, const CropBox& box);
bool crop_event(Event& e, const CropBox& box);
void validate_crop(const CropBox& box, std::uint16_t width, std::uint16_t height);

}  // namespace evpulse::io
