#include "evpulse/tscan/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "evpulse/errors.hpp"

namespace evpulse::tscan {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ParameterError("invalid integer for " + key + ": " + v);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("invalid number for " + key + ": " + v);
  }
}

template <typename A>
A parse_list(const std::string& key, const std::string& v, auto convert) {
  A out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == out.size()) throw ParameterError("too many entries for " + key);
    out[i++] = convert(key, trim(item));
  }
  if (i != out.size()) throw ParameterError("too few entries for " + key);
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::string get_string(std::istream& in, std::uint32_t n) {
  if (n > (1u << 24)) throw FormatError("implausible string length in checkpoint");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError("truncated checkpoint");
  return s;
}

}  // namespace

std::map<std::string, std::string> config_to_map(const TscanConfig& c) {
  std::map<std::string, std::string> kv;
  kv["frame_depth"] = std::to_string(c.frame_depth);
  kv["input_size"] = std::to_string(c.input_size);
  kv["lr"] = format_double(c.learning_rate);
  kv["weight_decay"] = format_double(c.weight_decay);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["chunk_len"] = std::to_string(c.chunk_len);
  kv["epochs"] = std::to_string(c.epochs);
  kv["seed"] = std::to_string(c.seed);
  kv["flip_prob"] = format_double(c.flip_prob);
  kv["threads"] = std::to_string(c.threads);
  kv["channels"] = std::to_string(c.channels[0]) + "," + std::to_string(c.channels[1]) + "," +
                   std::to_string(c.channels[2]) + "," + std::to_string(c.channels[3]);
  kv["dense_hidden"] = std::to_string(c.dense_hidden);
  kv["dropout"] = format_double(c.dropout[0]) + "," + format_double(c.dropout[1]) + "," + format_double(c.dropout[2]);
  return kv;
}

TscanConfig config_from_map(const std::map<std::string, std::string>& kv, TscanConfig c) {
  for (const auto& [key, v] : kv) {
    if (key == "frame_depth") c.frame_depth = to_size(key, v);
    else if (key == "input_size") c.input_size = to_size(key, v);
    else if (key == "lr") c.learning_rate = to_double(key, v);
    else if (key == "weight_decay") c.weight_decay = to_double(key, v);
    else if (key == "batch_size") c.batch_size = to_size(key, v);
    else if (key == "chunk_len") c.chunk_len = to_size(key, v);
    else if (key == "epochs") c.epochs = to_size(key, v);
    else if (key == "seed") c.seed = to_size(key, v);
    else if (key == "flip_prob") c.flip_prob = to_double(key, v);
    else if (key == "threads") c.threads = to_size(key, v);
    else if (key == "channels") c.channels = parse_list<std::array<std::size_t, 4>>(key, v, to_size);
    else if (key == "dense_hidden") c.dense_hidden = to_size(key, v);
    else if (key == "dropout") c.dropout = parse_list<std::array<double, 3>>(key, v, to_double);
    else throw ParameterError("unknown configuration key: " + key);
  }
  return c;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty() || body.front() == '[') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(n, "expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ParseError(n, "empty key");
    kv[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return kv;
}

TscanConfig read_manifest(const std::filesystem::path& path, TscanConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  return config_from_map(parse_key_values(in), base);
}

void write_manifest(const std::filesystem::path& path, const TscanConfig& config) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  for (const auto& [k, v] : config_to_map(config)) out << k << " = " << v << '\n';
}

void save_checkpoint(std::ostream& out, const TscanModel<float>& model) {
  std::string text;
  for (const auto& [k, v] : config_to_map(model.config())) text += k + " = " + v + "\n";
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& params = model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.dims.size()));
    for (auto d : p.dims) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : p.value) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw FormatError("failed writing checkpoint");
}

TscanModel<float> load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError("not a checkpoint");
  if (const auto v = get_u32(in); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v));
  }
  std::istringstream text(get_string(in, get_u32(in)));
  TscanModel<float> model(config_from_map(parse_key_values(text)));
  auto& params = model.parameters();
  if (get_u32(in) != params.size()) throw FormatError("checkpoint tensor count does not match the architecture");
  for (auto& p : params) {
    const std::string name = get_string(in, get_u32(in));
    if (name != p.name) throw FormatError("unexpected tensor " + name + ", wanted " + p.name);
    const std::uint32_t rank = get_u32(in);
    if (rank != p.dims.size()) throw FormatError("rank mismatch for " + name);
    for (auto d : p.dims) {
      if (get_u32(in) != d) throw FormatError("shape mismatch for " + name);
    }
    for (auto& v : p.value) v = std::bit_cast<float>(get_u32(in));
  }
  return model;
}

void save_checkpoint_file(const std::filesystem::path& path, const TscanModel<float>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  save_checkpoint(out, model);
}

TscanModel<float> load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace evpulse::tscan
