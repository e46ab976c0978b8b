#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "evpulse/tscan/model.hpp"

namespace evpulse::tscan {

inline constexpr char kCheckpointMagic[8] = {'E', 'V', 'T', 'S', 'C', 'A', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Flat key-value view of a config (manifest keys plus architecture keys).
std::map<std::string, std::string> config_to_map(const TscanConfig& config);
/// Unknown keys are a ParameterError; missing keys keep their defaults.
TscanConfig config_from_map(const std::map<std::string, std::string>& kv, TscanConfig base = {});

/// `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
TscanConfig read_manifest(const std::filesystem::path& path, TscanConfig base = {});
void write_manifest(const std::filesystem::path& path, const TscanConfig& config);

void save_checkpoint(std::ostream& out, const TscanModel<float>& model);
TscanModel<float> load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::filesystem::path& path, const TscanModel<float>& model);
TscanModel<float> load_checkpoint_file(const std::filesystem::path& path);

}  // namespace evpulse::tscan
