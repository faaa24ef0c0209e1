#pragma once

// Output files and the run manifest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mfc {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Opens `path` for writing; throws std::runtime_error on failure.
std::ofstream open_output(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

/// {scenario, config_hash, files[], seed, wall_time_s}. Written last by every
/// run so a reader can rely on the listed files being complete.
struct Manifest {
  std::string scenario;
  std::string config_hash;  // 16 hex digits
  std::vector<std::string> files;  // relative to the manifest directory
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

nlohmann::json to_json(const Manifest& manifest);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace mfc
