#include "mfc/io.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace mfc {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  return out;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  auto out = open_output(path);
  out << value.dump(2) << '\n';
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

nlohmann::json to_json(const Manifest& manifest) {
  return {{"scenario", manifest.scenario},
          {"config_hash", manifest.config_hash},
          {"files", manifest.files},
          {"seed", manifest.seed},
          {"wall_time_s", manifest.wall_time_s}};
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  const auto dir = path.parent_path();
  for (const auto& f : manifest.files) {
    const auto p = dir / f;
    if (!std::filesystem::exists(p) || std::filesystem::file_size(p) == 0)
      throw std::runtime_error(fmt::format("declared artefact {} is missing or empty", p.string()));
  }
  write_json_file(path, to_json(manifest));
}

}  // namespace mfc
