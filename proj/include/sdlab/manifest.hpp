#pragma once

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/config.hpp"

namespace sdlab {

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest per command run, enumerating exactly the files that run
// emitted (relative to the manifest's directory).
inline std::filesystem::path write_manifest(const std::filesystem::path& dir,
                                            const std::string& command,
                                            const std::string& config_hash,
                                            std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  nlohmann::json j = {
      {"format", "sdlab.manifest"}, {"version", 1},
      {"command", command},         {"config_hash", config_hash},
      {"software_version", kSoftwareVersion},
      {"created_utc", utc_timestamp()},
      {"files", files},
  };
  const std::filesystem::path path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
  return path;
}

inline std::vector<std::string> read_manifest_files(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("manifest " + path.string() + ": cannot open");
  nlohmann::json j;
  in >> j;
  return j.at("files").get<std::vector<std::string>>();
}

}  // namespace sdlab
