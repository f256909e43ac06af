#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mte::harness {

std::string sha256_hex(const std::string& content);

// UTC time as YYYY-MM-DDTHH:MM:SSZ. Honors SOURCE_DATE_EPOCH so that whole
// output directories, manifests included, can be made byte-reproducible.
std::string utc_timestamp();

const char* tool_version();

// Writes files into one output directory and records their checksums.
class OutputDir {
 public:
  // Creates the directory (and parents). Throws IoError.
  explicit OutputDir(std::string path);

  const std::string& path() const { return path_; }
  void write(const std::string& name, const std::string& content);
  std::string file(const std::string& name) const;

  // manifest.json: command, config echo, version, seed, timestamps, checksums.
  void write_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                      const std::string& started_at, const nlohmann::json& status);

 private:
  struct Entry {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
  };
  std::string path_;
  std::vector<Entry> entries_;
};

}  // namespace mte::harness
