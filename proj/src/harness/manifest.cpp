#include "mtedebias/harness/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>

#include "mtedebias/errors.hpp"
#include "mtedebias/harness/config.hpp"
#include "mtedebias/harness/io.hpp"

#ifndef MTEDEBIAS_VERSION
#define MTEDEBIAS_VERSION "unknown"
#endif

namespace mte::harness {

std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const char* tool_version() { return MTEDEBIAS_VERSION; }

OutputDir::OutputDir(std::string path) : path_(std::move(path)) {
  std::error_code ec;
  std::filesystem::create_directories(path_, ec);
  if (ec || !std::filesystem::is_directory(path_))
    throw IoError("cannot create output directory '" + path_ + "': " + ec.message());
}

std::string OutputDir::file(const std::string& name) const { return (std::filesystem::path(path_) / name).string(); }

void OutputDir::write(const std::string& name, const std::string& content) {
  write_text(file(name), content);
  entries_.push_back({name, sha256_hex(content), content.size()});
}

void OutputDir::write_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                               const std::string& started_at, const nlohmann::json& status) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& e : entries_) outputs.push_back({{"file", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  nlohmann::json m = {{"schema_version", kSchemaVersion},
                      {"tool", "mtedebias"},
                      {"version", tool_version()},
                      {"command", command},
                      {"seed", seed},
                      {"started_at", started_at},
                      {"finished_at", utc_timestamp()},
                      {"status", status},
                      {"config", config},
                      {"outputs", outputs}};
  write_text(file("manifest.json"), render_json(m));
}

}  // namespace mte::harness
