#include "miglmm/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <system_error>

#include "miglmm/errors.hpp"
#include "miglmm/io.hpp"

#ifndef MIGLMM_VERSION
#define MIGLMM_VERSION "unknown"
#endif

namespace miglmm {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw NumericError("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string tool_version() { return MIGLMM_VERSION; }

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["arguments"] = arguments;
  j["config_hash"] = config_hash;
  j["data_hash"] = data_hash;
  j["seeds"] = seeds;
  j["version"] = version;
  j["started"] = started;
  j["finished"] = finished;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.arguments = j.at("arguments").get<std::vector<std::string>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.data_hash = j.at("data_hash").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.version = j.at("version").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run manifest: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_manifest(const std::filesystem::path& dir, RunManifest manifest) {
  if (manifest.version.empty()) manifest.version = tool_version();
  manifest.finished = utc_timestamp();
  write_file_atomic(dir / "manifest.json", manifest.to_json());
}

std::filesystem::path create_run_directory(const std::filesystem::path& base,
                                           const std::string& stem) {
  std::filesystem::create_directories(base);
  for (int k = 1; k < 10000; ++k) {
    char suffix[8];
    std::snprintf(suffix, sizeof(suffix), "%04d", k);
    const auto dir = base / (stem + "-" + suffix);
    // create_directory reports false for an existing directory, so a
    // concurrent run can never claim the same one
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw DataError("no free run directory under " + base.string() + " for " + stem);
}

}  // namespace miglmm
