#pragma once

// Run manifests: what was run, on which inputs, with which seeds, and what
// it wrote.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace miglmm {

/// Hex SHA-256 of a byte string or of a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// UTC time as ISO 8601 with a trailing Z.
std::string utc_timestamp();

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_hash;
  std::string data_hash;
  std::vector<std::uint64_t> seeds;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;  // paths relative to the run directory

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

/// Stamps `finished` and writes manifest.json atomically into dir.
void write_manifest(const std::filesystem::path& dir, RunManifest manifest);

/// Creates base/<stem>-NNNN with the first unused NNNN; never reuses an
/// existing directory.
std::filesystem::path create_run_directory(const std::filesystem::path& base,
                                           const std::string& stem);

/// Version string compiled into the library.
std::string tool_version();

}  // namespace miglmm
