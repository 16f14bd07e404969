#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hipt/service/config.hpp"

namespace hipt::service {

struct ManifestEntry {
  std::string path;  // relative, '/'-separated
  std::uintmax_t size = 0;
  std::string digest;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.json";

// <root>/<command>-YYYYmmdd-HHMMSS, with a numeric suffix if that name is taken.
std::filesystem::path create_run_dir(const std::filesystem::path& root, const std::string& command);

void save_run_config(const std::filesystem::path& dir, const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& dir);

std::string file_digest(const std::filesystem::path& file);

// Lists every regular file under dir except the manifest itself.
std::vector<ManifestEntry> scan_run_dir(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

// Throws ChecksumError on a missing, altered, or unlisted file.
void verify_run_dir(const std::filesystem::path& dir);

}  // namespace hipt::service
