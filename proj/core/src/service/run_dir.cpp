#include "hipt/service/run_dir.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>

#include "hipt/util/digest.hpp"
#include "hipt/util/error.hpp"

namespace hipt::service {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path create_run_dir(const fs::path& root, const std::string& command) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  fs::create_directories(root);
  const std::string base = command + "-" + stamp;
  for (int n = 0;; ++n) {
    fs::path dir = root / (n == 0 ? base : base + "-" + std::to_string(n));
    if (fs::create_directory(dir)) return dir;
  }
}

void save_run_config(const fs::path& dir, const RunConfig& config) {
  std::ofstream out(dir / kConfigFile, std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / kConfigFile).string());
  out << config.dump(2) << '\n';
}

RunConfig load_run_config(const fs::path& dir) { return load_config_file((dir / kConfigFile).string()); }

std::string file_digest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const auto n = static_cast<std::size_t>(in.gcount());
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(buf), n));
  }
  return to_hex(h.value());
}

std::vector<ManifestEntry> scan_run_dir(const fs::path& dir) {
  std::vector<ManifestEntry> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestFile) continue;
    out.push_back({rel, e.file_size(), file_digest(e.path())});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

void write_manifest(const fs::path& dir) {
  json files = json::array();
  for (const auto& e : scan_run_dir(dir)) files.push_back({{"path", e.path}, {"size", e.size}, {"digest", e.digest}});
  const json manifest = {{"format", "hipt-run"}, {"version", 1}, {"files", files}};
  const fs::path tmp = dir / (std::string(kManifestFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
  }
  fs::rename(tmp, dir / kManifestFile);
}

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw ChecksumError("run directory has no manifest: " + dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ChecksumError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (j.value("format", "") != "hipt-run") throw ChecksumError("not a run manifest: " + dir.string());
  std::vector<ManifestEntry> out;
  for (const auto& f : j.at("files"))
    out.push_back({f.at("path").get<std::string>(), f.at("size").get<std::uintmax_t>(), f.at("digest").get<std::string>()});
  return out;
}

void verify_run_dir(const fs::path& dir) {
  std::map<std::string, ManifestEntry> listed;
  for (auto& e : read_manifest(dir)) listed.emplace(e.path, e);
  for (const auto& e : scan_run_dir(dir)) {
    auto it = listed.find(e.path);
    if (it == listed.end()) throw ChecksumError("file not in manifest: " + e.path);
    if (it->second.size != e.size || it->second.digest != e.digest)
      throw ChecksumError("checksum mismatch: " + e.path);
    listed.erase(it);
  }
  if (!listed.empty()) throw ChecksumError("file listed in manifest is missing: " + listed.begin()->first);
}

}  // namespace hipt::service
