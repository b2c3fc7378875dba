#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace csb {

// Per-run record written to <out-dir>/manifest.json. Together with the config
// file it pins everything a rerun of the deterministic stages needs.
struct RunManifest {
  std::string run_id;       // derived from config hash and seed
  std::string config_hash;  // SHA-256 of the config bytes
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> stages;  // stage -> "complete" or "failed"
  std::map<std::string, std::string> judges;     // judge id -> model
  std::map<std::string, std::string> providers;  // provider id -> model
  std::string embedding_model;
  std::string embedding_layer;
  std::string tool_version;

  bool operator==(const RunManifest&) const = default;
};

std::string make_run_id(std::string_view config_hash, std::uint64_t seed);

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text, std::string_view source = "<manifest>");

// Missing file -> nullopt. Malformed file -> csb::Error.
std::optional<RunManifest> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace csb
