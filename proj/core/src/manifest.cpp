#include "csb/manifest.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csb/error.hpp"
#include "csb/hash.hpp"
#include "csb/tsv.hpp"

namespace csb {

using ordered_json = nlohmann::ordered_json;

std::string make_run_id(std::string_view config_hash, std::uint64_t seed) {
  return sha256_hex(fmt::format("{}:{}", config_hash, seed)).substr(0, 16);
}

std::string manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["run_id"] = m.run_id;
  j["config_hash"] = m.config_hash;
  j["tool_version"] = m.tool_version;
  j["seeds"] = m.seeds;
  j["stages"] = m.stages;
  j["judges"] = m.judges;
  j["providers"] = m.providers;
  j["embedding"] = {{"model", m.embedding_model}, {"layer", m.embedding_layer}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text, std::string_view source) {
  try {
    const auto j = ordered_json::parse(text);
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tool_version = j.value("tool_version", std::string{});
    m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
    m.stages = j.value("stages", std::map<std::string, std::string>{});
    m.judges = j.value("judges", std::map<std::string, std::string>{});
    m.providers = j.value("providers", std::map<std::string, std::string>{});
    if (j.contains("embedding")) {
      m.embedding_model = j["embedding"].value("model", std::string{});
      m.embedding_layer = j["embedding"].value("layer", std::string{});
    }
    return m;
  } catch (const ordered_json::exception& e) {
    throw Error(fmt::format("{}: malformed manifest: {}", source, e.what()));
  }
}

std::optional<RunManifest> load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  return manifest_from_json(read_file(path), path.string());
}

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, manifest_to_json(manifest));
}

}  // namespace csb
