#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csb/judges.hpp"
#include "csb/providers.hpp"

namespace csb::cli {

// Run configuration. Every section is optional; relative paths resolve
// against the directory holding the config file.
//
// {
//   "seed": 7, "jobs": 4,
//   "judges": [{"id", "kind": "openai"|"gemini"|"stub", "endpoint", "model",
//               "temperature", "max_output_tokens", "api_key_env", "seed"}, x2],
//   "providers": [... see parse_provider_specs ...],
//   "heuristics": {"morph_rules": "path", "round_signals": true},
//   "scoring": {"max_in_flight": 2, "validation_rerequests": 1,
//               "retry": {"attempts": 3, "initial_delay_ms": 500, "multiplier": 2}},
//   "transcription": {"ffmpeg": "ffmpeg", "audio_cache": "path",
//                     "retry": {...}},
//   "evaluation": {"embed_endpoint": "host:port", "embed_command": ["argv", ...],
//                  "batch_size": 32, "timeout_s": 120, "script_normalised": false},
//   "analysis": {"per_pair_quartiles": false, "divergence_k": 5}
// }
struct Config {
  std::filesystem::path source;    // empty when defaults are used
  std::filesystem::path base_dir;  // for relative paths
  std::string hash;                // SHA-256 of the file bytes ("" for defaults)

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  std::vector<JudgeConfig> judges;
  std::vector<ProviderSpec> providers;

  std::optional<std::filesystem::path> morph_rules;
  bool round_signals = true;

  std::size_t max_in_flight = 4;
  int validation_rerequests = 1;
  BackoffPolicy judge_retry{};

  std::string ffmpeg = "ffmpeg";
  std::optional<std::filesystem::path> audio_cache;
  BackoffPolicy provider_retry{};

  std::optional<std::string> embed_endpoint;
  std::vector<std::string> embed_command;
  std::size_t embed_batch_size = 32;
  std::chrono::seconds embed_timeout{120};
  bool script_normalised = false;

  bool per_pair_quartiles = false;
  std::size_t divergence_k = 5;
};

// Defaults when `path` is empty. Throws ValidationError naming the field
// (e.g. "judges[1].model") or csb::Error for unreadable / malformed files.
Config load_config(const std::optional<std::filesystem::path>& path);
Config parse_config(const std::string& text, const std::filesystem::path& source);

std::filesystem::path resolve(const Config& config, const std::filesystem::path& p);

}  // namespace csb::cli
