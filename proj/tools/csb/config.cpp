#include "config.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csb/error.hpp"
#include "csb/hash.hpp"
#include "csb/tsv.hpp"

namespace csb::cli {
namespace {

using json = nlohmann::json;

const json* member(const json& obj, const char* name) {
  const auto it = obj.find(name);
  return it == obj.end() ? nullptr : &*it;
}

std::string get_string(const json& obj, const char* name, const std::string& where) {
  const json* v = member(obj, name);
  if (!v) return {};
  if (!v->is_string()) throw ValidationError(where + "." + name, "expected a string");
  return v->get<std::string>();
}

std::optional<std::uint64_t> get_count(const json& obj, const char* name, const std::string& where) {
  const json* v = member(obj, name);
  if (!v) return std::nullopt;
  if (!v->is_number_unsigned()) throw ValidationError(where + "." + name, "expected a nonnegative integer");
  return v->get<std::uint64_t>();
}

std::optional<bool> get_bool(const json& obj, const char* name, const std::string& where) {
  const json* v = member(obj, name);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) throw ValidationError(where + "." + name, "expected true or false");
  return v->get<bool>();
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  const json* v = member(root, name);
  if (!v) return empty;
  if (!v->is_object()) throw ValidationError(name, "expected an object");
  return *v;
}

BackoffPolicy parse_retry(const json& parent, const std::string& where, BackoffPolicy policy) {
  const json* r = member(parent, "retry");
  if (!r) return policy;
  if (!r->is_object()) throw ValidationError(where + ".retry", "expected an object");
  const std::string w = where + ".retry";
  if (auto v = get_count(*r, "attempts", w)) {
    if (*v == 0) throw ValidationError(w + ".attempts", "must be at least 1");
    policy.attempts = static_cast<int>(*v);
  }
  if (auto v = get_count(*r, "initial_delay_ms", w)) policy.initial_delay = std::chrono::milliseconds(*v);
  if (const json* m = member(*r, "multiplier")) {
    if (!m->is_number() || m->get<double>() < 1.0) throw ValidationError(w + ".multiplier", "expected a number >= 1");
    policy.multiplier = m->get<double>();
  }
  return policy;
}

JudgeConfig parse_judge(const json& j, std::size_t index) {
  const std::string where = fmt::format("judges[{}]", index);
  if (!j.is_object()) throw ValidationError(where, "expected an object");
  JudgeConfig c;
  c.id = get_string(j, "id", where);
  const std::string kind = get_string(j, "kind", where);
  if (kind.empty()) throw ValidationError(where + ".kind", "is required");
  const auto k = try_parse_judge_kind(kind);
  if (!k) throw ValidationError(where + ".kind", fmt::format("unknown judge kind '{}'", kind));
  c.kind = *k;
  c.endpoint = get_string(j, "endpoint", where);
  c.model = get_string(j, "model", where);
  if (const json* t = member(j, "temperature")) {
    if (!t->is_number()) throw ValidationError(where + ".temperature", "expected a number");
    c.temperature = t->get<double>();
  }
  if (auto v = get_count(j, "max_output_tokens", where)) c.max_output_tokens = static_cast<int>(*v);
  c.api_key_env = get_string(j, "api_key_env", where);
  if (c.api_key_env.empty()) c.api_key_env = index == 0 ? "CSB_JUDGE_A_KEY" : "CSB_JUDGE_B_KEY";
  if (auto v = get_count(j, "seed", where)) c.seed = *v;
  try {
    validate(c);
  } catch (const ValidationError& e) {
    throw ValidationError(where + "." + e.field(), e.detail());
  }
  return c;
}

}  // namespace

std::filesystem::path resolve(const Config& config, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || config.base_dir.empty()) return p;
  return config.base_dir / p;
}

Config parse_config(const std::string& text, const std::filesystem::path& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("{}: invalid JSON: {}", source.string(), e.what()));
  }
  if (!root.is_object()) throw Error(fmt::format("{}: the config must be a JSON object", source.string()));

  Config c;
  c.source = source;
  c.base_dir = source.has_parent_path() ? source.parent_path() : std::filesystem::path(".");
  c.hash = sha256_hex(text);
  c.seed = get_count(root, "seed", "config");
  if (auto j = get_count(root, "jobs", "config")) {
    if (*j == 0) throw ValidationError("jobs", "must be at least 1");
    c.jobs = *j;
  }

  if (const json* judges = member(root, "judges")) {
    if (!judges->is_array()) throw ValidationError("judges", "expected an array");
    for (std::size_t i = 0; i < judges->size(); ++i) c.judges.push_back(parse_judge((*judges)[i], i));
    if (c.judges.size() != 2) throw ValidationError("judges", fmt::format("exactly two judges are required, got {}", c.judges.size()));
    if (c.judges[0].id == c.judges[1].id) throw ValidationError("judges[1].id", "judge ids must differ");
  }

  if (member(root, "providers")) {
    c.providers = parse_provider_specs(text, source.string());
  } else {
    c.providers = default_provider_specs();
  }

  const json& h = section(root, "heuristics");
  if (auto p = get_string(h, "morph_rules", "heuristics"); !p.empty()) c.morph_rules = resolve(c, p);
  if (auto v = get_bool(h, "round_signals", "heuristics")) c.round_signals = *v;

  const json& s = section(root, "scoring");
  if (auto v = get_count(s, "max_in_flight", "scoring")) {
    if (*v == 0) throw ValidationError("scoring.max_in_flight", "must be at least 1");
    c.max_in_flight = *v;
  }
  if (auto v = get_count(s, "validation_rerequests", "scoring")) c.validation_rerequests = static_cast<int>(*v);
  c.judge_retry = parse_retry(s, "scoring", c.judge_retry);

  const json& t = section(root, "transcription");
  if (auto v = get_string(t, "ffmpeg", "transcription"); !v.empty()) c.ffmpeg = v;
  if (auto v = get_string(t, "audio_cache", "transcription"); !v.empty()) c.audio_cache = resolve(c, v);
  c.provider_retry = parse_retry(t, "transcription", c.provider_retry);

  const json& e = section(root, "evaluation");
  if (auto v = get_string(e, "embed_endpoint", "evaluation"); !v.empty()) c.embed_endpoint = v;
  if (const json* cmd = member(e, "embed_command")) {
    try {
      c.embed_command = cmd->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ValidationError("evaluation.embed_command", "expected a list of strings");
    }
  }
  if (auto v = get_count(e, "batch_size", "evaluation")) {
    if (*v == 0) throw ValidationError("evaluation.batch_size", "must be at least 1");
    c.embed_batch_size = *v;
  }
  if (auto v = get_count(e, "timeout_s", "evaluation")) c.embed_timeout = std::chrono::seconds(*v);
  if (auto v = get_bool(e, "script_normalised", "evaluation")) c.script_normalised = *v;

  const json& a = section(root, "analysis");
  if (auto v = get_bool(a, "per_pair_quartiles", "analysis")) c.per_pair_quartiles = *v;
  if (auto v = get_count(a, "divergence_k", "analysis")) c.divergence_k = *v;
  return c;
}

Config load_config(const std::optional<std::filesystem::path>& path) {
  if (!path || path->empty()) {
    Config c;
    c.providers = default_provider_specs();
    return c;
  }
  if (!std::filesystem::exists(*path)) throw IoError(fmt::format("config file not found: {}", path->string()));
  return parse_config(read_file(*path), *path);
}

}  // namespace csb::cli
