#include "csb/providers.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <exception>
#include <thread>

#include "csb/error.hpp"
#include "csb/hash.hpp"
#include "csb/tsv.hpp"

extern char** environ;

namespace csb {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kAzureLidParam = "SpeechServiceConnection_LanguageIdMode";

std::string field(std::size_t index, std::string_view name) { return fmt::format("providers[{}].{}", index, name); }

// Plain text for form fields and query strings: strings unquoted, other
// values as JSON.
std::string plain_value(const std::string& json_text) {
  const auto v = json::parse(json_text);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string audio_content_type(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".mp3") return "audio/mpeg";
  if (ext == ".wav") return "audio/wav";
  if (ext == ".flac") return "audio/flac";
  if (ext == ".m4a" || ext == ".mp4") return "audio/mp4";
  if (ext == ".ogg" || ext == ".opus") return "audio/ogg";
  if (ext == ".webm") return "audio/webm";
  return "application/octet-stream";
}

std::string url_encode(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += fmt::format("%{:02X}", c);
    }
  }
  return out;
}

json parse_response(const HttpResponse& response, const std::string& who) {
  try {
    return json::parse(response.body);
  } catch (const json::parse_error& e) {
    throw ValidationError("response", fmt::format("{} returned a non-JSON body: {}", who, e.what()));
  }
}

class HttpAdapter : public ProviderAdapter {
 public:
  HttpAdapter(ProviderSpec spec, std::shared_ptr<Transport> transport, std::string key)
      : spec_(std::move(spec)), transport_(std::move(transport)), key_(std::move(key)) {}

  std::string transcribe(const TranscriptionJob& job, const std::filesystem::path& audio) override {
    HttpRequest req = build(job, audio, read_file(audio));
    const HttpResponse resp = transport_->send(req);
    try {
      return extract(resp);
    } catch (const json::exception& e) {
      throw ValidationError("response", fmt::format("{} response: {}", spec_.provider_id, e.what()));
    }
  }

 protected:
  virtual HttpRequest build(const TranscriptionJob& job, const std::filesystem::path& audio, std::string bytes) = 0;
  virtual std::string extract(const HttpResponse& response) = 0;

  void add_params_as_form(HttpRequest& req) const {
    for (const auto& p : spec_.params) req.form.push_back({p.name, plain_value(p.json), "", ""});
  }

  ProviderSpec spec_;
  std::shared_ptr<Transport> transport_;
  std::string key_;
};

class ElevenLabsAdapter final : public HttpAdapter {
 public:
  using HttpAdapter::HttpAdapter;

 protected:
  HttpRequest build(const TranscriptionJob&, const std::filesystem::path& audio, std::string bytes) override {
    HttpRequest req;
    req.url = spec_.endpoint;
    req.headers = {{"xi-api-key", key_}};
    add_params_as_form(req);
    req.form.push_back({"file", std::move(bytes), audio.filename().string(), audio_content_type(audio)});
    return req;
  }
  std::string extract(const HttpResponse& response) override {
    return parse_response(response, spec_.provider_id).at("text").get<std::string>();
  }
};

class OpenAiAdapter final : public HttpAdapter {
 public:
  using HttpAdapter::HttpAdapter;

 protected:
  HttpRequest build(const TranscriptionJob&, const std::filesystem::path& audio, std::string bytes) override {
    HttpRequest req;
    req.url = spec_.endpoint;
    req.headers = {{"Authorization", "Bearer " + key_}};
    add_params_as_form(req);
    req.form.push_back({"file", std::move(bytes), audio.filename().string(), audio_content_type(audio)});
    return req;
  }
  std::string extract(const HttpResponse& response) override {
    const auto format = spec_.param("response_format");
    if (!format || plain_value(*format) == "text") {
      std::string text = response.body;
      while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
      return text;
    }
    return parse_response(response, spec_.provider_id).at("text").get<std::string>();
  }
};

class GoogleAdapter final : public HttpAdapter {
 public:
  using HttpAdapter::HttpAdapter;

 protected:
  HttpRequest build(const TranscriptionJob&, const std::filesystem::path&, std::string bytes) override {
    ordered_json config = ordered_json::object();
    for (const auto& p : spec_.params) config[p.name] = ordered_json::parse(p.json);
    HttpRequest req;
    req.url = spec_.endpoint;
    req.headers = {{"Authorization", "Bearer " + key_}};
    req.content_type = "application/json";
    req.body = ordered_json{{"config", config}, {"content", base64_encode(bytes)}}.dump();
    return req;
  }
  std::string extract(const HttpResponse& response) override {
    const json body = parse_response(response, spec_.provider_id);
    std::string text;
    if (body.contains("results")) {
      for (const auto& r : body.at("results")) {
        if (!r.contains("alternatives") || r.at("alternatives").empty()) continue;
        const auto t = r.at("alternatives").at(0).value("transcript", std::string{});
        if (t.empty()) continue;
        if (!text.empty()) text += ' ';
        text += t;
      }
    }
    return text;
  }
};

class AzureAdapter final : public HttpAdapter {
 public:
  using HttpAdapter::HttpAdapter;

 protected:
  HttpRequest build(const TranscriptionJob& job, const std::filesystem::path& audio, std::string bytes) override {
    const auto& locales = spec_.locales.at(job.pair);
    ordered_json definition = ordered_json::object();
    definition["locales"] = locales;
    ordered_json lid = {{"candidateLocales", locales}};
    for (const auto& p : spec_.params) {
      if (p.name == kAzureLidParam) {
        lid["mode"] = ordered_json::parse(p.json);
      } else {
        definition[p.name] = ordered_json::parse(p.json);
      }
    }
    definition["languageIdentification"] = lid;
    HttpRequest req;
    req.url = spec_.endpoint;
    req.headers = {{"Ocp-Apim-Subscription-Key", key_}};
    req.form.push_back({"definition", definition.dump(), "", "application/json"});
    req.form.push_back({"audio", std::move(bytes), audio.filename().string(), "audio/wav"});
    return req;
  }
  std::string extract(const HttpResponse& response) override {
    const json body = parse_response(response, spec_.provider_id);
    const auto& phrases = body.at("combinedPhrases");
    return phrases.empty() ? std::string{} : phrases.at(0).at("text").get<std::string>();
  }
};

class DeepgramAdapter final : public HttpAdapter {
 public:
  using HttpAdapter::HttpAdapter;

 protected:
  HttpRequest build(const TranscriptionJob&, const std::filesystem::path& audio, std::string bytes) override {
    std::string url = spec_.endpoint;
    char sep = url.find('?') == std::string::npos ? '?' : '&';
    for (const auto& p : spec_.params) {
      url += sep;
      url += url_encode(p.name) + "=" + url_encode(plain_value(p.json));
      sep = '&';
    }
    HttpRequest req;
    req.url = std::move(url);
    req.headers = {{"Authorization", "Token " + key_}};
    req.content_type = audio_content_type(audio);
    req.body = std::move(bytes);
    return req;
  }
  std::string extract(const HttpResponse& response) override {
    const json body = parse_response(response, spec_.provider_id);
    return body.at("results").at("channels").at(0).at("alternatives").at(0).at("transcript").get<std::string>();
  }
};

class ReplayAdapter final : public ProviderAdapter {
 public:
  ReplayAdapter(std::shared_ptr<const ReplayTable> table, std::string provider_id)
      : table_(std::move(table)), provider_id_(std::move(provider_id)) {}

  std::string transcribe(const TranscriptionJob& job, const std::filesystem::path&) override {
    if (auto hyp = table_->find(job.sample_id, provider_id_)) return *hyp;
    throw ValidationError("replay", fmt::format("no replay row for sample '{}' and provider '{}'", job.sample_id,
                                                provider_id_));
  }
  bool measures_latency() const override { return false; }

 private:
  std::shared_ptr<const ReplayTable> table_;
  std::string provider_id_;
};

void put_param(ProviderSpec& s, std::string name, const json& value) { s.params.push_back({std::move(name), value.dump()}); }

std::string result_payload(const TranscriptionResult& r) {
  return json{{"status", to_string(r.status)}, {"latency_ms", r.latency_ms}, {"hypothesis_raw", r.hypothesis_raw}}.dump();
}

TranscriptionResult parse_payload(const std::string& payload, const std::string& provider_id,
                                  const std::string& sample_id) {
  try {
    const json j = json::parse(payload);
    const auto status = try_parse_status(j.at("status").get<std::string>());
    if (!status) throw Error("bad status");
    return {sample_id, provider_id, j.at("hypothesis_raw").get<std::string>(), *status,
            j.at("latency_ms").get<std::uint64_t>()};
  } catch (const std::exception& e) {
    throw StoreCorruption(
        fmt::format("unreadable transcription checkpoint for {}/{}: {}", provider_id, sample_id, e.what()));
  }
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::elevenlabs: return "elevenlabs";
    case ProviderKind::openai: return "openai";
    case ProviderKind::google: return "google";
    case ProviderKind::azure: return "azure";
    case ProviderKind::deepgram: return "deepgram";
  }
  return "unknown";
}

std::optional<ProviderKind> try_parse_provider_kind(std::string_view text) noexcept {
  for (auto k : {ProviderKind::elevenlabs, ProviderKind::openai, ProviderKind::google, ProviderKind::azure,
                 ProviderKind::deepgram})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

std::string_view to_string(AudioRequirement requirement) noexcept {
  return requirement == AudioRequirement::original ? "original" : "wav16k_mono";
}

std::optional<AudioRequirement> try_parse_audio_requirement(std::string_view text) noexcept {
  if (text == "original") return AudioRequirement::original;
  if (text == "wav16k_mono") return AudioRequirement::wav16k_mono;
  return std::nullopt;
}

std::optional<std::string> ProviderSpec::param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return p.json;
  return std::nullopt;
}

std::string ProviderSpec::model() const {
  for (const char* name : {"model_id", "model"})
    if (auto v = param(name)) return plain_value(*v);
  return {};
}

std::string default_key_env(std::string_view provider_id) {
  std::string out = "CSB_";
  for (unsigned char c : provider_id) out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
  return out + "_KEY";
}

void validate(const ProviderSpec& spec) {
  if (spec.provider_id.empty()) throw ValidationError("provider_id", "must not be empty");
  for (unsigned char c : spec.provider_id)
    if (!(std::islower(c) || std::isdigit(c) || c == '-' || c == '_'))
      throw ValidationError("provider_id", fmt::format("'{}' may only contain [a-z0-9_-]", spec.provider_id));
  if (spec.endpoint.empty()) throw ValidationError("endpoint", fmt::format("{}: endpoint is required", spec.provider_id));
  if (spec.supported_pairs.empty())
    throw ValidationError("supported_pairs", fmt::format("{}: at least one pair is required", spec.provider_id));
  if (spec.max_concurrency == 0)
    throw ValidationError("max_concurrency", fmt::format("{}: must be positive", spec.provider_id));
  for (const auto& p : spec.params) {
    if (p.name.empty()) throw ValidationError("params", fmt::format("{}: empty parameter name", spec.provider_id));
    if (!json::accept(p.json))
      throw ValidationError("params." + p.name, fmt::format("{}: value is not valid JSON", spec.provider_id));
  }
  if (spec.kind == ProviderKind::deepgram) {
    for (auto pair : spec.supported_pairs)
      if (uses_arabic_script(pair))
        throw ValidationError("supported_pairs",
                              fmt::format("{}: deepgram does not support {}", spec.provider_id, to_code(pair)));
  }
  if (spec.kind == ProviderKind::azure) {
    if (spec.max_concurrency != 1)
      throw ValidationError("max_concurrency", fmt::format("{}: azure requires max_concurrency 1", spec.provider_id));
    if (spec.audio_requirement != AudioRequirement::wav16k_mono)
      throw ValidationError("audio_requirement", fmt::format("{}: azure requires wav16k_mono", spec.provider_id));
    for (auto pair : spec.supported_pairs) {
      const auto it = spec.locales.find(pair);
      if (it == spec.locales.end() || it->second.empty())
        throw ValidationError("locales", fmt::format("{}: no candidate locales for {}", spec.provider_id, to_code(pair)));
      if (it->second.size() > 10)
        throw ValidationError("locales", fmt::format("{}: at most 10 candidate locales for {}", spec.provider_id,
                                                     to_code(pair)));
    }
  }
}

std::vector<ProviderSpec> default_provider_specs() {
  const std::set<LanguagePair> all(kAllPairs.begin(), kAllPairs.end());
  std::vector<ProviderSpec> out;

  ProviderSpec eleven;
  eleven.provider_id = "elevenlabs";
  eleven.kind = ProviderKind::elevenlabs;
  eleven.endpoint = "https://api.elevenlabs.io/v1/speech-to-text";
  put_param(eleven, "model_id", "scribe_v2");
  put_param(eleven, "diarize", false);
  put_param(eleven, "no_verbatim", false);
  eleven.supported_pairs = all;
  eleven.max_concurrency = 4;
  out.push_back(eleven);

  ProviderSpec openai;
  openai.provider_id = "openai";
  openai.kind = ProviderKind::openai;
  openai.endpoint = "https://api.openai.com/v1/audio/transcriptions";
  put_param(openai, "model", "gpt-4o-transcribe");
  put_param(openai, "response_format", "text");
  put_param(openai, "temperature", 0);
  openai.supported_pairs = all;
  openai.max_concurrency = 4;
  out.push_back(openai);

  ProviderSpec google;
  google.provider_id = "google";
  google.kind = ProviderKind::google;
  google.endpoint =
      "https://us-speech.googleapis.com/v2/projects/PROJECT_ID/locations/us/recognizers/_:recognize";
  put_param(google, "model", "chirp_3");
  put_param(google, "language_codes", json::array({"auto"}));
  put_param(google, "auto_decoding_config", json::object());
  google.supported_pairs = all;
  google.max_concurrency = 4;
  out.push_back(google);

  ProviderSpec azure;
  azure.provider_id = "azure";
  azure.kind = ProviderKind::azure;
  azure.endpoint =
      "https://eastus.api.cognitive.microsoft.com/speechtotext/transcriptions:transcribe?api-version=2024-11-15";
  put_param(azure, std::string(kAzureLidParam), "Continuous");
  azure.locales = {
      {LanguagePair::EgyptianArabicEnglish, {"ar-EG", "en-US", "ar-SA", "en-GB"}},
      {LanguagePair::SaudiArabicEnglish, {"ar-SA", "en-US", "ar-EG", "en-GB"}},
      {LanguagePair::PersianEnglish, {"fa-IR", "en-US", "en-GB", "ar-SA"}},
      {LanguagePair::GermanEnglish, {"de-DE", "en-US", "de-AT", "en-GB"}},
  };
  azure.supported_pairs = all;
  azure.max_concurrency = 1;
  azure.audio_requirement = AudioRequirement::wav16k_mono;
  out.push_back(azure);

  ProviderSpec deepgram;
  deepgram.provider_id = "deepgram";
  deepgram.kind = ProviderKind::deepgram;
  deepgram.endpoint = "https://api.deepgram.com/v1/listen";
  put_param(deepgram, "model", "nova-3");
  put_param(deepgram, "language", "multi");
  put_param(deepgram, "smart_format", true);
  put_param(deepgram, "punctuate", true);
  deepgram.supported_pairs = {LanguagePair::GermanEnglish};
  deepgram.max_concurrency = 4;
  out.push_back(deepgram);

  for (auto& s : out) s.api_key_env = default_key_env(s.provider_id);
  return out;
}

std::vector<ProviderSpec> parse_provider_specs(std::string_view json_text, std::string_view source) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(fmt::format("{}: invalid JSON: {}", source, e.what()));
  }
  if (!root.is_object() || !root.contains("providers") || !root["providers"].is_array())
    throw ValidationError("providers", fmt::format("{}: expected an object with a 'providers' array", source));

  std::vector<ProviderSpec> out;
  std::set<std::string> ids;
  const auto& list = root["providers"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& p = list[i];
    if (!p.is_object()) throw ValidationError(fmt::format("providers[{}]", i), "expected an object");
    auto str = [&](const char* name, bool required) -> std::string {
      if (!p.contains(name)) {
        if (required) throw ValidationError(field(i, name), "is required");
        return {};
      }
      if (!p[name].is_string()) throw ValidationError(field(i, name), "must be a string");
      return p[name].get<std::string>();
    };
    ProviderSpec s;
    s.provider_id = str("provider_id", true);
    const auto kind = try_parse_provider_kind(str("kind", true));
    if (!kind) throw ValidationError(field(i, "kind"), fmt::format("unknown provider kind '{}'", p["kind"].dump()));
    s.kind = *kind;
    s.endpoint = str("endpoint", true);
    if (p.contains("params")) {
      if (!p["params"].is_object()) throw ValidationError(field(i, "params"), "must be an object");
      for (const auto& [k, v] : p["params"].items()) s.params.push_back({k, v.dump()});
    }
    if (p.contains("locales")) {
      if (!p["locales"].is_object()) throw ValidationError(field(i, "locales"), "must be an object");
      for (const auto& [k, v] : p["locales"].items()) {
        const auto pair = try_parse_pair(k);
        if (!pair) throw ValidationError(field(i, "locales"), fmt::format("unknown pair '{}'", k));
        try {
          s.locales[*pair] = v.get<std::vector<std::string>>();
        } catch (const ordered_json::exception&) {
          throw ValidationError(field(i, "locales." + k), "must be a list of strings");
        }
      }
    }
    if (!p.contains("supported_pairs") || !p["supported_pairs"].is_array())
      throw ValidationError(field(i, "supported_pairs"), "must be a list of pair codes");
    for (const auto& v : p["supported_pairs"]) {
      const auto pair = v.is_string() ? try_parse_pair(v.get<std::string>()) : std::nullopt;
      if (!pair) throw ValidationError(field(i, "supported_pairs"), fmt::format("unknown pair {}", v.dump()));
      s.supported_pairs.insert(*pair);
    }
    if (p.contains("max_concurrency")) {
      if (!p["max_concurrency"].is_number_unsigned())
        throw ValidationError(field(i, "max_concurrency"), "must be a positive integer");
      s.max_concurrency = p["max_concurrency"].get<std::size_t>();
    }
    if (p.contains("audio_requirement")) {
      const auto req = try_parse_audio_requirement(str("audio_requirement", true));
      if (!req) throw ValidationError(field(i, "audio_requirement"), "must be 'original' or 'wav16k_mono'");
      s.audio_requirement = *req;
    }
    s.api_key_env = str("api_key_env", false);
    if (s.api_key_env.empty()) s.api_key_env = default_key_env(s.provider_id);
    try {
      validate(s);
    } catch (const ValidationError& e) {
      throw ValidationError(field(i, e.field()), e.detail());
    }
    if (!ids.insert(s.provider_id).second)
      throw ValidationError(field(i, "provider_id"), fmt::format("duplicate provider id '{}'", s.provider_id));
    out.push_back(std::move(s));
  }
  return out;
}

std::string provider_specs_to_json(std::span<const ProviderSpec> specs) {
  ordered_json list = ordered_json::array();
  for (const auto& s : specs) {
    ordered_json params = ordered_json::object();
    for (const auto& p : s.params) params[p.name] = ordered_json::parse(p.json);
    ordered_json j;
    j["provider_id"] = s.provider_id;
    j["kind"] = to_string(s.kind);
    j["endpoint"] = s.endpoint;
    j["params"] = params;
    if (!s.locales.empty()) {
      ordered_json loc = ordered_json::object();
      for (const auto& [pair, l] : s.locales) loc[std::string(to_code(pair))] = l;
      j["locales"] = loc;
    }
    ordered_json pairs = ordered_json::array();
    for (auto pair : s.supported_pairs) pairs.push_back(to_code(pair));
    j["supported_pairs"] = pairs;
    j["max_concurrency"] = s.max_concurrency;
    j["audio_requirement"] = to_string(s.audio_requirement);
    j["api_key_env"] = s.api_key_env;
    list.push_back(j);
  }
  return ordered_json{{"providers", list}}.dump(2) + "\n";
}

std::vector<TranscriptionJob> make_jobs(const Dataset& dataset, const std::filesystem::path& audio_root) {
  std::vector<TranscriptionJob> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) out.push_back({s.id, audio_root / s.audio_ref, s.pair});
  return out;
}

std::unique_ptr<ProviderAdapter> make_adapter(const ProviderSpec& spec, std::shared_ptr<Transport> transport,
                                              const SecretLookup& secrets) {
  validate(spec);
  const std::string env = spec.api_key_env.empty() ? default_key_env(spec.provider_id) : spec.api_key_env;
  const auto key = secrets(env);
  if (!key || key->empty())
    throw ValidationError("api_key_env", fmt::format("{}: environment variable {} is not set", spec.provider_id, env));
  switch (spec.kind) {
    case ProviderKind::elevenlabs: return std::make_unique<ElevenLabsAdapter>(spec, std::move(transport), *key);
    case ProviderKind::openai: return std::make_unique<OpenAiAdapter>(spec, std::move(transport), *key);
    case ProviderKind::google: return std::make_unique<GoogleAdapter>(spec, std::move(transport), *key);
    case ProviderKind::azure: return std::make_unique<AzureAdapter>(spec, std::move(transport), *key);
    case ProviderKind::deepgram: return std::make_unique<DeepgramAdapter>(spec, std::move(transport), *key);
  }
  throw Error("unknown provider kind");
}

ReplayTable ReplayTable::load(const std::filesystem::path& path) {
  ReplayTable t;
  for (auto& row : tsv::read_table(path, kReplayColumns)) {
    if (row.fields[0].empty() || row.fields[1].empty())
      throw ParseError(path.string(), row.line, "sample_id and provider_id must not be empty");
    const auto key = std::make_pair(row.fields[0], row.fields[1]);
    if (t.rows_.contains(key))
      throw ParseError(path.string(), row.line,
                       fmt::format("duplicate replay row for '{}' / '{}'", row.fields[0], row.fields[1]));
    t.rows_.emplace(key, std::move(row.fields[2]));
  }
  return t;
}

void ReplayTable::add(std::string sample_id, std::string provider_id, std::string hypothesis) {
  rows_[{std::move(sample_id), std::move(provider_id)}] = std::move(hypothesis);
}

std::optional<std::string> ReplayTable::find(std::string_view sample_id, std::string_view provider_id) const {
  const auto it = rows_.find(std::make_pair(std::string(sample_id), std::string(provider_id)));
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::unique_ptr<ProviderAdapter> make_replay_adapter(std::shared_ptr<const ReplayTable> table, std::string provider_id) {
  return std::make_unique<ReplayAdapter>(std::move(table), std::move(provider_id));
}

FfmpegConverter::FfmpegConverter(std::filesystem::path cache_dir, std::string binary)
    : cache_dir_(std::move(cache_dir)), binary_(std::move(binary)) {}

std::vector<std::string> FfmpegConverter::arguments(const std::filesystem::path& input,
                                                    const std::filesystem::path& output) {
  return {"-nostdin", "-y", "-i", input.string(), "-ac", "1", "-ar", "16000", "-c:a", "pcm_s16le", output.string()};
}

std::filesystem::path FfmpegConverter::to_wav16k_mono(const std::filesystem::path& input) {
  const std::string bytes = read_file(input);
  const std::filesystem::path target = cache_dir_ / (sha256_hex(bytes) + ".wav");
  std::lock_guard lock(mu_);
  if (std::filesystem::exists(target)) return target;
  std::filesystem::create_directories(cache_dir_);
  const std::filesystem::path tmp = cache_dir_ / fmt::format("{}.tmp.{}.wav", target.stem().string(), ::getpid());

  std::vector<std::string> argv = {binary_};
  for (auto& a : arguments(input, tmp)) argv.push_back(std::move(a));
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, binary_.c_str(), &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw IoError(fmt::format("cannot run audio converter '{}': {}", binary_, std::strerror(rc)));
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || !std::filesystem::exists(tmp)) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("audio converter failed on {}", input.string()));
  }
  std::filesystem::rename(tmp, target);
  ++conversions_;
  return target;
}

TranscriptionResult transcribe(const TranscriptionJob& job, const ProviderRuntime& provider,
                               const TranscribeOptions& options, std::atomic<std::size_t>* calls) {
  TranscriptionResult result{job.sample_id, provider.spec.provider_id, "", TranscriptionStatus::ok, 0};
  if (!provider.spec.supports(job.pair)) {
    result.status = TranscriptionStatus::unsupported_pair;
    return result;
  }
  if (!std::filesystem::is_regular_file(job.audio_path))
    throw IoError(fmt::format("audio file for sample '{}' not found: {}", job.sample_id, job.audio_path.string()));
  if (!provider.adapter) throw Error(fmt::format("provider '{}' has no adapter", provider.spec.provider_id));

  const auto start = std::chrono::steady_clock::now();
  try {
    std::filesystem::path audio = job.audio_path;
    if (provider.spec.audio_requirement == AudioRequirement::wav16k_mono) {
      if (!options.converter)
        throw Error(fmt::format("provider '{}' needs 16 kHz mono WAV but no converter is configured",
                                provider.spec.provider_id));
      audio = options.converter->to_wav16k_mono(job.audio_path);
    }
    result.hypothesis_raw = with_backoff(
        options.retry,
        [&] {
          if (calls) calls->fetch_add(1);
          return provider.adapter->transcribe(job, audio);
        },
        options.sleep);
  } catch (const Error& e) {
    result.status = TranscriptionStatus::provider_error;
    result.hypothesis_raw.clear();
    if (options.on_error)
      options.on_error(fmt::format("{} / {}: {}", provider.spec.provider_id, job.sample_id, e.what()));
  }
  if (provider.adapter->measures_latency()) {
    result.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
  }
  return result;
}

BenchmarkRun run_benchmark(std::span<const TranscriptionJob> jobs, std::span<const ProviderRuntime> providers,
                           const BenchmarkOptions& options) {
  for (const auto& job : jobs) {
    const bool needed = std::any_of(providers.begin(), providers.end(),
                                    [&](const ProviderRuntime& p) { return p.spec.supports(job.pair); });
    if (needed && !std::filesystem::is_regular_file(job.audio_path))
      throw IoError(fmt::format("audio file for sample '{}' not found: {}", job.sample_id, job.audio_path.string()));
  }

  BenchmarkRun run;
  run.results.resize(jobs.size() * providers.size());
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> resumed{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto work = [&](std::size_t p, std::atomic<std::size_t>& next) {
    const auto& provider = providers[p];
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      {
        std::lock_guard lock(error_mu);
        if (first_error) return;
      }
      const auto& job = jobs[j];
      auto& slot = run.results[p * jobs.size() + j];
      try {
        const std::string key = provider.spec.provider_id + "\t" + job.sample_id;
        if (options.store && provider.spec.supports(job.pair)) {
          if (auto payload = options.store->get(options.checkpoint_namespace, key)) {
            slot = parse_payload(*payload, provider.spec.provider_id, job.sample_id);
            resumed.fetch_add(1);
            continue;
          }
        }
        slot = transcribe(job, provider, options.transcribe, &calls);
        if (options.store && slot.status == TranscriptionStatus::ok)
          options.store->put(options.checkpoint_namespace, key, result_payload(slot));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::atomic<std::size_t>> cursors(providers.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t p = 0; p < providers.size(); ++p) {
      const std::size_t n =
          std::max<std::size_t>(1, std::min({providers[p].spec.max_concurrency, std::max<std::size_t>(options.jobs, 1),
                                             jobs.size()}));
      for (std::size_t w = 0; w < n && !jobs.empty(); ++w) workers.emplace_back(work, p, std::ref(cursors[p]));
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  run.provider_calls = calls.load();
  run.resumed = resumed.load();
  return run;
}

}  // namespace csb
