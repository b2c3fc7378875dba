#include "csb/judges.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "csb/hash.hpp"

namespace csb {
namespace {

using json = nlohmann::json;

std::string trim_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

class RemoteJudge : public JudgeClient {
 public:
  RemoteJudge(JudgeConfig config, std::shared_ptr<Transport> transport, std::string key)
      : config_(std::move(config)), transport_(std::move(transport)), key_(std::move(key)) {}

  const std::string& id() const override { return config_.id; }

 protected:
  JudgeConfig config_;
  std::shared_ptr<Transport> transport_;
  std::string key_;
};

json parse_body(const HttpResponse& response, const std::string& who) {
  try {
    return json::parse(response.body);
  } catch (const json::parse_error& e) {
    throw ValidationError("response", fmt::format("{} returned a non-JSON body: {}", who, e.what()));
  }
}

class OpenAiJudge final : public RemoteJudge {
 public:
  using RemoteJudge::RemoteJudge;

  std::string complete(const std::string& prompt) override {
    HttpRequest req;
    req.url = trim_slash(config_.endpoint) + "/v1/chat/completions";
    req.headers = {{"Authorization", "Bearer " + key_}};
    req.content_type = "application/json";
    req.body = json{{"model", config_.model},
                    {"temperature", config_.temperature},
                    {"max_tokens", config_.max_output_tokens},
                    {"response_format", {{"type", "json_object"}}},
                    {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}}
                   .dump();
    const json body = parse_body(transport_->send(req), config_.id);
    try {
      return extract(body);
    } catch (const json::exception& e) {
      throw ValidationError("response", fmt::format("{} response envelope: {}", config_.id, e.what()));
    }
  }

 private:
  std::string extract(const json& body) const {
    const auto& choice = body.at("choices").at(0);
    if (choice.value("finish_reason", "") == "length")
      throw ValidationError("response", fmt::format("{} output truncated at the token limit", config_.id));
    const auto& content = choice.at("message").at("content");
    if (!content.is_string()) throw ValidationError("response", "empty completion");
    return content.get<std::string>();
  }
};

class GeminiJudge final : public RemoteJudge {
 public:
  using RemoteJudge::RemoteJudge;

  std::string complete(const std::string& prompt) override {
    HttpRequest req;
    req.url = fmt::format("{}/v1beta/models/{}:generateContent", trim_slash(config_.endpoint), config_.model);
    req.headers = {{"x-goog-api-key", key_}};
    req.content_type = "application/json";
    req.body = json{{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt}}})}}})},
                    {"generationConfig",
                     {{"temperature", config_.temperature},
                      {"maxOutputTokens", config_.max_output_tokens},
                      {"responseMimeType", "application/json"}}}}
                   .dump();
    const json body = parse_body(transport_->send(req), config_.id);
    try {
      return extract(body);
    } catch (const json::exception& e) {
      throw ValidationError("response", fmt::format("{} response envelope: {}", config_.id, e.what()));
    }
  }

 private:
  std::string extract(const json& body) const {
    const auto& candidate = body.at("candidates").at(0);
    if (candidate.value("finishReason", "") == "MAX_TOKENS")
      throw ValidationError("response", fmt::format("{} output truncated at the token limit", config_.id));
    std::string text;
    for (const auto& part : candidate.at("content").at("parts")) text += part.value("text", "");
    return text;
  }
};

}  // namespace

std::string_view to_string(JudgeKind kind) noexcept {
  switch (kind) {
    case JudgeKind::openai: return "openai";
    case JudgeKind::gemini: return "gemini";
    case JudgeKind::stub: return "stub";
  }
  return "?";
}

std::optional<JudgeKind> try_parse_judge_kind(std::string_view text) noexcept {
  for (auto k : {JudgeKind::openai, JudgeKind::gemini, JudgeKind::stub})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

void validate(const JudgeConfig& c) {
  if (c.id.empty()) throw ValidationError("id", "judge id must not be empty");
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0))
    throw ValidationError("temperature", fmt::format("{} outside [0, 2]", c.temperature));
  if (c.max_output_tokens <= 0) throw ValidationError("max_output_tokens", "must be positive");
  if (c.kind == JudgeKind::stub) return;
  if (c.endpoint.find("://") == std::string::npos)
    throw ValidationError("endpoint", fmt::format("'{}' is not an absolute URL", c.endpoint));
  if (c.model.empty()) throw ValidationError("model", "model name must not be empty");
  if (c.api_key_env.empty()) throw ValidationError("api_key_env", "name the environment variable holding the key");
}

SecretLookup environment_secrets() {
  return [](const std::string& env) -> std::optional<std::string> {
    if (const char* v = std::getenv(env.c_str()); v != nullptr && *v != '\0') return std::string(v);
    return std::nullopt;
  };
}

std::unique_ptr<JudgeClient> make_judge(const JudgeConfig& config, std::shared_ptr<Transport> transport,
                                        const SecretLookup& secrets) {
  validate(config);
  if (config.kind == JudgeKind::stub) return std::make_unique<StubJudge>(config.id, config.seed);
  auto key = secrets(config.api_key_env);
  if (!key) throw ValidationError("api_key_env", fmt::format("environment variable {} is not set", config.api_key_env));
  if (!transport) throw Error("remote judge requires a transport");
  if (config.kind == JudgeKind::openai) return std::make_unique<OpenAiJudge>(config, std::move(transport), *key);
  return std::make_unique<GeminiJudge>(config, std::move(transport), *key);
}

StubJudge::StubJudge(std::string id, std::uint64_t seed) : id_(std::move(id)), seed_(seed) {}

std::string StubJudge::complete(const std::string& prompt) {
  std::uint64_t h = fnv1a64(prompt, fnv1a64(id_, 0xcbf29ce484222325ULL ^ seed_));
  auto next = [&h] {
    // splitmix64
    h += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  json dims = json::object();
  for (auto d : kAllDimensions)
    dims[std::string(dimension_key(d))] = {{"score", static_cast<int>(next() % 10) + 1}, {"evidence", "stub"}};
  return json{{"overall_score", static_cast<int>(next() % 10) + 1},
              {"dimensions", dims},
              {"hard_tokens", json::array()},
              {"summary", fmt::format("deterministic stub assessment by {}", id_)}}
      .dump();
}

}  // namespace csb
