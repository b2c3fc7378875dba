#pragma once

#include <functional>
#include <memory>
#include <string>

#include "csb/ensemble.hpp"
#include "csb/transport.hpp"

namespace csb {

enum class JudgeKind { openai, gemini, stub };

struct JudgeConfig {
  std::string id;
  JudgeKind kind = JudgeKind::stub;
  std::string endpoint;  // e.g. https://api.openai.com
  std::string model;
  double temperature = 0.1;
  int max_output_tokens = 2048;
  std::string api_key_env;  // CSB_JUDGE_A_KEY / CSB_JUDGE_B_KEY
  std::uint64_t seed = 0;   // stub only
};

std::string_view to_string(JudgeKind kind) noexcept;
std::optional<JudgeKind> try_parse_judge_kind(std::string_view text) noexcept;

// Throws ValidationError naming the first invalid field.
void validate(const JudgeConfig& config);

using SecretLookup = std::function<std::optional<std::string>(const std::string& env)>;
SecretLookup environment_secrets();

// openai: chat completions with a JSON-object response format.
// gemini: generateContent with an application/json response MIME type.
// stub: deterministic offline judge, scores derived from the prompt hash.
std::unique_ptr<JudgeClient> make_judge(const JudgeConfig& config, std::shared_ptr<Transport> transport,
                                        const SecretLookup& secrets = environment_secrets());

// Deterministic judge that needs no network. Identical prompts always
// produce identical responses for the same (id, seed).
class StubJudge final : public JudgeClient {
 public:
  StubJudge(std::string id, std::uint64_t seed);
  const std::string& id() const override { return id_; }
  std::string complete(const std::string& prompt) override;

 private:
  std::string id_;
  std::uint64_t seed_;
};

}  // namespace csb
