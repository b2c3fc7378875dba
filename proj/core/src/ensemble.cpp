#include "csb/ensemble.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <future>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>
#include <variant>

#include "csb/error.hpp"
#include "csb/tsv.hpp"

namespace csb {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kResponseSchema = R"({
  "overall_score": <int 1-10>,
  "dimensions": {
    "morphological_blending":         {"score": <int 1-10>, "evidence": "..."},
    "switching_density":              {"score": <int 1-10>, "evidence": "..."},
    "slang_and_register_mix":         {"score": <int 1-10>, "evidence": "..."},
    "phonological_ambiguity":         {"score": <int 1-10>, "evidence": "..."},
    "named_entity_jargon_density":    {"score": <int 1-10>, "evidence": "..."},
    "script_orthographic_complexity": {"score": <int 1-10>, "evidence": "..."}
  },
  "hard_tokens": [{"token": "...", "reason": "..."}],
  "summary": "..."
})";

std::string_view dimension_hint(Dimension d) {
  switch (d) {
    case Dimension::MorphologicalBlending: return "affixes from one language attached to stems from the other";
    case Dimension::SwitchingDensity: return "how often the language changes inside the sentence";
    case Dimension::SlangRegisterMix: return "colloquial dialect forms combined with domain jargon";
    case Dimension::PhonologicalAmbiguity: return "words that sound plausible in either language";
    case Dimension::NamedEntityJargonDensity: return "brands, technical terms and proper nouns in mixed context";
    case Dimension::ScriptOrthographicComplexity: return "inconsistent romanisation and mixed-script tokens";
  }
  return "";
}

int require_score(const ordered_json& obj, const char* key, const std::string& field) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(field, "missing");
  if (!it->is_number_integer()) throw ValidationError(field, fmt::format("expected an integer, got {}", it->dump()));
  const auto v = it->get<long long>();
  if (v < kMinScore || v > kMaxScore)
    throw ValidationError(field, fmt::format("value {} outside [{}, {}]", v, kMinScore, kMaxScore));
  return static_cast<int>(v);
}

std::string require_string(const ordered_json& obj, const char* key, const std::string& field) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(field, "missing");
  if (!it->is_string()) throw ValidationError(field, "expected a string");
  return it->get<std::string>();
}

const ordered_json& require_object(const ordered_json& obj, const char* key, const std::string& field) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(field, "missing");
  if (!it->is_object()) throw ValidationError(field, "expected an object");
  return *it;
}

std::string join(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : fmt::format("{}.{}", prefix, key);
}

JudgeAssessment judge_from_json(const ordered_json& root, std::string judge_id, std::string_view prefix) {
  if (!root.is_object()) throw ValidationError(prefix.empty() ? "response" : std::string(prefix), "expected a JSON object");
  JudgeAssessment a;
  a.judge_id = std::move(judge_id);
  a.overall_score = require_score(root, "overall_score", join(prefix, "overall_score"));

  const std::string dims_field = join(prefix, "dimensions");
  const auto& dims = require_object(root, "dimensions", dims_field);
  for (const auto& [key, value] : dims.items())
    if (!try_parse_dimension(key)) throw ValidationError(join(dims_field, key), "unknown dimension");
  for (auto d : kAllDimensions) {
    const std::string f = join(dims_field, dimension_key(d));
    const auto it = dims.find(std::string(dimension_key(d)));
    if (it == dims.end()) throw ValidationError(f, "missing dimension");
    if (!it->is_object()) throw ValidationError(f, "expected an object");
    auto& slot = a.dimensions[static_cast<std::size_t>(d)];
    slot.dimension = d;
    slot.score = require_score(*it, "score", join(f, "score"));
    slot.evidence = require_string(*it, "evidence", join(f, "evidence"));
  }

  const std::string tokens_field = join(prefix, "hard_tokens");
  const auto tokens = root.find("hard_tokens");
  if (tokens == root.end()) throw ValidationError(tokens_field, "missing");
  if (!tokens->is_array()) throw ValidationError(tokens_field, "expected an array");
  if (tokens->size() > kMaxHardTokens)
    throw ValidationError(tokens_field, fmt::format("{} entries exceed the limit of {}", tokens->size(), kMaxHardTokens));
  for (std::size_t i = 0; i < tokens->size(); ++i) {
    const auto& t = (*tokens)[i];
    const std::string f = fmt::format("{}[{}]", tokens_field, i);
    if (!t.is_object()) throw ValidationError(f, "expected an object");
    a.hard_tokens.push_back({require_string(t, "token", join(f, "token")), require_string(t, "reason", join(f, "reason"))});
  }

  a.summary = require_string(root, "summary", join(prefix, "summary"));
  return a;
}

ordered_json judge_to_json(const JudgeAssessment& a) {
  ordered_json j;
  j["judge_id"] = a.judge_id;
  j["overall_score"] = a.overall_score;
  ordered_json dims = ordered_json::object();
  for (const auto& d : a.dimensions)
    dims[std::string(dimension_key(d.dimension))] = {{"score", d.score}, {"evidence", d.evidence}};
  j["dimensions"] = std::move(dims);
  ordered_json tokens = ordered_json::array();
  for (const auto& t : a.hard_tokens) tokens.push_back({{"token", t.token}, {"reason", t.reason}});
  j["hard_tokens"] = std::move(tokens);
  j["summary"] = a.summary;
  return j;
}

}  // namespace

std::string_view dimension_key(Dimension d) noexcept {
  switch (d) {
    case Dimension::MorphologicalBlending: return "morphological_blending";
    case Dimension::SwitchingDensity: return "switching_density";
    case Dimension::SlangRegisterMix: return "slang_and_register_mix";
    case Dimension::PhonologicalAmbiguity: return "phonological_ambiguity";
    case Dimension::NamedEntityJargonDensity: return "named_entity_jargon_density";
    case Dimension::ScriptOrthographicComplexity: return "script_orthographic_complexity";
  }
  return "?";
}

std::optional<Dimension> try_parse_dimension(std::string_view key) noexcept {
  for (auto d : kAllDimensions)
    if (dimension_key(d) == key) return d;
  return std::nullopt;
}

std::string build_prompt(const Sample& sample) {
  std::string dims;
  for (auto d : kAllDimensions) dims += fmt::format("- {}: {}\n", dimension_key(d), dimension_hint(d));
  return fmt::format(
      "You are assessing how hard a code-switched utterance would be for automatic speech recognition.\n"
      "\n"
      "Language pair: {} ({})\n"
      "Transcript (JSON string): {}\n"
      "\n"
      "Rate the transcript on each dimension below from 1 (no difficulty) to 10 (extreme difficulty) "
      "and quote the words from the transcript that justify each score as evidence.\n"
      "{}"
      "\n"
      "Also give an overall_score from 1 to 10, list at most {} hard_tokens, each with a one-sentence "
      "reason why it is risky for speech recognition, and write a one-sentence summary.\n"
      "\n"
      "Reply with a single JSON object and nothing else, using exactly this structure:\n"
      "{}\n",
      display_name(sample.pair), to_code(sample.pair), nlohmann::json(sample.transcript).dump(), dims,
      kMaxHardTokens, kResponseSchema);
}

JudgeAssessment parse_assessment(std::string_view raw, std::string judge_id) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw ValidationError("response", "no JSON object found (empty or truncated output)");
  ordered_json root;
  try {
    root = ordered_json::parse(raw.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("response", fmt::format("malformed JSON: {}", e.what()));
  }
  return judge_from_json(root, std::move(judge_id), "");
}

EnsembleAssessment combine(const JudgeAssessment& a, const JudgeAssessment& b, std::string sample_id) {
  if (a.judge_id == b.judge_id)
    throw ValidationError("judge_id", fmt::format("both assessments come from judge '{}'", a.judge_id));
  EnsembleAssessment e;
  e.sample_id = std::move(sample_id);
  e.judges = {a, b};
  e.ensemble_score = static_cast<double>(a.overall_score + b.overall_score) / 2.0;
  for (auto d : kAllDimensions) {
    const int diff = std::abs(a.score_for(d).score - b.score_for(d).score);
    if (diff > kDisagreementThreshold) e.flag_reasons.push_back({d, diff});
  }
  e.flagged = !e.flag_reasons.empty();
  return e;
}

std::string to_json_line(const EnsembleAssessment& e) {
  ordered_json j;
  j["sample_id"] = e.sample_id;
  j["ensemble_score"] = e.ensemble_score;
  j["flagged"] = e.flagged;
  ordered_json reasons = ordered_json::array();
  for (const auto& r : e.flag_reasons)
    reasons.push_back({{"dimension", std::string(dimension_key(r.dimension))}, {"difference", r.difference}});
  j["flag_reasons"] = std::move(reasons);
  j["judges"] = ordered_json::array({judge_to_json(e.judges[0]), judge_to_json(e.judges[1])});
  return j.dump();
}

EnsembleAssessment from_json_line(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("assessment", fmt::format("malformed JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ValidationError("assessment", "expected a JSON object");
  const std::string sample_id = require_string(j, "sample_id", "sample_id");
  const auto judges = j.find("judges");
  if (judges == j.end() || !judges->is_array() || judges->size() != 2)
    throw ValidationError("judges", "expected exactly two judge assessments");
  std::array<JudgeAssessment, 2> parsed;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string prefix = fmt::format("judges[{}]", i);
    parsed[i] = judge_from_json((*judges)[i], require_string((*judges)[i], "judge_id", join(prefix, "judge_id")), prefix);
  }
  EnsembleAssessment e = combine(parsed[0], parsed[1], sample_id);

  const auto score = j.find("ensemble_score");
  if (score == j.end() || !score->is_number() || score->get<double>() != e.ensemble_score)
    throw ValidationError("ensemble_score", "missing or inconsistent with the judges' overall scores");
  const auto flagged = j.find("flagged");
  if (flagged == j.end() || !flagged->is_boolean() || flagged->get<bool>() != e.flagged)
    throw ValidationError("flagged", "missing or inconsistent with the dimension scores");
  return e;
}

void write_assessments(const std::filesystem::path& path, std::span<const EnsembleAssessment> assessments) {
  std::string out;
  for (const auto& a : assessments) {
    out += to_json_line(a);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<EnsembleAssessment> load_assessments(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<EnsembleAssessment> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

namespace {

using JudgeOutcome = std::variant<JudgeAssessment, std::string>;

JudgeOutcome assess(JudgeClient& judge, const std::string& prompt, const ScoringOptions& options,
                    std::atomic<std::size_t>& calls) {
  std::string last_error;
  for (int round = 0; round <= options.validation_rerequests; ++round) {
    std::string raw;
    try {
      raw = with_backoff(options.transport_retry, [&] {
        calls.fetch_add(1, std::memory_order_relaxed);
        return judge.complete(prompt);
      });
    } catch (const TransportError& e) {
      return fmt::format("judge {}: transport failure after {} attempts: {}", judge.id(),
                         options.transport_retry.attempts, e.what());
    } catch (const ValidationError& e) {
      last_error = e.what();
      continue;
    } catch (const std::exception& e) {
      return fmt::format("judge {}: {}", judge.id(), e.what());
    }
    try {
      return parse_assessment(raw, judge.id());
    } catch (const ValidationError& e) {
      last_error = e.what();
    }
  }
  return fmt::format("judge {}: invalid response: {}", judge.id(), last_error);
}

}  // namespace

ScoringRun score_candidates(std::span<const Sample> candidates, JudgeClient& judge_a, JudgeClient& judge_b,
                            CheckpointStore& store, const ScoringOptions& options) {
  if (judge_a.id() == judge_b.id())
    throw ValidationError("judge_id", fmt::format("both judges are '{}'", judge_a.id()));

  const std::size_t n = candidates.size();
  std::vector<std::optional<EnsembleAssessment>> done(n);
  std::vector<std::optional<FailedSample>> failed(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> resumed{0};
  std::atomic<bool> abort{false};
  std::exception_ptr error;
  std::mutex error_mu;
  const char* ns = options.checkpoint_namespace;

  auto worker = [&] {
    try {
      for (std::size_t i; !abort.load() && (i = next.fetch_add(1)) < n;) {
        const Sample& sample = candidates[i];
        if (auto payload = store.get(ns, sample.id)) {
          try {
            done[i] = from_json_line(*payload);
          } catch (const Error& e) {
            throw StoreCorruption(fmt::format("stored assessment for '{}' is unreadable: {}", sample.id, e.what()));
          }
          if (done[i]->sample_id != sample.id)
            throw StoreCorruption(fmt::format("stored assessment under '{}' names sample '{}'", sample.id, done[i]->sample_id));
          resumed.fetch_add(1);
          continue;
        }

        const std::string prompt = build_prompt(sample);
        auto second = std::async(std::launch::async, [&] { return assess(judge_b, prompt, options, calls); });
        JudgeOutcome first = assess(judge_a, prompt, options, calls);
        JudgeOutcome other = second.get();

        if (auto* ea = std::get_if<std::string>(&first)) {
          failed[i] = FailedSample{sample.id, *ea};
        } else if (auto* eb = std::get_if<std::string>(&other)) {
          failed[i] = FailedSample{sample.id, *eb};
        } else {
          auto combined = combine(std::get<JudgeAssessment>(first), std::get<JudgeAssessment>(other), sample.id);
          store.put(ns, sample.id, to_json_line(combined));
          done[i] = std::move(combined);
        }
      }
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      abort.store(true);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(options.max_in_flight, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  ScoringRun run;
  run.judge_calls = calls.load();
  run.resumed = resumed.load();
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) run.assessments.push_back(std::move(*done[i]));
    if (failed[i]) run.failed.push_back(std::move(*failed[i]));
  }
  return run;
}

}  // namespace csb
