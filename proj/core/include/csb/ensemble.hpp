#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csb/checkpoint.hpp"
#include "csb/corpus.hpp"
#include "csb/transport.hpp"

namespace csb {

enum class Dimension : std::uint8_t {
  MorphologicalBlending,
  SwitchingDensity,
  SlangRegisterMix,
  PhonologicalAmbiguity,
  NamedEntityJargonDensity,
  ScriptOrthographicComplexity,
};

inline constexpr std::array<Dimension, 6> kAllDimensions = {
    Dimension::MorphologicalBlending,    Dimension::SwitchingDensity,
    Dimension::SlangRegisterMix,         Dimension::PhonologicalAmbiguity,
    Dimension::NamedEntityJargonDensity, Dimension::ScriptOrthographicComplexity,
};

// JSON keys of the judge response schema, e.g. "switching_density".
std::string_view dimension_key(Dimension d) noexcept;
std::optional<Dimension> try_parse_dimension(std::string_view key) noexcept;

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;
inline constexpr std::size_t kMaxHardTokens = 5;
// Rows whose judges differ by more than this on any dimension are flagged.
inline constexpr int kDisagreementThreshold = 3;

struct DimensionScore {
  Dimension dimension = Dimension::MorphologicalBlending;
  int score = kMinScore;
  std::string evidence;

  bool operator==(const DimensionScore&) const = default;
};

struct HardToken {
  std::string token;
  std::string reason;

  bool operator==(const HardToken&) const = default;
};

struct JudgeAssessment {
  std::string judge_id;
  int overall_score = kMinScore;
  // Indexed by Dimension, kAllDimensions order.
  std::array<DimensionScore, 6> dimensions{};
  std::vector<HardToken> hard_tokens;
  std::string summary;

  const DimensionScore& score_for(Dimension d) const noexcept {
    return dimensions[static_cast<std::size_t>(d)];
  }
  bool operator==(const JudgeAssessment&) const = default;
};

struct FlagReason {
  Dimension dimension = Dimension::MorphologicalBlending;
  int difference = 0;

  bool operator==(const FlagReason&) const = default;
};

struct EnsembleAssessment {
  std::string sample_id;
  std::array<JudgeAssessment, 2> judges;
  // Mean of the two overall scores; a multiple of 0.5 and therefore exact.
  double ensemble_score = 0.0;
  bool flagged = false;
  std::vector<FlagReason> flag_reasons;

  bool operator==(const EnsembleAssessment&) const = default;
};

// Deterministic prompt. The transcript is embedded as a JSON string literal so
// quotes and newlines cannot break the requested response structure.
std::string build_prompt(const Sample& sample);

// Strict schema validation. Surrounding prose or a Markdown code fence around
// the JSON object is tolerated; everything inside it is not. Throws
// ValidationError naming the offending field.
JudgeAssessment parse_assessment(std::string_view raw, std::string judge_id);

// Throws ValidationError("judge_id") when both come from the same judge.
EnsembleAssessment combine(const JudgeAssessment& a, const JudgeAssessment& b, std::string sample_id);

// One JSON document per line: the per-judge response fields plus judge_id,
// and top-level sample_id / ensemble_score / flagged / flag_reasons.
std::string to_json_line(const EnsembleAssessment& assessment);
EnsembleAssessment from_json_line(std::string_view line);
void write_assessments(const std::filesystem::path& path, std::span<const EnsembleAssessment> assessments);
std::vector<EnsembleAssessment> load_assessments(const std::filesystem::path& path);

// A judge model behind some transport. Implementations must be callable from
// several threads at once.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual const std::string& id() const = 0;
  // Raw model text. Throws TransportError (retried), ValidationError for a
  // truncated or empty completion, anything else for a hard failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

struct ScoringOptions {
  std::size_t max_in_flight = 1;  // samples scored concurrently
  BackoffPolicy transport_retry{};
  int validation_rerequests = 1;
  const char* checkpoint_namespace = "assessments";
};

struct FailedSample {
  std::string sample_id;
  std::string reason;

  bool operator==(const FailedSample&) const = default;
};

struct ScoringRun {
  // Input order; failed samples are absent here and listed in `failed`.
  std::vector<EnsembleAssessment> assessments;
  std::vector<FailedSample> failed;
  std::size_t judge_calls = 0;
  std::size_t resumed = 0;  // taken from the checkpoint store
};

// Scores each candidate with both judges (in parallel per sample), skipping
// ids already complete in `store`. A corrupt stored record raises
// StoreCorruption and aborts the run.
ScoringRun score_candidates(std::span<const Sample> candidates, JudgeClient& judge_a, JudgeClient& judge_b,
                            CheckpointStore& store, const ScoringOptions& options = {});

}  // namespace csb
