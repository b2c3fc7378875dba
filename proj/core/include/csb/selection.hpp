#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csb/corpus.hpp"
#include "csb/ensemble.hpp"
#include "csb/script_heuristics.hpp"

namespace csb {

struct SelectionPolicy {
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::size_t source_size = 0;
  std::optional<std::size_t> pre_sample;
  std::size_t llm_candidate_count = 0;
  std::size_t final_count = 300;
  std::uint64_t rng_seed = 0;
  // Skip heuristic filtering and forward the whole pool (Latin-only pairs).
  bool forward_all = false;

  std::size_t pool_size() const noexcept { return pre_sample.value_or(source_size); }
  // Throws ValidationError naming the violated field.
  void validate() const;
};

// JSON: {"policies": [{"pair": "ar-sa-en", "source_size": 27190, "pre_sample": 5000,
//         "llm_candidate_count": 1500, "final_count": 300, "rng_seed": 1, "forward_all": false}]}
// forward_all defaults to true for Latin-only pairs.
std::vector<SelectionPolicy> parse_policies(std::string_view json_text, std::string_view source = "<policies>");
std::vector<SelectionPolicy> load_policies(const std::filesystem::path& path);

// Uniform sample of n ids without replacement, returned in input order.
// Selection sampling (Knuth, TAOCP vol. 2, Algorithm S) driven by
// std::mt19937_64 with 53-bit uniform doubles, so the result is identical on
// every platform for a given seed. Throws csb::Error when n > ids.size().
std::vector<std::string> pre_sample(std::span<const std::string> ids, std::size_t n, std::uint64_t seed);

struct Stage1Result {
  std::vector<std::string> ids;  // H descending (input order among equal H) or input order when forwarded
  std::vector<std::string> warnings;
};

Stage1Result stage1_select(std::span<const HScoreRow> scored, const SelectionPolicy& policy);

struct RankedCandidate {
  std::string sample_id;
  double ensemble_score = 0.0;
  double h_score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RankedCandidate&) const = default;
};

// Order: ensemble score desc, H desc, sample id asc. Flagged rows stay
// eligible. Throws csb::Error when an assessed id has no H score.
std::vector<RankedCandidate> final_select(std::span<const EnsembleAssessment> assessments,
                                          const std::map<std::string, double>& h_scores, std::size_t k);

inline constexpr std::array<std::string_view, 4> kRankingColumns = {"rank", "sample_id", "ensemble_score", "h_score"};
std::string format_ranking(std::span<const RankedCandidate> ranked);
void write_ranking(const std::filesystem::path& path, std::span<const RankedCandidate> ranked);
std::vector<RankedCandidate> load_ranking(const std::filesystem::path& path);

struct PolicyReduction {
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::size_t source_size = 0;
  std::optional<std::size_t> pre_sample;
  std::size_t llm_candidates = 0;
  double reduction_vs_source = 0.0;                   // fraction in [0, 1]
  std::optional<double> reduction_vs_pre_sample;      // when pre-sampled
};

struct ReductionReport {
  std::vector<PolicyReduction> policies;  // every input policy
  // Aggregate over Arabic-script pairs only.
  std::size_t candidates_total = 0;
  std::size_t source_total = 0;
  double candidate_fraction = 0.0;
  double reduction = 0.0;
};

ReductionReport audit_reduction(std::span<const SelectionPolicy> policies);
std::string format_reduction_report(const ReductionReport& report);

}  // namespace csb
