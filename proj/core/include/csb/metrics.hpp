#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csb/corpus.hpp"

namespace csb {

struct NormalizedText {
  std::vector<std::string> tokens;
  std::string original;

  std::string joined() const;  // tokens separated by single spaces
};

struct NormalizeOptions {
  // Additionally unify hamza-carrying alefs, map ta marbuta to ha, strip
  // Arabic diacritics and map Arabic-Indic / Persian digits to ASCII.
  bool script_normalised = false;
};

// Lowercase (simple Unicode case mapping), drop Unicode punctuation
// (general category P*), the Arabic punctuation block and tatweel, collapse
// whitespace and split. Arabic-script letters are never rewritten unless
// `script_normalised` is set. Idempotent.
NormalizedText normalize(std::string_view text, const NormalizeOptions& options = {});

struct WerOutcome {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
  double wer() const noexcept {
    return static_cast<double>(errors()) / static_cast<double>(reference_length);
  }
  bool operator==(const WerOutcome&) const = default;
};

// Minimum-edit-distance alignment with unit costs. Among minimum-cost
// alignments the one with the most substitutions is reported, which makes
// the split symmetric: swapping the arguments exchanges D and I.
// Throws csb::Error for an empty reference.
WerOutcome word_errors(std::span<const std::string> reference, std::span<const std::string> hypothesis);
WerOutcome wer(const NormalizedText& reference, const NormalizedText& hypothesis);

// Token embeddings with rows L2-normalized on construction, so cosine
// similarity is a dot product.
class TokenEmbeddings {
 public:
  // Throws csb::Error: empty input, token/vector count mismatch, ragged or
  // zero-dimension rows, zero or non-finite vectors.
  TokenEmbeddings(std::vector<std::string> tokens, const std::vector<std::vector<double>>& vectors);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }

 private:
  std::vector<std::string> tokens_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct BertScoreOutcome {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const BertScoreOutcome&) const = default;
};

// Greedy max-cosine matching, no idf weighting, no baseline rescaling.
// Throws csb::Error on a dimension mismatch.
BertScoreOutcome bertscore(const TokenEmbeddings& reference, const TokenEmbeddings& hypothesis);
double harmonic_f1(double precision, double recall) noexcept;

struct SystemScore {
  std::string system;
  double score = 0.0;  // higher is better
};

struct KendallResult {
  double tau = 0.0;
  std::size_t concordant = 0;
  std::size_t discordant = 0;
  std::size_t pairs = 0;
};

// tau-a over two strict rankings of the same systems. Throws csb::Error on
// mismatched system sets, fewer than two systems, duplicates or tied scores.
KendallResult kendall_tau(std::span<const SystemScore> ranking_a, std::span<const SystemScore> ranking_b);

// Positive when WER penalizes more than the semantic error 1 - F1.
constexpr double divergence(double wer, double f1) noexcept { return wer - (1.0 - f1); }

struct MetricRecord {
  std::string sample_id;
  std::string provider_id;
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  WerOutcome wer;
  BertScoreOutcome bert;
  double delta = 0.0;
};

MetricRecord make_metric_record(std::string sample_id, std::string provider_id, LanguagePair pair,
                                const WerOutcome& wer, const BertScoreOutcome& bert);

inline constexpr std::array<std::string_view, 11> kMetricColumns = {
    "sample_id", "provider_id", "S", "D", "I", "N", "wer", "P", "R", "F1", "delta"};

std::string format_metrics(std::span<const MetricRecord> records);
void write_metrics(const std::filesystem::path& path, std::span<const MetricRecord> records);
// The file does not carry the pair; it is joined from `pair_of` by sample id.
std::vector<MetricRecord> load_metrics(const std::filesystem::path& path,
                                       const std::map<std::string, LanguagePair>& pair_of);

}  // namespace csb
