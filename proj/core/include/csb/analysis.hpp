#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csb/corpus.hpp"
#include "csb/metrics.hpp"

namespace csb {

enum class Quartile { Q1 = 1, Q2, Q3, Q4 };
std::string_view to_string(Quartile q) noexcept;

struct QuartileAssignment {
  std::string sample_id;
  Quartile quartile = Quartile::Q1;
  double h_score = 0.0;
};

struct SampleDifficulty {
  std::string sample_id;
  double h_score = 0.0;
};

// Sorted by (H asc, sample_id asc) and cut into four contiguous blocks; the
// remainder goes to the lower quartiles, so 10 samples split 3/3/2/2.
// Output is in sorted order. Throws csb::Error for fewer than 4 samples.
std::vector<QuartileAssignment> assign_quartiles(std::span<const SampleDifficulty> samples);

// Per-pair mode: quartiles are cut within each pair and then pooled.
std::vector<QuartileAssignment> assign_quartiles_per_pair(
    const std::map<LanguagePair, std::vector<SampleDifficulty>>& samples);

using SupportMap = std::map<std::string, std::set<LanguagePair>>;

struct AggregateRow {
  std::string provider_id;
  std::string key;  // pair code, "overall" or quartile label
  std::optional<double> mean_wer;
  std::optional<double> mean_f1;
  std::size_t sample_count = 0;
  bool suppressed = false;
  // Overall rows only: false when the provider is supported on fewer pairs
  // than were evaluated.
  bool comparable = true;
  std::size_t pair_count = 0;
};

struct AggregateReport {
  std::vector<AggregateRow> per_pair;  // pair order, then provider id
  std::vector<AggregateRow> overall;   // comparable rows by mean WER, then the rest
};

// Means are per-sample means. A provider's overall mean is sample-weighted over
// the pairs it supports; records on unsupported pairs are ignored and their
// rows marked suppressed. Providers absent from `support` are ignored.
AggregateReport aggregate(std::span<const MetricRecord> records, const SupportMap& support);

struct QuartileTable {
  std::vector<std::string> providers;                          // columns
  std::map<Quartile, std::map<std::string, double>> mean_wer;  // quartile -> provider -> mean
  std::map<Quartile, std::map<std::string, double>> mean_f1;
  std::map<Quartile, std::size_t> sample_count;
};

// Only providers supported on every evaluated pair take part.
QuartileTable quartile_table(std::span<const MetricRecord> records, std::span<const QuartileAssignment> quartiles,
                             const SupportMap& support);

struct SystemMetrics {
  std::string system;
  double wer = 0.0;
  double f1 = 0.0;
};

struct ConcordanceRow {
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::size_t systems = 0;
  std::size_t system_pairs = 0;
  double tau = 0.0;
};

// tau between the WER ranking (lower is better) and the F1 ranking (higher is
// better). Throws csb::Error on ties or fewer than two systems in a pair.
std::vector<ConcordanceRow> concordance_table(const std::map<LanguagePair, std::vector<SystemMetrics>>& per_pair);

// Per-pair system means from the supported per-pair aggregate rows. Pairs
// with fewer than two systems are dropped.
std::map<LanguagePair, std::vector<SystemMetrics>> per_pair_systems(const AggregateReport& report);

inline constexpr double kBoldThreshold = 0.10;
inline constexpr std::size_t kReportTextLimit = 200;

struct DivergenceRow {
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::size_t rank = 0;
  std::string sample_id;
  std::string provider_id;
  double wer = 0.0;
  double f1 = 0.0;
  double delta = 0.0;
  bool bold = false;
  std::string reference;   // truncated for display
  std::string hypothesis;  // truncated for display
};

struct TextLookup {
  std::map<std::string, std::string> reference;                               // sample_id -> transcript
  std::map<std::pair<std::string, std::string>, std::string> hypothesis;      // (sample_id, provider_id) -> text
};

// Per pair, the `k` records with the largest delta (ties by sample id, then
// provider id), restricted to supported (provider, pair) combinations.
std::vector<DivergenceRow> top_divergence(std::span<const MetricRecord> records, const SupportMap& support,
                                          const TextLookup& texts, std::size_t k = 5,
                                          double bold_threshold = kBoldThreshold);

// First `limit` codepoints, with "…" appended when anything was cut.
std::string truncate_codepoints(std::string_view text, std::size_t limit = kReportTextLimit);

// Grouped-bar records: pairs x providers x {wer, f1}, suppressed cells null.
std::string plot_data_json(const AggregateReport& report, const QuartileTable& quartiles);

struct ReportInputs {
  std::vector<MetricRecord> records;
  SupportMap support;
  std::map<std::string, double> h_scores;  // sample_id -> H
  TextLookup texts;
  bool per_pair_quartiles = false;
  std::size_t divergence_k = 5;
};

struct ReportFiles {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> notes;
};

// overall.tsv, per_pair.tsv, quartiles.tsv, quartile_wer.tsv,
// quartile_bert.tsv, concordance.tsv, divergence_top.tsv, plot_data.json and
// summary.md under `out_dir`.
ReportFiles write_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace csb
