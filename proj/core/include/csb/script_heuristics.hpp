#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csb/corpus.hpp"

namespace csb {

enum class CharClass : std::uint8_t { Arabic, Latin, Other };
enum class TokenClass : std::uint8_t { Arabic, Latin, Mixed, Other };

std::string_view to_string(TokenClass c) noexcept;

// Arabic: U+0600..U+06FF letters and combining marks, tatweel excluded.
// Latin: ASCII A-Z / a-z. Digits, punctuation, symbols and everything else
// are Other.
CharClass classify_char(char32_t c) noexcept;

// Majority class over the token's characters; equal nonzero Arabic and Latin
// counts give Mixed, no Arabic or Latin characters give Other.
TokenClass classify_token(std::string_view token);

// Splits on Unicode White_Space without any normalization.
std::vector<std::string> split_whitespace(std::string_view text);

// Cross-language morphological blend patterns. Latin matching is
// case-insensitive.
//   article_prefixes: Arabic article (optionally + tatweel) directly before Latin letters
//   arabic_suffixes:  Latin letters directly followed by an Arabic suffix
//   german_suffixes:  listed English stem followed by a German derivational suffix
struct MorphRules {
  std::vector<std::u32string> article_prefixes;
  std::vector<std::u32string> arabic_suffixes;
  std::vector<std::string> german_suffixes;
  std::vector<std::string> english_stems;

  static MorphRules defaults();
  // One rule per line: `<family> <pattern>` where family is one of
  // article-prefix, arabic-suffix, german-suffix, english-stem. Blank lines
  // and lines starting with '#' are ignored.
  static MorphRules parse(std::string_view text, std::string_view source = "<rules>");
  static MorphRules load(const std::filesystem::path& path);
};

std::size_t count_morph_hits(std::string_view token, const MorphRules& rules);

struct SignalInputs {
  std::size_t n = 0;    // tokens
  std::size_t n_a = 0;  // Arabic characters
  std::size_t n_l = 0;  // Latin characters
  double m = 0.0;       // min(n_a, n_l) / (n_a + n_l)
  std::size_t k = 0;    // adjacent Arabic<->Latin token pairs
  std::size_t b = 0;    // morphological blend hits
  double ttr = 0.0;     // unique raw tokens / n

  bool operator==(const SignalInputs&) const = default;
};

// Throws csb::Error when the transcript has no tokens.
SignalInputs extract_signals(std::string_view transcript, const MorphRules& rules = MorphRules::defaults());

inline constexpr double kMixTarget = 0.35;
inline constexpr double kMorphCeiling = 3.0;
inline constexpr std::size_t kMinTokens = 5;
inline constexpr double kLengthSpan = 20.0;
inline constexpr double kTtrTarget = 0.7;

struct SignalWeights {
  double mix = 0.30;
  double alt = 0.30;
  double morph = 0.20;
  double len = 0.10;
  double vocab = 0.10;
};

struct HScoreOptions {
  // Each signal is rounded to one decimal before weighting, the precision
  // in which per-signal scores are reported (1 hit -> 3.3, 2 hits -> 6.7).
  bool round_signals = true;
  SignalWeights weights{};
};

struct HScoreBreakdown {
  SignalInputs inputs;
  double h_mix = 0.0;
  double h_alt = 0.0;
  double h_morph = 0.0;
  double h_len = 0.0;
  double h_vocab = 0.0;
  double composite = 0.0;
  bool degenerate_latin_pair = false;
};

// Validates the inputs' ranges (ValidationError naming the field).
HScoreBreakdown compute_hscore(const SignalInputs& inputs, bool degenerate_latin_pair,
                               const HScoreOptions& options = {});

struct HScoreRow {
  std::string sample_id;
  double h_mix = 0.0;
  double h_alt = 0.0;
  double h_morph = 0.0;
  double h_len = 0.0;
  double h_vocab = 0.0;
  double composite = 0.0;

  bool operator==(const HScoreRow&) const = default;
};

struct ScoredSample {
  std::string sample_id;
  HScoreBreakdown score;

  HScoreRow row() const;
};

// Latin-only pairs get the degenerate flag automatically.
std::vector<ScoredSample> score_dataset(const Dataset& dataset,
                                        const MorphRules& rules = MorphRules::defaults(),
                                        const HScoreOptions& options = {});

inline constexpr std::array<std::string_view, 7> kScoreColumns = {
    "sample_id", "h_mix", "h_alt", "h_morph", "h_len", "h_vocab", "H"};

std::string format_scores(std::span<const HScoreRow> rows);
void write_scores(const std::filesystem::path& path, std::span<const HScoreRow> rows);
std::vector<HScoreRow> load_scores(const std::filesystem::path& path);

}  // namespace csb
