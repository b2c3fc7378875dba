#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csb {

enum class LanguagePair : std::uint8_t {
  EgyptianArabicEnglish,
  SaudiArabicEnglish,
  PersianEnglish,
  GermanEnglish,
};

inline constexpr std::array<LanguagePair, 4> kAllPairs = {
    LanguagePair::EgyptianArabicEnglish,
    LanguagePair::SaudiArabicEnglish,
    LanguagePair::PersianEnglish,
    LanguagePair::GermanEnglish,
};

// Wire codes: ar-eg-en, ar-sa-en, fa-en, de-en.
std::string_view to_code(LanguagePair pair) noexcept;
std::optional<LanguagePair> try_parse_pair(std::string_view code) noexcept;
// Throws csb::Error listing the accepted codes.
LanguagePair parse_pair(std::string_view code);
std::string_view display_name(LanguagePair pair) noexcept;

// Both languages written in Latin script: script mixing signals vanish.
constexpr bool is_latin_only(LanguagePair pair) noexcept {
  return pair == LanguagePair::GermanEnglish;
}
constexpr bool uses_arabic_script(LanguagePair pair) noexcept { return !is_latin_only(pair); }

struct Sample {
  std::string id;
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::string transcript;
  std::string audio_ref;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
  std::vector<Sample> samples;

  const Sample* find(std::string_view id) const noexcept;
  bool operator==(const Dataset&) const = default;
};

enum class TranscriptionStatus : std::uint8_t { ok, provider_error, unsupported_pair };

std::string_view to_string(TranscriptionStatus status) noexcept;
std::optional<TranscriptionStatus> try_parse_status(std::string_view text) noexcept;

struct TranscriptionResult {
  std::string sample_id;
  std::string provider_id;
  std::string hypothesis_raw;
  TranscriptionStatus status = TranscriptionStatus::ok;
  std::uint64_t latency_ms = 0;

  bool operator==(const TranscriptionResult&) const = default;
};

inline constexpr std::array<std::string_view, 4> kSampleColumns = {"id", "pair", "transcript", "audio_ref"};
inline constexpr std::array<std::string_view, 5> kResultColumns = {
    "sample_id", "provider_id", "status", "latency_ms", "hypothesis_raw"};

// Rejects duplicate ids, empty ids, blank transcripts and records whose pair
// differs from `pair`. Errors carry the file and line.
Dataset load_dataset(const std::filesystem::path& path, LanguagePair pair);
// Reads the pair from the first record; an empty file is rejected because the
// pair cannot be inferred.
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
std::string format_dataset(const Dataset& dataset);

std::vector<TranscriptionResult> load_results(const std::filesystem::path& path);
void write_results(const std::filesystem::path& path, std::span<const TranscriptionResult> results);
std::string format_results(std::span<const TranscriptionResult> results);

}  // namespace csb
