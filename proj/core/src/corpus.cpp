#include "csb/corpus.hpp"

#include <fmt/format.h>

#include <charconv>
#include <unordered_set>

#include "csb/error.hpp"
#include "csb/tsv.hpp"
#include "csb/utf8.hpp"

namespace csb {
namespace {

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace

std::string_view to_code(LanguagePair pair) noexcept {
  switch (pair) {
    case LanguagePair::EgyptianArabicEnglish: return "ar-eg-en";
    case LanguagePair::SaudiArabicEnglish: return "ar-sa-en";
    case LanguagePair::PersianEnglish: return "fa-en";
    case LanguagePair::GermanEnglish: return "de-en";
  }
  return "?";
}

std::optional<LanguagePair> try_parse_pair(std::string_view code) noexcept {
  for (auto p : kAllPairs)
    if (to_code(p) == code) return p;
  return std::nullopt;
}

LanguagePair parse_pair(std::string_view code) {
  if (auto p = try_parse_pair(code)) return *p;
  throw Error(fmt::format("unknown language pair '{}' (expected ar-eg-en, ar-sa-en, fa-en or de-en)", code));
}

std::string_view display_name(LanguagePair pair) noexcept {
  switch (pair) {
    case LanguagePair::EgyptianArabicEnglish: return "Egyptian Arabic-English";
    case LanguagePair::SaudiArabicEnglish: return "Saudi Arabic-English";
    case LanguagePair::PersianEnglish: return "Persian-English";
    case LanguagePair::GermanEnglish: return "German-English";
  }
  return "?";
}

const Sample* Dataset::find(std::string_view id) const noexcept {
  for (const auto& s : samples)
    if (s.id == id) return &s;
  return nullptr;
}

std::string_view to_string(TranscriptionStatus status) noexcept {
  switch (status) {
    case TranscriptionStatus::ok: return "ok";
    case TranscriptionStatus::provider_error: return "provider_error";
    case TranscriptionStatus::unsupported_pair: return "unsupported_pair";
  }
  return "?";
}

std::optional<TranscriptionStatus> try_parse_status(std::string_view text) noexcept {
  for (auto s : {TranscriptionStatus::ok, TranscriptionStatus::provider_error,
                 TranscriptionStatus::unsupported_pair})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

namespace {

Dataset load_impl(const std::filesystem::path& path, std::optional<LanguagePair> expected) {
  const auto rows = tsv::read_table(path, kSampleColumns);
  const std::string name = path.string();
  Dataset ds;
  if (expected) ds.pair = *expected;
  std::unordered_set<std::string> seen;
  for (const auto& row : rows) {
    const auto& f = row.fields;
    Sample s;
    s.id = f[0];
    if (s.id.empty()) throw ParseError(name, row.line, "empty sample id");
    auto pair = try_parse_pair(f[1]);
    if (!pair) throw ParseError(name, row.line, fmt::format("unknown language pair '{}'", f[1]));
    if (!expected) expected = ds.pair = *pair;
    if (*pair != ds.pair)
      throw ParseError(name, row.line, fmt::format("sample '{}' has pair {}, dataset pair is {}", s.id, f[1], to_code(ds.pair)));
    s.pair = *pair;
    s.transcript = f[2];
    if (is_blank(s.transcript)) throw ParseError(name, row.line, fmt::format("sample '{}' has an empty transcript", s.id));
    if (!utf8::is_valid(s.transcript)) throw ParseError(name, row.line, fmt::format("sample '{}' transcript is not valid UTF-8", s.id));
    s.audio_ref = f[3];
    if (!seen.insert(s.id).second) throw ParseError(name, row.line, fmt::format("duplicate sample id '{}'", s.id));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, LanguagePair pair) {
  return load_impl(path, pair);
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto ds = load_impl(path, std::nullopt);
  if (ds.samples.empty())
    throw ParseError(path.string(), 0, "cannot infer the language pair of an empty sample file");
  return ds;
}

std::string format_dataset(const Dataset& dataset) {
  tsv::Writer w(kSampleColumns);
  for (const auto& s : dataset.samples)
    w.row({s.id, std::string(to_code(s.pair)), s.transcript, s.audio_ref});
  return w.str();
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_file_atomic(path, format_dataset(dataset));
}

std::vector<TranscriptionResult> load_results(const std::filesystem::path& path) {
  const auto rows = tsv::read_table(path, kResultColumns);
  const std::string name = path.string();
  std::vector<TranscriptionResult> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const auto& f = row.fields;
    TranscriptionResult r;
    r.sample_id = f[0];
    r.provider_id = f[1];
    auto status = try_parse_status(f[2]);
    if (!status) throw ParseError(name, row.line, fmt::format("unknown status '{}'", f[2]));
    r.status = *status;
    const auto* end = f[3].data() + f[3].size();
    auto [ptr, ec] = std::from_chars(f[3].data(), end, r.latency_ms);
    if (ec != std::errc{} || ptr != end || f[3].empty())
      throw ParseError(name, row.line, fmt::format("latency_ms '{}' is not a nonnegative integer", f[3]));
    r.hypothesis_raw = f[4];
    if (r.status == TranscriptionStatus::unsupported_pair && !r.hypothesis_raw.empty())
      throw ParseError(name, row.line, "unsupported_pair result must have an empty hypothesis");
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_results(std::span<const TranscriptionResult> results) {
  tsv::Writer w(kResultColumns);
  for (const auto& r : results)
    w.row({r.sample_id, r.provider_id, std::string(to_string(r.status)),
           std::to_string(r.latency_ms), r.hypothesis_raw});
  return w.str();
}

void write_results(const std::filesystem::path& path, std::span<const TranscriptionResult> results) {
  write_file_atomic(path, format_results(results));
}

}  // namespace csb
