#include "csb/script_heuristics.hpp"

#include <fmt/format.h>
#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "csb/error.hpp"
#include "csb/tsv.hpp"
#include "csb/utf8.hpp"

namespace csb {
namespace {

constexpr char32_t kTatweel = U'\u0640';

bool is_ascii_letter(char32_t c) noexcept {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z');
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return out;
}

bool is_arabic_letter(char32_t c) noexcept { return classify_char(c) == CharClass::Arabic; }

bool starts_with_at(std::u32string_view text, std::size_t pos, std::u32string_view pattern) {
  return pos + pattern.size() <= text.size() && text.substr(pos, pattern.size()) == pattern;
}

// Article, optional tatweel run, then a Latin letter.
std::size_t count_article_prefix(std::u32string_view cps, std::u32string_view article) {
  if (article.empty()) return 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i + article.size() < cps.size() + 1; ++i) {
    if (!starts_with_at(cps, i, article)) continue;
    std::size_t j = i + article.size();
    while (j < cps.size() && cps[j] == kTatweel) ++j;
    if (j < cps.size() && is_ascii_letter(cps[j])) {
      ++hits;
      i = j;
    }
  }
  return hits;
}

// Latin letter, optional joiner ('-' or tatweel), suffix, then no further
// Arabic letter.
std::size_t count_arabic_suffix(std::u32string_view cps, std::u32string_view suffix) {
  if (suffix.empty()) return 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (!is_ascii_letter(cps[i])) continue;
    std::size_t j = i + 1;
    if (j < cps.size() && (cps[j] == U'-' || cps[j] == kTatweel)) ++j;
    if (!starts_with_at(cps, j, suffix)) continue;
    const std::size_t end = j + suffix.size();
    if (end < cps.size() && is_arabic_letter(cps[end])) continue;
    ++hits;
    i = end - 1;
  }
  return hits;
}

std::size_t count_german_suffix(std::string_view token, const MorphRules& rules) {
  // Only pure Latin tokens (letters and hyphens) are candidates.
  for (char c : token)
    if (!(is_ascii_letter(static_cast<unsigned char>(c)) || c == '-')) return 0;
  const std::string lower = ascii_lower(token);
  for (const auto& stem : rules.english_stems) {
    if (stem.empty() || !lower.starts_with(stem)) continue;
    std::string_view rest(lower);
    rest.remove_prefix(stem.size());
    if (rest.starts_with('-')) rest.remove_prefix(1);
    for (const auto& suffix : rules.german_suffixes)
      if (!suffix.empty() && rest == suffix) return 1;
  }
  return 0;
}

[[noreturn]] void bad_rule(std::string_view source, std::size_t line, const std::string& msg) {
  throw ParseError(std::string(source), line, msg);
}

double round_tenth(double v) { return std::round(v * 10.0) / 10.0; }

}  // namespace

std::string_view to_string(TokenClass c) noexcept {
  switch (c) {
    case TokenClass::Arabic: return "arabic";
    case TokenClass::Latin: return "latin";
    case TokenClass::Mixed: return "mixed";
    case TokenClass::Other: return "other";
  }
  return "?";
}

CharClass classify_char(char32_t c) noexcept {
  if (is_ascii_letter(c)) return CharClass::Latin;
  if (c >= U'\u0600' && c <= U'\u06FF' && c != kTatweel) {
    const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
    if (mask & (U_GC_L_MASK | U_GC_M_MASK)) return CharClass::Arabic;
  }
  return CharClass::Other;
}

TokenClass classify_token(std::string_view token) {
  std::size_t arabic = 0;
  std::size_t latin = 0;
  for (char32_t c : utf8::decode(token)) {
    switch (classify_char(c)) {
      case CharClass::Arabic: ++arabic; break;
      case CharClass::Latin: ++latin; break;
      case CharClass::Other: break;
    }
  }
  if (arabic == 0 && latin == 0) return TokenClass::Other;
  if (arabic > latin) return TokenClass::Arabic;
  if (latin > arabic) return TokenClass::Latin;
  return TokenClass::Mixed;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string current;
  for (char32_t c : utf8::decode(text)) {
    if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
      if (!current.empty()) tokens.push_back(utf8::encode(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(utf8::encode(current));
  return tokens;
}

MorphRules MorphRules::defaults() {
  MorphRules r;
  r.article_prefixes = {U"\u0627\u0644"};  // al-
  r.arabic_suffixes = {U"\u064A\u0646", U"\u0627\u062A"};  // -een, -aat
  r.german_suffixes = {"ung", "en"};
  r.english_stems = {"startup", "download", "upload", "update", "deploy", "debug",
                     "check", "chat", "click", "commit", "email", "google",
                     "meeting", "merge", "post", "push", "scroll", "share",
                     "stream", "test", "upgrade", "book", "like", "call"};
  return r;
}

MorphRules MorphRules::parse(std::string_view text, std::string_view source) {
  MorphRules r;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos) bad_rule(source, line_no, "expected '<family> <pattern>'");
    const std::string_view family = line.substr(0, sep);
    std::string_view pattern = line.substr(sep + 1);
    while (!pattern.empty() && (pattern.front() == ' ' || pattern.front() == '\t')) pattern.remove_prefix(1);
    if (pattern.empty() || pattern.find_first_of(" \t") != std::string_view::npos)
      bad_rule(source, line_no, "pattern must be a single non-empty word");

    if (family == "article-prefix") {
      r.article_prefixes.push_back(utf8::decode(pattern));
    } else if (family == "arabic-suffix") {
      r.arabic_suffixes.push_back(utf8::decode(pattern));
    } else if (family == "german-suffix") {
      r.german_suffixes.push_back(ascii_lower(pattern));
    } else if (family == "english-stem") {
      r.english_stems.push_back(ascii_lower(pattern));
    } else {
      bad_rule(source, line_no, fmt::format("unknown rule family '{}'", family));
    }
  }
  return r;
}

MorphRules MorphRules::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::size_t count_morph_hits(std::string_view token, const MorphRules& rules) {
  const std::u32string cps = utf8::decode(token);
  std::size_t hits = 0;
  for (const auto& article : rules.article_prefixes) hits += count_article_prefix(cps, article);
  for (const auto& suffix : rules.arabic_suffixes) hits += count_arabic_suffix(cps, suffix);
  hits += count_german_suffix(token, rules);
  return hits;
}

SignalInputs extract_signals(std::string_view transcript, const MorphRules& rules) {
  const auto tokens = split_whitespace(transcript);
  if (tokens.empty()) throw Error("transcript has no tokens");

  SignalInputs in;
  in.n = tokens.size();
  for (char32_t c : utf8::decode(transcript)) {
    switch (classify_char(c)) {
      case CharClass::Arabic: ++in.n_a; break;
      case CharClass::Latin: ++in.n_l; break;
      case CharClass::Other: break;
    }
  }
  const std::size_t scripted = in.n_a + in.n_l;
  in.m = scripted == 0 ? 0.0 : static_cast<double>(std::min(in.n_a, in.n_l)) / static_cast<double>(scripted);

  std::vector<TokenClass> classes;
  classes.reserve(tokens.size());
  for (const auto& t : tokens) classes.push_back(classify_token(t));
  for (std::size_t i = 1; i < classes.size(); ++i) {
    const auto a = classes[i - 1];
    const auto b = classes[i];
    if ((a == TokenClass::Arabic && b == TokenClass::Latin) ||
        (a == TokenClass::Latin && b == TokenClass::Arabic))
      ++in.k;
  }

  for (const auto& t : tokens) in.b += count_morph_hits(t, rules);

  const std::unordered_set<std::string> types(tokens.begin(), tokens.end());
  in.ttr = static_cast<double>(types.size()) / static_cast<double>(in.n);
  return in;
}

HScoreBreakdown compute_hscore(const SignalInputs& inputs, bool degenerate_latin_pair,
                               const HScoreOptions& options) {
  if (!(inputs.m >= 0.0 && inputs.m <= 0.5))
    throw ValidationError("m", fmt::format("mix ratio {} outside [0, 0.5]", inputs.m));
  if (inputs.n > 0 && inputs.k > inputs.n - 1)
    throw ValidationError("k", fmt::format("{} switches exceed n - 1 = {}", inputs.k, inputs.n - 1));
  if (inputs.n == 0 && inputs.k != 0) throw ValidationError("k", "switches without tokens");
  if (!(inputs.ttr >= 0.0 && inputs.ttr <= 1.0))
    throw ValidationError("ttr", fmt::format("type-token ratio {} outside [0, 1]", inputs.ttr));

  const double n = static_cast<double>(inputs.n);
  HScoreBreakdown out;
  out.inputs = inputs;
  out.degenerate_latin_pair = degenerate_latin_pair;

  out.h_mix = std::min(inputs.m / kMixTarget, 1.0) * 10.0;
  out.h_alt = inputs.n == 0 ? 0.0 : std::min(static_cast<double>(inputs.k) / (n / 2.0), 1.0) * 10.0;
  out.h_morph = std::min(static_cast<double>(inputs.b) / kMorphCeiling, 1.0) * 10.0;
  out.h_len = inputs.n < kMinTokens ? 0.0 : std::min((n - static_cast<double>(kMinTokens)) / kLengthSpan, 1.0) * 10.0;
  out.h_vocab = std::min(inputs.ttr / kTtrTarget, 1.0) * 10.0;

  if (degenerate_latin_pair) {
    out.h_mix = 0.0;
    out.h_alt = 0.0;
  }
  if (options.round_signals) {
    for (double* h : {&out.h_mix, &out.h_alt, &out.h_morph, &out.h_len, &out.h_vocab}) *h = round_tenth(*h);
  }

  const auto& w = options.weights;
  out.composite = w.mix * out.h_mix + w.alt * out.h_alt + w.morph * out.h_morph +
                  w.len * out.h_len + w.vocab * out.h_vocab;
  return out;
}

HScoreRow ScoredSample::row() const {
  return {sample_id, score.h_mix, score.h_alt, score.h_morph, score.h_len, score.h_vocab, score.composite};
}

std::vector<ScoredSample> score_dataset(const Dataset& dataset, const MorphRules& rules,
                                        const HScoreOptions& options) {
  const bool degenerate = is_latin_only(dataset.pair);
  std::vector<ScoredSample> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples)
    out.push_back({s.id, compute_hscore(extract_signals(s.transcript, rules), degenerate, options)});
  return out;
}

std::string format_scores(std::span<const HScoreRow> rows) {
  tsv::Writer w(kScoreColumns);
  for (const auto& r : rows)
    w.row({r.sample_id, tsv::format_number(r.h_mix), tsv::format_number(r.h_alt),
           tsv::format_number(r.h_morph), tsv::format_number(r.h_len),
           tsv::format_number(r.h_vocab), tsv::format_number(r.composite)});
  return w.str();
}

void write_scores(const std::filesystem::path& path, std::span<const HScoreRow> rows) {
  write_file_atomic(path, format_scores(rows));
}

std::vector<HScoreRow> load_scores(const std::filesystem::path& path) {
  std::vector<HScoreRow> out;
  for (const auto& row : tsv::read_table(path, kScoreColumns)) {
    const auto& f = row.fields;
    try {
      out.push_back({f[0], tsv::parse_number(f[1]), tsv::parse_number(f[2]), tsv::parse_number(f[3]),
                     tsv::parse_number(f[4]), tsv::parse_number(f[5]), tsv::parse_number(f[6])});
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), row.line, e.what());
    }
  }
  return out;
}

}  // namespace csb
