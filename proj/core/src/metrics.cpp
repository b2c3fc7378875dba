#include "csb/metrics.hpp"

#include <fmt/format.h>
#include <unicode/uchar.h>

#include <algorithm>
#include <limits>
#include <cmath>
#include <set>
#include <unordered_map>

#include "csb/error.hpp"
#include "csb/tsv.hpp"
#include "csb/utf8.hpp"

namespace csb {
namespace {

constexpr char32_t kTatweel = U'\u0640';

bool is_arabic_punctuation(char32_t c) noexcept {
  switch (c) {
    case U'\u0609': case U'\u060A': case U'\u060C': case U'\u060D':
    case U'\u061B': case U'\u061D': case U'\u061E': case U'\u061F':
    case U'\u066A': case U'\u066B': case U'\u066C': case U'\u066D':
    case U'\u06D4':
      return true;
    default:
      return false;
  }
}

bool is_dropped(char32_t c) noexcept {
  return c == kTatweel || is_arabic_punctuation(c) || u_ispunct(static_cast<UChar32>(c));
}

// Returns 0 when the character is removed.
char32_t script_normalise(char32_t c) noexcept {
  switch (c) {
    case U'\u0623':  // alef with hamza above
    case U'\u0625':  // alef with hamza below
      return U'\u0627';
    case U'\u0629':  // ta marbuta
      return U'\u0647';
    default: break;
  }
  if ((c >= U'\u064B' && c <= U'\u065F') || c == U'\u0670') return 0;
  if (c >= U'\u0660' && c <= U'\u0669') return U'0' + (c - U'\u0660');
  if (c >= U'\u06F0' && c <= U'\u06F9') return U'0' + (c - U'\u06F0');
  return c;
}

}  // namespace

std::string NormalizedText::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

NormalizedText normalize(std::string_view text, const NormalizeOptions& options) {
  NormalizedText out;
  out.original = std::string(text);
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(utf8::encode(current));
    current.clear();
  };
  for (char32_t c : utf8::decode(text)) {
    if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
      flush();
      continue;
    }
    if (is_dropped(c)) continue;
    c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
    if (options.script_normalised) {
      c = script_normalise(c);
      if (c == 0) continue;
    }
    current.push_back(c);
  }
  flush();
  return out;
}

WerOutcome word_errors(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw Error("WER is undefined for an empty reference");
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();

  // Lexicographic (edits, indels): minimum edits, then fewest insertions and
  // deletions.
  struct Cost {
    std::size_t edits;
    std::size_t indels;
    bool operator<(const Cost& o) const { return edits != o.edits ? edits < o.edits : indels < o.indels; }
  };
  std::vector<Cost> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, i};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      Cost best{prev[j - 1].edits + (same ? 0 : 1), prev[j - 1].indels};
      best = std::min(best, Cost{prev[j].edits + 1, prev[j].indels + 1});
      best = std::min(best, Cost{cur[j - 1].edits + 1, cur[j - 1].indels + 1});
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cost total = prev[m];
  // D - I = n - m and D + I = indels.
  WerOutcome out;
  out.reference_length = n;
  out.substitutions = total.edits - total.indels;
  out.deletions = (total.indels + n - m) / 2;
  out.insertions = total.indels - out.deletions;
  return out;
}

WerOutcome wer(const NormalizedText& reference, const NormalizedText& hypothesis) {
  return word_errors(reference.tokens, hypothesis.tokens);
}

TokenEmbeddings::TokenEmbeddings(std::vector<std::string> tokens, const std::vector<std::vector<double>>& vectors)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw Error("token embeddings must contain at least one token");
  if (tokens_.size() != vectors.size())
    throw Error(fmt::format("{} tokens but {} vectors", tokens_.size(), vectors.size()));
  dim_ = vectors.front().size();
  if (dim_ == 0) throw Error("embedding vectors must have at least one dimension");
  values_.reserve(dim_ * vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.size() != dim_) throw Error(fmt::format("vector {} has dimension {}, expected {}", i, v.size(), dim_));
    double norm2 = 0.0;
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(fmt::format("vector {} has a non-finite component", i));
      norm2 += x * x;
    }
    if (norm2 == 0.0) throw Error(fmt::format("vector {} has zero norm", i));
    const double inv = 1.0 / std::sqrt(norm2);
    for (double x : v) values_.push_back(x * inv);
  }
}

double harmonic_f1(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

BertScoreOutcome bertscore(const TokenEmbeddings& reference, const TokenEmbeddings& hypothesis) {
  if (reference.dim() != hypothesis.dim())
    throw Error(fmt::format("embedding dimension mismatch: reference {}, hypothesis {}", reference.dim(), hypothesis.dim()));
  const std::size_t nr = reference.size();
  const std::size_t nh = hypothesis.size();
  std::vector<double> best_for_ref(nr, -std::numeric_limits<double>::infinity());
  std::vector<double> best_for_hyp(nh, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < nr; ++i) {
    const auto r = reference.row(i);
    for (std::size_t j = 0; j < nh; ++j) {
      const auto h = hypothesis.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) dot += r[k] * h[k];
      best_for_ref[i] = std::max(best_for_ref[i], dot);
      best_for_hyp[j] = std::max(best_for_hyp[j], dot);
    }
  }
  BertScoreOutcome out;
  for (double v : best_for_hyp) out.precision += v;
  for (double v : best_for_ref) out.recall += v;
  out.precision /= static_cast<double>(nh);
  out.recall /= static_cast<double>(nr);
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

KendallResult kendall_tau(std::span<const SystemScore> ranking_a, std::span<const SystemScore> ranking_b) {
  const std::size_t n = ranking_a.size();
  if (n < 2) throw Error("Kendall's tau needs at least two systems");
  if (ranking_b.size() != n)
    throw Error(fmt::format("rankings cover {} and {} systems", n, ranking_b.size()));

  std::unordered_map<std::string, double> b_of;
  for (const auto& s : ranking_b)
    if (!b_of.emplace(s.system, s.score).second) throw Error(fmt::format("system '{}' listed twice", s.system));
  std::vector<double> a(n), b(n);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ranking_a[i];
    if (!seen.insert(s.system).second) throw Error(fmt::format("system '{}' listed twice", s.system));
    const auto it = b_of.find(s.system);
    if (it == b_of.end()) throw Error(fmt::format("system '{}' missing from the second ranking", s.system));
    a[i] = s.score;
    b[i] = it->second;
  }

  KendallResult out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (a[i] == a[j] || b[i] == b[j])
        throw Error(fmt::format("tied scores for '{}' and '{}'", ranking_a[i].system, ranking_a[j].system));
      if ((a[i] > a[j]) == (b[i] > b[j])) {
        ++out.concordant;
      } else {
        ++out.discordant;
      }
    }
  }
  out.pairs = n * (n - 1) / 2;
  out.tau = (static_cast<double>(out.concordant) - static_cast<double>(out.discordant)) / static_cast<double>(out.pairs);
  return out;
}

MetricRecord make_metric_record(std::string sample_id, std::string provider_id, LanguagePair pair,
                                const WerOutcome& wer, const BertScoreOutcome& bert) {
  MetricRecord r;
  r.sample_id = std::move(sample_id);
  r.provider_id = std::move(provider_id);
  r.pair = pair;
  r.wer = wer;
  r.bert = bert;
  r.delta = divergence(wer.wer(), bert.f1);
  return r;
}

std::string format_metrics(std::span<const MetricRecord> records) {
  tsv::Writer w(kMetricColumns);
  for (const auto& r : records)
    w.row({r.sample_id, r.provider_id, std::to_string(r.wer.substitutions), std::to_string(r.wer.deletions),
           std::to_string(r.wer.insertions), std::to_string(r.wer.reference_length),
           tsv::format_number(r.wer.wer()), tsv::format_number(r.bert.precision),
           tsv::format_number(r.bert.recall), tsv::format_number(r.bert.f1), tsv::format_number(r.delta)});
  return w.str();
}

void write_metrics(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  write_file_atomic(path, format_metrics(records));
}

std::vector<MetricRecord> load_metrics(const std::filesystem::path& path,
                                       const std::map<std::string, LanguagePair>& pair_of) {
  std::vector<MetricRecord> out;
  for (const auto& row : tsv::read_table(path, kMetricColumns)) {
    const auto& f = row.fields;
    const auto pair = pair_of.find(f[0]);
    if (pair == pair_of.end())
      throw ParseError(path.string(), row.line, fmt::format("sample '{}' is not in any loaded dataset", f[0]));
    try {
      MetricRecord r;
      r.sample_id = f[0];
      r.provider_id = f[1];
      r.pair = pair->second;
      r.wer.substitutions = tsv::parse_count(f[2]);
      r.wer.deletions = tsv::parse_count(f[3]);
      r.wer.insertions = tsv::parse_count(f[4]);
      r.wer.reference_length = tsv::parse_count(f[5]);
      if (r.wer.reference_length == 0) throw Error("N must be positive");
      r.bert.precision = tsv::parse_number(f[7]);
      r.bert.recall = tsv::parse_number(f[8]);
      r.bert.f1 = tsv::parse_number(f[9]);
      r.delta = tsv::parse_number(f[10]);
      if (tsv::parse_number(f[6]) != r.wer.wer()) throw Error("wer column disagrees with (S+D+I)/N");
      out.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), row.line, e.what());
    }
  }
  return out;
}

}  // namespace csb
