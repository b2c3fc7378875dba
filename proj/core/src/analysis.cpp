#include "csb/analysis.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <sstream>

#include "csb/error.hpp"
#include "csb/tsv.hpp"
#include "csb/utf8.hpp"

namespace csb {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<Quartile, 4> kQuartiles = {Quartile::Q1, Quartile::Q2, Quartile::Q3, Quartile::Q4};

std::string fixed(double v, int digits = 6) { return fmt::format("{:.{}f}", v, digits); }
std::string fixed(const std::optional<double>& v, int digits = 6) { return v ? fixed(*v, digits) : "NA"; }

struct Sums {
  double wer = 0.0;
  double f1 = 0.0;
  std::size_t n = 0;
  void add(const MetricRecord& r) {
    wer += r.wer.wer();
    f1 += r.bert.f1;
    ++n;
  }
};

std::set<LanguagePair> evaluated_pairs(std::span<const MetricRecord> records) {
  std::set<LanguagePair> out;
  for (const auto& r : records) out.insert(r.pair);
  return out;
}

bool supports(const SupportMap& support, const std::string& provider, LanguagePair pair) {
  const auto it = support.find(provider);
  return it != support.end() && it->second.contains(pair);
}

std::string quartile_label(Quartile q) {
  switch (q) {
    case Quartile::Q1: return "Q1 (easiest)";
    case Quartile::Q4: return "Q4 (hardest)";
    default: return std::string(to_string(q));
  }
}

}  // namespace

std::string_view to_string(Quartile q) noexcept {
  switch (q) {
    case Quartile::Q1: return "Q1";
    case Quartile::Q2: return "Q2";
    case Quartile::Q3: return "Q3";
    case Quartile::Q4: return "Q4";
  }
  return "Q?";
}

std::vector<QuartileAssignment> assign_quartiles(std::span<const SampleDifficulty> samples) {
  if (samples.size() < 4)
    throw Error(fmt::format("quartiles need at least 4 samples, got {}", samples.size()));
  std::vector<SampleDifficulty> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const SampleDifficulty& a, const SampleDifficulty& b) {
    return a.h_score != b.h_score ? a.h_score < b.h_score : a.sample_id < b.sample_id;
  });
  const std::size_t base = sorted.size() / 4;
  const std::size_t extra = sorted.size() % 4;
  std::vector<QuartileAssignment> out;
  out.reserve(sorted.size());
  std::size_t pos = 0;
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t size = base + (q < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++pos)
      out.push_back({sorted[pos].sample_id, kQuartiles[q], sorted[pos].h_score});
  }
  return out;
}

std::vector<QuartileAssignment> assign_quartiles_per_pair(
    const std::map<LanguagePair, std::vector<SampleDifficulty>>& samples) {
  std::vector<QuartileAssignment> out;
  for (const auto& [pair, list] : samples) {
    try {
      auto part = assign_quartiles(list);
      out.insert(out.end(), part.begin(), part.end());
    } catch (const Error& e) {
      throw Error(fmt::format("{}: {}", to_code(pair), e.what()));
    }
  }
  return out;
}

AggregateReport aggregate(std::span<const MetricRecord> records, const SupportMap& support) {
  AggregateReport report;
  if (records.empty()) return report;
  const auto pairs = evaluated_pairs(records);

  std::map<std::pair<LanguagePair, std::string>, Sums> cells;
  std::map<std::pair<LanguagePair, std::string>, std::size_t> ignored;
  std::map<std::string, Sums> overall;
  for (const auto& r : records) {
    if (!support.contains(r.provider_id)) continue;
    if (supports(support, r.provider_id, r.pair)) {
      cells[{r.pair, r.provider_id}].add(r);
      overall[r.provider_id].add(r);
    } else {
      ++ignored[{r.pair, r.provider_id}];
    }
  }

  for (auto pair : kAllPairs) {
    if (!pairs.contains(pair)) continue;
    for (const auto& [provider, supported] : support) {
      AggregateRow row;
      row.provider_id = provider;
      row.key = std::string(to_code(pair));
      if (!supported.contains(pair)) {
        row.suppressed = true;
        const auto it = ignored.find({pair, provider});
        row.sample_count = it == ignored.end() ? 0 : it->second;
      } else if (const auto it = cells.find({pair, provider}); it != cells.end()) {
        row.sample_count = it->second.n;
        row.mean_wer = it->second.wer / static_cast<double>(it->second.n);
        row.mean_f1 = it->second.f1 / static_cast<double>(it->second.n);
      }
      report.per_pair.push_back(std::move(row));
    }
  }

  for (const auto& [provider, supported] : support) {
    const auto it = overall.find(provider);
    if (it == overall.end()) continue;
    AggregateRow row;
    row.provider_id = provider;
    row.key = "overall";
    row.sample_count = it->second.n;
    row.mean_wer = it->second.wer / static_cast<double>(it->second.n);
    row.mean_f1 = it->second.f1 / static_cast<double>(it->second.n);
    for (auto pair : pairs) {
      if (supported.contains(pair)) {
        ++row.pair_count;
      } else {
        row.comparable = false;
      }
    }
    report.overall.push_back(std::move(row));
  }
  std::stable_sort(report.overall.begin(), report.overall.end(), [](const AggregateRow& a, const AggregateRow& b) {
    if (a.comparable != b.comparable) return a.comparable;
    if (*a.mean_wer != *b.mean_wer) return *a.mean_wer < *b.mean_wer;
    return a.provider_id < b.provider_id;
  });
  return report;
}

QuartileTable quartile_table(std::span<const MetricRecord> records, std::span<const QuartileAssignment> quartiles,
                             const SupportMap& support) {
  QuartileTable table;
  const auto pairs = evaluated_pairs(records);
  std::map<std::string, Quartile> quartile_of;
  for (const auto& q : quartiles) {
    quartile_of[q.sample_id] = q.quartile;
    ++table.sample_count[q.quartile];
  }

  std::map<std::string, Sums> overall;
  std::map<std::pair<Quartile, std::string>, Sums> cells;
  for (const auto& r : records) {
    const auto sup = support.find(r.provider_id);
    if (sup == support.end()) continue;
    if (!std::includes(sup->second.begin(), sup->second.end(), pairs.begin(), pairs.end())) continue;
    const auto q = quartile_of.find(r.sample_id);
    if (q == quartile_of.end()) continue;
    cells[{q->second, r.provider_id}].add(r);
    overall[r.provider_id].add(r);
  }
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [provider, s] : overall) order.emplace_back(s.wer / static_cast<double>(s.n), provider);
  std::sort(order.begin(), order.end());
  for (auto& [_, provider] : order) table.providers.push_back(provider);
  for (const auto& [key, s] : cells) {
    table.mean_wer[key.first][key.second] = s.wer / static_cast<double>(s.n);
    table.mean_f1[key.first][key.second] = s.f1 / static_cast<double>(s.n);
  }
  return table;
}

std::vector<ConcordanceRow> concordance_table(const std::map<LanguagePair, std::vector<SystemMetrics>>& per_pair) {
  std::vector<ConcordanceRow> out;
  for (const auto& [pair, systems] : per_pair) {
    std::vector<SystemScore> by_wer;
    std::vector<SystemScore> by_f1;
    for (const auto& s : systems) {
      by_wer.push_back({s.system, -s.wer});
      by_f1.push_back({s.system, s.f1});
    }
    try {
      const auto k = kendall_tau(by_wer, by_f1);
      out.push_back({pair, systems.size(), k.pairs, k.tau});
    } catch (const Error& e) {
      throw Error(fmt::format("concordance for {}: {}", to_code(pair), e.what()));
    }
  }
  return out;
}

std::map<LanguagePair, std::vector<SystemMetrics>> per_pair_systems(const AggregateReport& report) {
  std::map<LanguagePair, std::vector<SystemMetrics>> out;
  for (const auto& row : report.per_pair) {
    if (row.suppressed || !row.mean_wer) continue;
    out[parse_pair(row.key)].push_back({row.provider_id, *row.mean_wer, *row.mean_f1});
  }
  std::erase_if(out, [](const auto& kv) { return kv.second.size() < 2; });
  return out;
}

std::string truncate_codepoints(std::string_view text, std::size_t limit) {
  const auto cps = utf8::decode(text);
  if (cps.size() <= limit) return std::string(text);
  return utf8::encode(std::u32string_view(cps).substr(0, limit)) + "\u2026";
}

std::vector<DivergenceRow> top_divergence(std::span<const MetricRecord> records, const SupportMap& support,
                                          const TextLookup& texts, std::size_t k, double bold_threshold) {
  std::map<LanguagePair, std::vector<const MetricRecord*>> by_pair;
  for (const auto& r : records)
    if (supports(support, r.provider_id, r.pair)) by_pair[r.pair].push_back(&r);

  std::vector<DivergenceRow> out;
  for (auto& [pair, list] : by_pair) {
    std::sort(list.begin(), list.end(), [](const MetricRecord* a, const MetricRecord* b) {
      if (a->delta != b->delta) return a->delta > b->delta;
      if (a->sample_id != b->sample_id) return a->sample_id < b->sample_id;
      return a->provider_id < b->provider_id;
    });
    for (std::size_t i = 0; i < std::min(k, list.size()); ++i) {
      const auto& r = *list[i];
      DivergenceRow row;
      row.pair = pair;
      row.rank = i + 1;
      row.sample_id = r.sample_id;
      row.provider_id = r.provider_id;
      row.wer = r.wer.wer();
      row.f1 = r.bert.f1;
      row.delta = r.delta;
      row.bold = r.delta > bold_threshold;
      if (const auto it = texts.reference.find(r.sample_id); it != texts.reference.end())
        row.reference = truncate_codepoints(it->second);
      if (const auto it = texts.hypothesis.find({r.sample_id, r.provider_id}); it != texts.hypothesis.end())
        row.hypothesis = truncate_codepoints(it->second);
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::string plot_data_json(const AggregateReport& report, const QuartileTable& quartiles) {
  auto value = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json cells = ordered_json::array();
  for (const auto& row : report.per_pair) {
    for (const char* metric : {"wer", "f1"}) {
      const auto& v = std::string_view(metric) == "wer" ? row.mean_wer : row.mean_f1;
      cells.push_back({{"pair", row.key},
                       {"provider", row.provider_id},
                       {"metric", metric},
                       {"value", row.suppressed ? ordered_json(nullptr) : value(v)},
                       {"suppressed", row.suppressed},
                       {"samples", row.sample_count}});
    }
  }
  ordered_json q = ordered_json::array();
  for (auto quartile : kQuartiles) {
    for (const auto& provider : quartiles.providers) {
      for (const char* metric : {"wer", "f1"}) {
        const auto& table = std::string_view(metric) == "wer" ? quartiles.mean_wer : quartiles.mean_f1;
        std::optional<double> v;
        if (const auto row = table.find(quartile); row != table.end())
          if (const auto cell = row->second.find(provider); cell != row->second.end()) v = cell->second;
        q.push_back({{"quartile", to_string(quartile)}, {"provider", provider}, {"metric", metric}, {"value", value(v)}});
      }
    }
  }
  return ordered_json{{"grouped_bars", cells}, {"quartiles", q}}.dump(2) + "\n";
}

ReportFiles write_report(const ReportInputs& in, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportFiles files;
  auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = out_dir / name;
    write_file_atomic(path, content);
    files.written.push_back(path);
  };

  const AggregateReport agg = aggregate(in.records, in.support);

  {
    tsv::Writer w({"provider_id", "mean_wer", "mean_f1", "pairs", "samples", "comparable"});
    for (const auto& r : agg.overall)
      w.row({r.provider_id, fixed(r.mean_wer), fixed(r.mean_f1), std::to_string(r.pair_count),
             std::to_string(r.sample_count), r.comparable ? "yes" : "no"});
    emit("overall.tsv", w.str());
  }
  {
    tsv::Writer w({"pair", "provider_id", "mean_wer", "mean_f1", "samples", "suppressed"});
    for (const auto& r : agg.per_pair)
      w.row({r.key, r.provider_id, fixed(r.mean_wer), fixed(r.mean_f1), std::to_string(r.sample_count),
             r.suppressed ? "yes" : "no"});
    emit("per_pair.tsv", w.str());
  }

  // Quartiles over every sample that has at least one supported record.
  std::map<std::string, LanguagePair> cs_samples;
  for (const auto& r : in.records)
    if (supports(in.support, r.provider_id, r.pair)) cs_samples.emplace(r.sample_id, r.pair);
  std::vector<QuartileAssignment> quartiles;
  {
    std::vector<SampleDifficulty> pooled;
    std::map<LanguagePair, std::vector<SampleDifficulty>> split;
    for (const auto& [id, pair] : cs_samples) {
      const auto h = in.h_scores.find(id);
      if (h == in.h_scores.end()) throw Error(fmt::format("no H score for sample '{}'", id));
      pooled.push_back({id, h->second});
      split[pair].push_back({id, h->second});
    }
    try {
      quartiles = in.per_pair_quartiles ? assign_quartiles_per_pair(split) : assign_quartiles(pooled);
    } catch (const Error& e) {
      files.notes.push_back(fmt::format("quartile tables skipped: {}", e.what()));
    }
  }
  const QuartileTable qt = quartile_table(in.records, quartiles, in.support);
  {
    tsv::Writer w({"sample_id", "h_score", "quartile"});
    for (const auto& q : quartiles) w.row({q.sample_id, tsv::format_number(q.h_score), std::string(to_string(q.quartile))});
    emit("quartiles.tsv", w.str());
  }
  for (const auto& [name, table] :
       {std::pair{"quartile_wer.tsv", &qt.mean_wer}, std::pair{"quartile_bert.tsv", &qt.mean_f1}}) {
    std::vector<std::string> header = {"quartile", "samples"};
    header.insert(header.end(), qt.providers.begin(), qt.providers.end());
    tsv::Writer w(header);
    if (!quartiles.empty()) {
      for (auto q : kQuartiles) {
        std::vector<std::string> row = {quartile_label(q), std::to_string(qt.sample_count.count(q) ? qt.sample_count.at(q) : 0)};
        for (const auto& p : qt.providers) {
          std::optional<double> v;
          if (const auto it = table->find(q); it != table->end())
            if (const auto c = it->second.find(p); c != it->second.end()) v = c->second;
          row.push_back(fixed(v));
        }
        w.row(row);
      }
    }
    emit(name, w.str());
  }

  const auto concordance = concordance_table(per_pair_systems(agg));
  {
    tsv::Writer w({"pair", "n", "pairs", "tau"});
    for (const auto& c : concordance)
      w.row({std::string(to_code(c.pair)), std::to_string(c.systems), std::to_string(c.system_pairs), fixed(c.tau, 3)});
    emit("concordance.tsv", w.str());
  }

  const auto divergence = top_divergence(in.records, in.support, in.texts, in.divergence_k);
  {
    tsv::Writer w({"pair", "rank", "sample_id", "provider_id", "wer", "f1", "delta", "bold", "reference", "hypothesis"});
    for (const auto& d : divergence)
      w.row({std::string(to_code(d.pair)), std::to_string(d.rank), d.sample_id, d.provider_id, fixed(d.wer),
             fixed(d.f1), fixed(d.delta), d.bold ? "yes" : "no", d.reference, d.hypothesis});
    emit("divergence_top.tsv", w.str());
  }

  emit("plot_data.json", plot_data_json(agg, qt));

  std::ostringstream md;
  md << "# Benchmark summary\n\n";
  md << fmt::format("{} metric records across {} samples.\n\n", in.records.size(), cs_samples.size());
  md << "## Overall\n\n| System | Mean WER | Mean BERTScore F1 | Pairs |\n|---|---:|---:|---:|\n";
  bool any_incomparable = false;
  for (const auto& r : agg.overall) {
    any_incomparable |= !r.comparable;
    md << fmt::format("| {}{} | {:.1f}% | {:.3f} | {} |\n", r.provider_id, r.comparable ? "" : " \u2020",
                      *r.mean_wer * 100.0, *r.mean_f1, r.pair_count);
  }
  if (any_incomparable) md << "\n\u2020 Evaluated on a subset of pairs; not directly comparable.\n";
  md << "\n## Per pair\n\n| Pair | System | Mean WER | Mean BERTScore F1 | Samples |\n|---|---|---:|---:|---:|\n";
  for (const auto& r : agg.per_pair) {
    if (r.suppressed) {
      md << fmt::format("| {} | {} | suppressed | suppressed | {} |\n", r.key, r.provider_id, r.sample_count);
    } else if (r.mean_wer) {
      md << fmt::format("| {} | {} | {:.1f}% | {:.3f} | {} |\n", r.key, r.provider_id, *r.mean_wer * 100.0,
                        *r.mean_f1, r.sample_count);
    }
  }
  if (!concordance.empty()) {
    md << "\n## Rank concordance\n\n| Pair | n | Pairs | Kendall tau |\n|---|---:|---:|---:|\n";
    for (const auto& c : concordance)
      md << fmt::format("| {} | {} | {} | {:.3f} |\n", display_name(c.pair), c.systems, c.system_pairs, c.tau);
  }
  if (!divergence.empty()) {
    md << "\n## Largest WER / BERTScore divergence\n\n| Pair | Sample | System | WER | F1 | Delta |\n"
          "|---|---|---|---:|---:|---:|\n";
    for (const auto& d : divergence) {
      const std::string delta = fmt::format("{:.3f}", d.delta);
      md << fmt::format("| {} | {} | {} | {:.3f} | {:.3f} | {} |\n", to_code(d.pair), d.sample_id, d.provider_id,
                        d.wer, d.f1, d.bold ? "**" + delta + "**" : delta);
    }
  }
  for (const auto& n : files.notes) md << "\nNote: " << n << "\n";
  emit("summary.md", md.str());
  return files;
}

}  // namespace csb
