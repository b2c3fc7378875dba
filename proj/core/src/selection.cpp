#include "csb/selection.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <unordered_set>

#include "csb/error.hpp"
#include "csb/tsv.hpp"

namespace csb {

void SelectionPolicy::validate() const {
  if (pre_sample && *pre_sample > source_size)
    throw ValidationError("pre_sample", fmt::format("{} exceeds source_size {}", *pre_sample, source_size));
  if (llm_candidate_count > pool_size())
    throw ValidationError("llm_candidate_count",
                          fmt::format("{} exceeds the pool of {} rows", llm_candidate_count, pool_size()));
  if (final_count > llm_candidate_count)
    throw ValidationError("final_count", fmt::format("{} exceeds llm_candidate_count {}", final_count, llm_candidate_count));
}

std::vector<SelectionPolicy> parse_policies(std::string_view json_text, std::string_view source) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(source), 0, e.what());
  }
  const auto list = root.is_object() ? root.find("policies") : root.end();
  if (list == root.end() || !list->is_array()) throw ValidationError("policies", "expected an array of policies");

  std::vector<SelectionPolicy> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& p = (*list)[i];
    const std::string prefix = fmt::format("policies[{}]", i);
    auto field = [&](const char* name) { return fmt::format("{}.{}", prefix, name); };
    auto count = [&](const char* name) -> std::size_t {
      const auto it = p.find(name);
      if (it == p.end()) throw ValidationError(field(name), "missing");
      if (!it->is_number_unsigned()) throw ValidationError(field(name), "expected a nonnegative integer");
      return it->get<std::size_t>();
    };
    if (!p.is_object()) throw ValidationError(prefix, "expected an object");
    SelectionPolicy policy;
    const auto pair = p.find("pair");
    if (pair == p.end() || !pair->is_string()) throw ValidationError(field("pair"), "missing");
    const auto parsed = try_parse_pair(pair->get<std::string>());
    if (!parsed) throw ValidationError(field("pair"), fmt::format("unknown pair '{}'", pair->get<std::string>()));
    policy.pair = *parsed;
    policy.source_size = count("source_size");
    if (const auto it = p.find("pre_sample"); it != p.end() && !it->is_null()) policy.pre_sample = count("pre_sample");
    policy.llm_candidate_count = count("llm_candidate_count");
    if (p.contains("final_count")) policy.final_count = count("final_count");
    if (p.contains("rng_seed")) policy.rng_seed = count("rng_seed");
    policy.forward_all = is_latin_only(policy.pair);
    if (const auto it = p.find("forward_all"); it != p.end()) {
      if (!it->is_boolean()) throw ValidationError(field("forward_all"), "expected a boolean");
      policy.forward_all = it->get<bool>();
    }
    try {
      policy.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(field(e.field().c_str()), e.detail());
    }
    out.push_back(policy);
  }
  return out;
}

std::vector<SelectionPolicy> load_policies(const std::filesystem::path& path) {
  return parse_policies(read_file(path), path.string());
}

std::vector<std::string> pre_sample(std::span<const std::string> ids, std::size_t n, std::uint64_t seed) {
  if (n > ids.size()) throw Error(fmt::format("cannot pre-sample {} of {} rows", n, ids.size()));
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::vector<std::string> out;
  out.reserve(n);
  const std::size_t total = ids.size();
  for (std::size_t t = 0; t < total && out.size() < n; ++t) {
    const double remaining = static_cast<double>(total - t);
    if (remaining * uniform() < static_cast<double>(n - out.size())) out.push_back(ids[t]);
  }
  return out;
}

Stage1Result stage1_select(std::span<const HScoreRow> scored, const SelectionPolicy& policy) {
  Stage1Result result;
  if (policy.forward_all) {
    for (const auto& r : scored) result.ids.push_back(r.sample_id);
    return result;
  }
  if (scored.size() < policy.llm_candidate_count)
    result.warnings.push_back(fmt::format("{}: pool of {} rows is smaller than the candidate count {}; forwarding the whole pool",
                                          to_code(policy.pair), scored.size(), policy.llm_candidate_count));
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scored[a].composite > scored[b].composite; });
  const std::size_t take = std::min(order.size(), policy.llm_candidate_count);
  for (std::size_t i = 0; i < take; ++i) result.ids.push_back(scored[order[i]].sample_id);
  return result;
}

std::vector<RankedCandidate> final_select(std::span<const EnsembleAssessment> assessments,
                                          const std::map<std::string, double>& h_scores, std::size_t k) {
  std::vector<RankedCandidate> pool;
  pool.reserve(assessments.size());
  std::unordered_set<std::string> seen;
  for (const auto& a : assessments) {
    const auto it = h_scores.find(a.sample_id);
    if (it == h_scores.end()) throw Error(fmt::format("no H score for assessed sample '{}'", a.sample_id));
    if (!seen.insert(a.sample_id).second) throw Error(fmt::format("sample '{}' assessed twice", a.sample_id));
    pool.push_back({a.sample_id, a.ensemble_score, it->second, 0});
  }
  std::sort(pool.begin(), pool.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.ensemble_score != b.ensemble_score) return a.ensemble_score > b.ensemble_score;
    if (a.h_score != b.h_score) return a.h_score > b.h_score;
    return a.sample_id < b.sample_id;
  });
  if (pool.size() > k) pool.resize(k);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].rank = i + 1;
  return pool;
}

std::string format_ranking(std::span<const RankedCandidate> ranked) {
  tsv::Writer w(kRankingColumns);
  for (const auto& r : ranked)
    w.row({std::to_string(r.rank), r.sample_id, tsv::format_number(r.ensemble_score), tsv::format_number(r.h_score)});
  return w.str();
}

void write_ranking(const std::filesystem::path& path, std::span<const RankedCandidate> ranked) {
  write_file_atomic(path, format_ranking(ranked));
}

std::vector<RankedCandidate> load_ranking(const std::filesystem::path& path) {
  std::vector<RankedCandidate> out;
  for (const auto& row : tsv::read_table(path, kRankingColumns)) {
    try {
      out.push_back({row.fields[1], tsv::parse_number(row.fields[2]), tsv::parse_number(row.fields[3]),
                     static_cast<std::size_t>(tsv::parse_count(row.fields[0]))});
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), row.line, e.what());
    }
  }
  return out;
}

ReductionReport audit_reduction(std::span<const SelectionPolicy> policies) {
  ReductionReport report;
  for (const auto& p : policies) {
    PolicyReduction r;
    r.pair = p.pair;
    r.source_size = p.source_size;
    r.pre_sample = p.pre_sample;
    r.llm_candidates = p.llm_candidate_count;
    if (p.source_size > 0)
      r.reduction_vs_source = 1.0 - static_cast<double>(p.llm_candidate_count) / static_cast<double>(p.source_size);
    if (p.pre_sample && *p.pre_sample > 0)
      r.reduction_vs_pre_sample = 1.0 - static_cast<double>(p.llm_candidate_count) / static_cast<double>(*p.pre_sample);
    report.policies.push_back(r);
    if (uses_arabic_script(p.pair)) {
      report.candidates_total += p.llm_candidate_count;
      report.source_total += p.source_size;
    }
  }
  if (report.source_total > 0) {
    report.candidate_fraction = static_cast<double>(report.candidates_total) / static_cast<double>(report.source_total);
    report.reduction = 1.0 - report.candidate_fraction;
  }
  return report;
}

std::string format_reduction_report(const ReductionReport& report) {
  std::string out = "pair\tsource\tpre_sample\tllm_candidates\treduction_vs_source\treduction_vs_pre_sample\n";
  for (const auto& r : report.policies) {
    out += fmt::format("{}\t{}\t{}\t{}\t{:.1f}%\t{}\n", to_code(r.pair), r.source_size,
                       r.pre_sample ? std::to_string(*r.pre_sample) : std::string("none"), r.llm_candidates,
                       100.0 * r.reduction_vs_source,
                       r.reduction_vs_pre_sample ? fmt::format("{:.1f}%", 100.0 * *r.reduction_vs_pre_sample)
                                                 : std::string("n/a"));
  }
  out += fmt::format(
      "Arabic-script pairs: {} of {} source rows sent to LLM scoring ({:.1f}%); LLM call reduction {:.1f}%\n",
      report.candidates_total, report.source_total, 100.0 * report.candidate_fraction, 100.0 * report.reduction);
  return out;
}

}  // namespace csb
