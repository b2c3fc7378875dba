#include "csb/evaluation.hpp"

#include <fmt/format.h>

#include <map>

#include "csb/error.hpp"

namespace csb {

EvaluationRun evaluate(std::span<const Dataset> datasets, std::span<const TranscriptionResult> results,
                       EmbeddingBackend& backend, const EvaluationOptions& options) {
  std::map<std::string, const Sample*, std::less<>> samples;
  for (const auto& d : datasets)
    for (const auto& s : d.samples)
      if (!samples.emplace(s.id, &s).second) throw Error(fmt::format("sample id '{}' appears in two datasets", s.id));

  struct Pending {
    const TranscriptionResult* result;
    const Sample* sample;
    NormalizedText ref;
    NormalizedText hyp;
  };
  EvaluationRun run;
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> text_index;
  std::vector<std::string> texts;
  auto intern = [&](const std::string& text) {
    if (text_index.emplace(text, texts.size()).second) texts.push_back(text);
  };

  for (const auto& r : results) {
    if (r.status == TranscriptionStatus::unsupported_pair) {
      ++run.skipped_unsupported;
      continue;
    }
    if (r.status == TranscriptionStatus::provider_error) {
      ++run.skipped_provider_error;
      continue;
    }
    const auto it = samples.find(r.sample_id);
    if (it == samples.end()) throw Error(fmt::format("result for unknown sample '{}'", r.sample_id));
    Pending p{&r, it->second, normalize(it->second->transcript, options.normalize),
              normalize(r.hypothesis_raw, options.normalize)};
    if (p.ref.tokens.empty())
      throw Error(fmt::format("reference transcript of sample '{}' is empty after normalization", r.sample_id));
    intern(p.ref.joined());
    if (!p.hyp.tokens.empty()) intern(p.hyp.joined());
    pending.push_back(std::move(p));
  }

  const auto embeddings = texts.empty() ? std::vector<TokenEmbeddings>{} : backend.embed_tokens(texts);
  if (embeddings.size() != texts.size())
    throw Error(fmt::format("embedding backend returned {} results for {} texts", embeddings.size(), texts.size()));

  for (const auto& p : pending) {
    const WerOutcome w = wer(p.ref, p.hyp);
    BertScoreOutcome b;
    if (!p.hyp.tokens.empty())
      b = bertscore(embeddings[text_index.at(p.ref.joined())], embeddings[text_index.at(p.hyp.joined())]);
    run.records.push_back(make_metric_record(p.result->sample_id, p.result->provider_id, p.sample->pair, w, b));
  }
  return run;
}

}  // namespace csb
