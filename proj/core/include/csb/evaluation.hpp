#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csb/corpus.hpp"
#include "csb/embedding.hpp"
#include "csb/metrics.hpp"

namespace csb {

struct EvaluationOptions {
  NormalizeOptions normalize{};
};

struct EvaluationRun {
  std::vector<MetricRecord> records;  // result order
  std::size_t skipped_unsupported = 0;
  std::size_t skipped_provider_error = 0;
};

// Scores every `ok` result against its reference transcript. WER uses the
// normalized tokens; BERTScore embeds the normalized texts, each distinct text
// once. An empty normalized hypothesis scores P = R = F1 = 0. A result whose
// sample is unknown, or whose reference normalizes to nothing, is an error.
EvaluationRun evaluate(std::span<const Dataset> datasets, std::span<const TranscriptionResult> results,
                       EmbeddingBackend& backend, const EvaluationOptions& options = {});

}  // namespace csb
