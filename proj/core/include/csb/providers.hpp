#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csb/checkpoint.hpp"
#include "csb/corpus.hpp"
#include "csb/judges.hpp"
#include "csb/transport.hpp"

namespace csb {

enum class ProviderKind { elevenlabs, openai, google, azure, deepgram };
enum class AudioRequirement { original, wav16k_mono };

std::string_view to_string(ProviderKind kind) noexcept;
std::optional<ProviderKind> try_parse_provider_kind(std::string_view text) noexcept;
std::string_view to_string(AudioRequirement requirement) noexcept;
std::optional<AudioRequirement> try_parse_audio_requirement(std::string_view text) noexcept;

// One request parameter. `json` is the value as compact JSON text, e.g.
// "\"nova-3\"", "false" or "[\"auto\"]", so the configured parameter set is
// sent verbatim.
struct ProviderParam {
  std::string name;
  std::string json;

  bool operator==(const ProviderParam&) const = default;
};

struct ProviderSpec {
  std::string provider_id;
  ProviderKind kind = ProviderKind::elevenlabs;
  std::string endpoint;
  std::vector<ProviderParam> params;
  // Candidate recognition locales per pair (azure only).
  std::map<LanguagePair, std::vector<std::string>> locales;
  std::set<LanguagePair> supported_pairs;
  std::size_t max_concurrency = 1;
  AudioRequirement audio_requirement = AudioRequirement::original;
  std::string api_key_env;  // defaults to CSB_<PROVIDER_ID>_KEY

  bool supports(LanguagePair pair) const { return supported_pairs.contains(pair); }
  // Compact JSON text of a parameter, or nullopt.
  std::optional<std::string> param(std::string_view name) const;
  std::string model() const;  // the model / model_id parameter as a plain string
};

std::string default_key_env(std::string_view provider_id);

// Throws ValidationError naming the offending field. Enforces: deepgram
// never lists an Arabic-script pair; azure runs one request at a time on
// 16 kHz mono WAV and has candidate locales for every supported pair.
void validate(const ProviderSpec& spec);

// The five evaluated systems with their benchmark parameters.
std::vector<ProviderSpec> default_provider_specs();

// {"providers": [ {provider_id, kind, endpoint, params{}, locales{}, supported_pairs[],
//   max_concurrency, audio_requirement, api_key_env}, ... ]}
std::vector<ProviderSpec> parse_provider_specs(std::string_view json_text, std::string_view source = "<providers>");
std::string provider_specs_to_json(std::span<const ProviderSpec> specs);

struct TranscriptionJob {
  std::string sample_id;
  std::filesystem::path audio_path;
  LanguagePair pair = LanguagePair::EgyptianArabicEnglish;
};

// audio_root / sample.audio_ref for each sample.
std::vector<TranscriptionJob> make_jobs(const Dataset& dataset, const std::filesystem::path& audio_root);

class ProviderAdapter {
 public:
  virtual ~ProviderAdapter() = default;
  // Returns the raw hypothesis. Throws TransportError (retryable),
  // HttpStatusError or ValidationError (malformed response).
  virtual std::string transcribe(const TranscriptionJob& job, const std::filesystem::path& audio) = 0;
  // Replay results are stamped with zero latency so runs are byte-identical.
  virtual bool measures_latency() const { return true; }
};

std::unique_ptr<ProviderAdapter> make_adapter(const ProviderSpec& spec, std::shared_ptr<Transport> transport,
                                              const SecretLookup& secrets = environment_secrets());

// Replay fixture: sample_id<TAB>provider_id<TAB>hypothesis.
inline constexpr std::array<std::string_view, 3> kReplayColumns = {"sample_id", "provider_id", "hypothesis"};

class ReplayTable {
 public:
  static ReplayTable load(const std::filesystem::path& path);
  void add(std::string sample_id, std::string provider_id, std::string hypothesis);
  std::optional<std::string> find(std::string_view sample_id, std::string_view provider_id) const;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, std::string, std::less<>> rows_;
};

// Answers from the table under the spec's provider id; a missing row is a
// non-retryable provider failure.
std::unique_ptr<ProviderAdapter> make_replay_adapter(std::shared_ptr<const ReplayTable> table, std::string provider_id);

class AudioConverter {
 public:
  virtual ~AudioConverter() = default;
  // Path to a 16 kHz mono PCM WAV rendition of `input`.
  virtual std::filesystem::path to_wav16k_mono(const std::filesystem::path& input) = 0;
};

// Shells out to ffmpeg with pinned arguments:
//   -nostdin -y -i <in> -ac 1 -ar 16000 -c:a pcm_s16le <out>
// Outputs are cached under `cache_dir` by SHA-256 of the input bytes.
class FfmpegConverter final : public AudioConverter {
 public:
  explicit FfmpegConverter(std::filesystem::path cache_dir, std::string binary = "ffmpeg");
  std::filesystem::path to_wav16k_mono(const std::filesystem::path& input) override;

  static std::vector<std::string> arguments(const std::filesystem::path& input, const std::filesystem::path& output);
  std::size_t conversions() const noexcept { return conversions_; }

 private:
  std::filesystem::path cache_dir_;
  std::string binary_;
  std::mutex mu_;
  std::size_t conversions_ = 0;
};

struct ProviderRuntime {
  ProviderSpec spec;
  std::shared_ptr<ProviderAdapter> adapter;
};

struct TranscribeOptions {
  BackoffPolicy retry{};
  AudioConverter* converter = nullptr;                        // required for wav16k_mono specs
  std::function<void(std::chrono::milliseconds)> sleep = {};  // backoff sleep; tests inject a no-op
  std::function<void(const std::string&)> on_error = {};      // provider failure messages
};

// Gating happens first: an unsupported pair yields unsupported_pair without
// touching the adapter or the audio. A missing audio file throws IoError.
// Adapter failures after retries yield provider_error.
TranscriptionResult transcribe(const TranscriptionJob& job, const ProviderRuntime& provider,
                               const TranscribeOptions& options, std::atomic<std::size_t>* calls = nullptr);

struct BenchmarkOptions {
  std::size_t jobs = 4;  // upper bound on workers per provider
  CheckpointStore* store = nullptr;
  std::string checkpoint_namespace = "transcriptions";
  TranscribeOptions transcribe{};
};

struct BenchmarkRun {
  std::vector<TranscriptionResult> results;  // provider-major, then job order
  std::size_t provider_calls = 0;            // adapter invocations, retries included
  std::size_t resumed = 0;                   // results taken from the checkpoint
};

// One result per (job, provider). Each provider gets its own worker pool of
// min(max_concurrency, jobs) workers. Successful results are checkpointed
// under "<provider_id>\t<sample_id>" and skipped on rerun. Audio for every
// supported job is checked before anything is dispatched.
BenchmarkRun run_benchmark(std::span<const TranscriptionJob> jobs, std::span<const ProviderRuntime> providers,
                           const BenchmarkOptions& options);

}  // namespace csb
