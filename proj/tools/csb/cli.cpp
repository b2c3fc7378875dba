#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "config.hpp"
#include "csb/analysis.hpp"
#include "csb/checkpoint.hpp"
#include "csb/corpus.hpp"
#include "csb/embedding.hpp"
#include "csb/ensemble.hpp"
#include "csb/error.hpp"
#include "csb/evaluation.hpp"
#include "csb/judges.hpp"
#include "csb/manifest.hpp"
#include "csb/metrics.hpp"
#include "csb/providers.hpp"
#include "csb/script_heuristics.hpp"
#include "csb/selection.hpp"
#include "csb/tsv.hpp"

#ifndef CSB_VERSION
#define CSB_VERSION "0.0.0"
#endif

namespace csb::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, 1> kCandidateColumns = {"sample_id"};
constexpr std::size_t kDefaultJobs = 4;

struct Globals {
  std::string config;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "csb-out";
};

struct Context {
  Globals globals;
  Config config;
  std::ostream& out;
  std::ostream& err;

  fs::path out_dir() const { return globals.out_dir; }
  std::size_t jobs() const { return globals.jobs.value_or(config.jobs.value_or(kDefaultJobs)); }
  std::uint64_t seed() const { return globals.seed.value_or(config.seed.value_or(0)); }
  fs::path default_path(const std::string& given, const char* name) const {
    return given.empty() ? out_dir() / name : fs::path(given);
  }
};

// Stage outcome recorded in the manifest.
enum class Outcome { complete, partial };

void record_stage(Context& ctx, const std::string& stage, Outcome outcome,
                  const std::function<void(RunManifest&)>& extra = {}) {
  const fs::path path = ctx.out_dir() / "manifest.json";
  RunManifest m = load_manifest(path).value_or(RunManifest{});
  m.config_hash = ctx.config.hash;
  m.run_id = make_run_id(ctx.config.hash, ctx.seed());
  m.tool_version = CSB_VERSION;
  m.seeds["global"] = ctx.seed();
  for (const auto& j : ctx.config.judges) {
    m.judges[j.id] = fmt::format("{}:{}", to_string(j.kind), j.kind == JudgeKind::stub ? "stub" : j.model);
    if (j.kind == JudgeKind::stub) m.seeds["judge:" + j.id] = j.seed;
  }
  for (const auto& p : ctx.config.providers) m.providers[p.provider_id] = p.model();
  m.stages[stage] = outcome == Outcome::complete ? "complete" : "partial";
  if (extra) extra(m);
  save_manifest(path, m);
}

std::vector<Dataset> load_datasets(const std::vector<std::string>& paths) {
  std::vector<Dataset> out;
  for (const auto& p : paths) out.push_back(load_dataset(p));
  return out;
}

std::vector<std::string> read_ids(const fs::path& path) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (auto& row : tsv::read_table(path, kCandidateColumns)) {
    if (row.fields[0].empty()) throw ParseError(path.string(), row.line, "empty sample id");
    if (!seen.insert(row.fields[0]).second)
      throw ParseError(path.string(), row.line, fmt::format("duplicate sample id '{}'", row.fields[0]));
    ids.push_back(std::move(row.fields[0]));
  }
  return ids;
}

void write_ids(const fs::path& path, std::span<const std::string> ids) {
  tsv::Writer w(kCandidateColumns);
  for (const auto& id : ids) w.row({id});
  write_file_atomic(path, w.str());
}

const SelectionPolicy& policy_for(const std::vector<SelectionPolicy>& policies, LanguagePair pair,
                                  const fs::path& source) {
  for (const auto& p : policies)
    if (p.pair == pair) return p;
  throw ValidationError("policies", fmt::format("{} has no policy for {}", source.string(), to_code(pair)));
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// ---------------------------------------------------------------------------

struct HeuristicArgs {
  std::string dataset;
  std::string pair;
  std::string out;
  std::string morph_rules;
  bool exact_signals = false;
};

int cmd_score_heuristic(Context& ctx, const HeuristicArgs& a) {
  const Dataset ds = a.pair.empty() ? load_dataset(a.dataset) : load_dataset(a.dataset, parse_pair(a.pair));
  MorphRules rules = MorphRules::defaults();
  if (!a.morph_rules.empty()) {
    rules = MorphRules::load(a.morph_rules);
  } else if (ctx.config.morph_rules) {
    rules = MorphRules::load(*ctx.config.morph_rules);
  }
  HScoreOptions options;
  options.round_signals = ctx.config.round_signals && !a.exact_signals;
  const auto scored = score_dataset(ds, rules, options);
  std::vector<HScoreRow> rows;
  rows.reserve(scored.size());
  for (const auto& s : scored) rows.push_back(s.row());
  const fs::path out = ctx.default_path(a.out, "scores.tsv");
  ensure_parent(out);
  write_scores(out, rows);
  ctx.out << fmt::format("scored {} {} samples -> {}\n", rows.size(), to_code(ds.pair), out.string());
  if (is_latin_only(ds.pair))
    ctx.out << "note: Latin-only pair, mixing and alternation signals forced to 0\n";
  record_stage(ctx, fmt::format("score-heuristic:{}", to_code(ds.pair)), Outcome::complete);
  return 0;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string stage;
  std::string policies;
  std::string pair;
  std::string dataset;
  std::string scores;
  std::string assessments;
  std::string out;
};

int cmd_select(Context& ctx, const SelectArgs& a) {
  const auto policies = load_policies(a.policies);
  if (a.stage == "presample") {
    if (a.dataset.empty()) throw ValidationError("--dataset", "--stage presample needs --dataset");
    const Dataset ds = a.pair.empty() ? load_dataset(a.dataset) : load_dataset(a.dataset, parse_pair(a.pair));
    const auto& policy = policy_for(policies, ds.pair, a.policies);
    if (ds.samples.size() != policy.source_size)
      ctx.err << fmt::format("warning: {} has {} samples, policy expects {}\n", a.dataset, ds.samples.size(),
                             policy.source_size);
    Dataset subset{ds.pair, {}};
    const std::uint64_t seed = ctx.globals.seed.value_or(policy.rng_seed);
    if (policy.pre_sample) {
      std::vector<std::string> ids;
      for (const auto& s : ds.samples) ids.push_back(s.id);
      for (const auto& id : csb::pre_sample(ids, *policy.pre_sample, seed)) subset.samples.push_back(*ds.find(id));
    } else {
      subset = ds;
      ctx.out << fmt::format("note: no pre-sample stage for {}; all samples forwarded\n", to_code(ds.pair));
    }
    const fs::path out = ctx.default_path(a.out, "presample.tsv");
    ensure_parent(out);
    write_dataset(out, subset);
    ctx.out << fmt::format("pre-sampled {} of {} {} samples -> {}\n", subset.samples.size(), ds.samples.size(),
                           to_code(ds.pair), out.string());
    record_stage(ctx, fmt::format("select-presample:{}", to_code(ds.pair)), Outcome::complete,
                 [&](RunManifest& m) { m.seeds[fmt::format("presample:{}", to_code(ds.pair))] = seed; });
    return 0;
  }

  if (a.pair.empty()) throw ValidationError("--pair", fmt::format("--stage {} needs --pair", a.stage));
  const LanguagePair pair = parse_pair(a.pair);
  const auto& policy = policy_for(policies, pair, a.policies);
  if (a.scores.empty()) throw ValidationError("--scores", fmt::format("--stage {} needs --scores", a.stage));
  const auto rows = load_scores(a.scores);

  if (a.stage == "stage1") {
    const auto result = stage1_select(rows, policy);
    for (const auto& w : result.warnings) ctx.err << "warning: " << w << "\n";
    const fs::path out = ctx.default_path(a.out, "candidates.tsv");
    ensure_parent(out);
    write_ids(out, result.ids);
    ctx.out << fmt::format("selected {} of {} {} samples for LLM scoring -> {}\n", result.ids.size(), rows.size(),
                           to_code(pair), out.string());
    record_stage(ctx, fmt::format("select-stage1:{}", to_code(pair)), Outcome::complete);
    return 0;
  }

  // final
  if (a.assessments.empty()) throw ValidationError("--assessments", "--stage final needs --assessments");
  const auto assessments = load_assessments(a.assessments);
  std::map<std::string, double> h;
  for (const auto& r : rows) h[r.sample_id] = r.composite;
  const auto ranked = final_select(assessments, h, policy.final_count);
  if (ranked.size() < policy.final_count)
    ctx.err << fmt::format("warning: only {} assessed candidates for a final set of {}\n", ranked.size(),
                           policy.final_count);
  const fs::path out = ctx.default_path(a.out, "final.tsv");
  ensure_parent(out);
  write_ranking(out, ranked);
  const auto flagged = std::count_if(assessments.begin(), assessments.end(),
                                     [](const EnsembleAssessment& e) { return e.flagged; });
  ctx.out << fmt::format("final {} selection: {} samples ({} assessments flagged for review) -> {}\n", to_code(pair),
                         ranked.size(), flagged, out.string());
  record_stage(ctx, fmt::format("select-final:{}", to_code(pair)), Outcome::complete);
  return 0;
}

// ---------------------------------------------------------------------------

struct EnsembleArgs {
  std::string dataset;
  std::string candidates;
  std::string store;
  std::string out;
};

int cmd_score_ensemble(Context& ctx, const EnsembleArgs& a) {
  const auto ids = read_ids(a.candidates);
  const fs::path out = ctx.default_path(a.out, "assessments.jsonl");
  if (ids.empty()) {
    ensure_parent(out);
    write_assessments(out, {});
    ctx.out << "no candidates; nothing to score\n";
    record_stage(ctx, "score-ensemble", Outcome::complete);
    return 0;
  }
  const Dataset ds = load_dataset(a.dataset);
  std::vector<Sample> candidates;
  for (const auto& id : ids) {
    const Sample* s = ds.find(id);
    if (!s) throw ValidationError("candidates", fmt::format("sample '{}' is not in {}", id, a.dataset));
    candidates.push_back(*s);
  }
  if (ctx.config.judges.size() != 2)
    throw ValidationError("judges", "the config must define exactly two judges for score-ensemble");

  std::shared_ptr<Transport> transport;
  for (const auto& j : ctx.config.judges)
    if (j.kind != JudgeKind::stub && !transport) transport = make_http_transport();
  auto judge_a = make_judge(ctx.config.judges[0], transport);
  auto judge_b = make_judge(ctx.config.judges[1], transport);

  const fs::path store_path = ctx.default_path(a.store, "checkpoint.sqlite");
  ensure_parent(store_path);
  CheckpointStore store(store_path);
  ScoringOptions options;
  options.max_in_flight = std::min(ctx.config.max_in_flight, ctx.jobs());
  options.transport_retry = ctx.config.judge_retry;
  options.validation_rerequests = ctx.config.validation_rerequests;
  const ScoringRun run = score_candidates(candidates, *judge_a, *judge_b, store, options);

  ensure_parent(out);
  write_assessments(out, run.assessments);
  const auto flagged = std::count_if(run.assessments.begin(), run.assessments.end(),
                                     [](const EnsembleAssessment& e) { return e.flagged; });
  ctx.out << fmt::format("scored {} of {} candidates ({} resumed, {} judge calls, {} flagged) -> {}\n",
                         run.assessments.size(), candidates.size(), run.resumed, run.judge_calls, flagged,
                         out.string());
  for (const auto& f : run.failed) ctx.err << fmt::format("failed: {}: {}\n", f.sample_id, f.reason);
  const Outcome outcome = run.failed.empty() ? Outcome::complete : Outcome::partial;
  record_stage(ctx, "score-ensemble", outcome);
  return outcome == Outcome::complete ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct TranscribeArgs {
  std::vector<std::string> datasets;
  std::string audio_root;
  std::string replay;
  std::string store;
  std::string out;
  std::vector<std::string> providers;
};

int cmd_transcribe(Context& ctx, const TranscribeArgs& a) {
  std::vector<TranscriptionJob> jobs;
  for (const auto& path : a.datasets) {
    const Dataset ds = load_dataset(path);
    const fs::path root = a.audio_root.empty() ? fs::path(path).parent_path() : fs::path(a.audio_root);
    auto part = make_jobs(ds, root);
    jobs.insert(jobs.end(), part.begin(), part.end());
  }

  std::vector<ProviderSpec> specs;
  for (const auto& s : ctx.config.providers)
    if (a.providers.empty() || std::find(a.providers.begin(), a.providers.end(), s.provider_id) != a.providers.end())
      specs.push_back(s);
  for (const auto& id : a.providers)
    if (std::none_of(specs.begin(), specs.end(), [&](const ProviderSpec& s) { return s.provider_id == id; }))
      throw ValidationError("--provider", fmt::format("provider '{}' is not configured", id));
  if (specs.empty()) throw ValidationError("providers", "no providers configured");

  std::vector<ProviderRuntime> runtimes;
  std::shared_ptr<const ReplayTable> replay;
  if (!a.replay.empty()) replay = std::make_shared<const ReplayTable>(ReplayTable::load(a.replay));
  std::shared_ptr<Transport> transport;
  for (const auto& s : specs) {
    if (replay) {
      runtimes.push_back({s, make_replay_adapter(replay, s.provider_id)});
    } else {
      if (!transport) transport = make_http_transport();
      runtimes.push_back({s, make_adapter(s, transport)});
    }
  }

  std::unique_ptr<FfmpegConverter> converter;
  if (std::any_of(specs.begin(), specs.end(),
                  [](const ProviderSpec& s) { return s.audio_requirement == AudioRequirement::wav16k_mono; }) &&
      !replay) {
    converter = std::make_unique<FfmpegConverter>(ctx.config.audio_cache.value_or(ctx.out_dir() / "audio_cache"),
                                                  ctx.config.ffmpeg);
  }

  const fs::path store_path = ctx.default_path(a.store, "checkpoint.sqlite");
  ensure_parent(store_path);
  CheckpointStore store(store_path);
  std::mutex err_mu;
  BenchmarkOptions options;
  options.jobs = ctx.jobs();
  options.store = &store;
  options.transcribe.retry = ctx.config.provider_retry;
  options.transcribe.converter = converter.get();
  options.transcribe.on_error = [&](const std::string& message) {
    std::lock_guard lock(err_mu);
    ctx.err << "provider error: " << message << "\n";
  };
  const BenchmarkRun run = run_benchmark(jobs, runtimes, options);

  const fs::path out = ctx.default_path(a.out, "results.tsv");
  ensure_parent(out);
  write_results(out, run.results);
  std::map<TranscriptionStatus, std::size_t> counts;
  for (const auto& r : run.results) ++counts[r.status];
  ctx.out << fmt::format("{} results: {} ok, {} unsupported_pair, {} provider_error ({} provider calls, {} resumed) -> {}\n",
                         run.results.size(), counts[TranscriptionStatus::ok],
                         counts[TranscriptionStatus::unsupported_pair], counts[TranscriptionStatus::provider_error],
                         run.provider_calls, run.resumed, out.string());
  const Outcome outcome = counts[TranscriptionStatus::provider_error] == 0 ? Outcome::complete : Outcome::partial;
  record_stage(ctx, "transcribe", outcome);
  return outcome == Outcome::complete ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> datasets;
  std::string results;
  std::string out;
  bool synthetic = false;
  std::string embed_endpoint;
  std::string embed_command;
  bool script_normalised = false;
};

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> out;
  for (std::string word; in >> word;) out.push_back(word);
  return out;
}

std::unique_ptr<EmbeddingBackend> make_backend(const Context& ctx, const EvaluateArgs& a) {
  SidecarOptions sidecar;
  sidecar.batch_size = ctx.config.embed_batch_size;
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(ctx.config.embed_timeout);
  if (a.synthetic) return std::make_unique<SyntheticEmbeddingBackend>();
  if (!a.embed_endpoint.empty()) {
    const auto [host, port] = parse_endpoint(a.embed_endpoint);
    return std::make_unique<SidecarEmbeddingBackend>(connect_tcp_channel(host, port, timeout), sidecar);
  }
  if (!a.embed_command.empty())
    return std::make_unique<SidecarEmbeddingBackend>(spawn_stdio_channel(split_command(a.embed_command), timeout),
                                                     sidecar);
  if (ctx.config.embed_endpoint) {
    const auto [host, port] = parse_endpoint(*ctx.config.embed_endpoint);
    return std::make_unique<SidecarEmbeddingBackend>(connect_tcp_channel(host, port, timeout), sidecar);
  }
  if (!ctx.config.embed_command.empty())
    return std::make_unique<SidecarEmbeddingBackend>(spawn_stdio_channel(ctx.config.embed_command, timeout), sidecar);
  throw ValidationError("embedding backend",
                        "evaluate needs token embeddings: start the embedding sidecar and pass "
                        "--embed-endpoint HOST:PORT or --embed-command \"CMD\" (or set evaluation.embed_endpoint / "
                        "evaluation.embed_command in the config); use --synthetic-embeddings for offline fixture runs");
}

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  auto backend = make_backend(ctx, a);
  const auto datasets = load_datasets(a.datasets);
  const auto results = load_results(a.results);
  EvaluationOptions options;
  options.normalize.script_normalised = a.script_normalised || ctx.config.script_normalised;
  const EvaluationRun run = evaluate(datasets, results, *backend, options);
  const fs::path out = ctx.default_path(a.out, "metrics.tsv");
  ensure_parent(out);
  write_metrics(out, run.records);
  ctx.out << fmt::format("evaluated {} records ({} unsupported, {} provider errors skipped){} -> {}\n",
                         run.records.size(), run.skipped_unsupported, run.skipped_provider_error,
                         options.normalize.script_normalised ? ", script-normalised WER" : "", out.string());
  const auto meta = backend->metadata();
  record_stage(ctx, "evaluate", Outcome::complete, [&](RunManifest& m) {
    m.embedding_model = meta.model;
    m.embedding_layer = meta.layer;
  });
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> datasets;
  std::vector<std::string> scores;
  std::string metrics;
  std::string results;
  std::string report_dir;
  bool per_pair_quartiles = false;
};

int cmd_analyze(Context& ctx, const AnalyzeArgs& a) {
  ReportInputs in;
  std::map<std::string, LanguagePair> pair_of;
  for (const auto& ds : load_datasets(a.datasets)) {
    for (const auto& s : ds.samples) {
      pair_of[s.id] = s.pair;
      in.texts.reference[s.id] = s.transcript;
    }
  }
  for (const auto& path : a.scores)
    for (const auto& row : load_scores(path)) in.h_scores[row.sample_id] = row.composite;
  if (!a.results.empty())
    for (const auto& r : load_results(a.results)) in.texts.hypothesis[{r.sample_id, r.provider_id}] = r.hypothesis_raw;
  in.records = load_metrics(a.metrics, pair_of);
  for (const auto& p : ctx.config.providers) in.support[p.provider_id] = p.supported_pairs;
  std::set<std::string> unknown;
  for (const auto& r : in.records)
    if (!in.support.contains(r.provider_id)) unknown.insert(r.provider_id);
  for (const auto& id : unknown) ctx.err << fmt::format("warning: provider '{}' is not configured; ignored\n", id);
  in.per_pair_quartiles = a.per_pair_quartiles || ctx.config.per_pair_quartiles;
  in.divergence_k = ctx.config.divergence_k;

  const fs::path dir = a.report_dir.empty() ? ctx.out_dir() / "report" : fs::path(a.report_dir);
  const ReportFiles files = write_report(in, dir);
  for (const auto& n : files.notes) ctx.err << "note: " << n << "\n";
  ctx.out << fmt::format("wrote {} report files to {}\n", files.written.size(), dir.string());
  record_stage(ctx, "analyze", Outcome::complete);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_audit(Context& ctx, const std::string& policies) {
  ctx.out << format_reduction_report(audit_reduction(load_policies(policies)));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Code-switching speech recognition benchmark pipeline.", "csb"};
  app.set_version_flag("--version", CSB_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Run configuration file (JSON)");
  app.add_option("--jobs", g.jobs, "Upper bound on concurrent workers")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed override for randomized stages");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs, checkpoints and the run manifest")
      ->capture_default_str();

  HeuristicArgs heur;
  auto* sh = app.add_subcommand("score-heuristic", "Stage 1: composite heuristic difficulty score per sample");
  sh->add_option("--dataset", heur.dataset, "Sample table (id, pair, transcript, audio_ref)")->required();
  sh->add_option("--pair", heur.pair, "Expected language pair (ar-eg-en, ar-sa-en, fa-en, de-en)");
  sh->add_option("--out", heur.out, "Score table (default: <out-dir>/scores.tsv)");
  sh->add_option("--morph-rules", heur.morph_rules, "Morphological blending rule file");
  sh->add_flag("--exact-signals", heur.exact_signals, "Do not round component signals to one decimal");

  SelectArgs sel;
  auto* ss = app.add_subcommand("select", "Pre-sampling, Stage 1 filtering and final top-k selection");
  ss->add_option("--stage", sel.stage, "presample | stage1 | final")
      ->required()
      ->check(CLI::IsMember({"presample", "stage1", "final"}));
  ss->add_option("--policies", sel.policies, "Per-pair selection policy file (JSON)")->required();
  ss->add_option("--pair", sel.pair, "Language pair (required for stage1 and final)");
  ss->add_option("--dataset", sel.dataset, "Sample table to pre-sample (presample)");
  ss->add_option("--scores", sel.scores, "Heuristic score table (stage1, final)");
  ss->add_option("--assessments", sel.assessments, "Ensemble assessments (final)");
  ss->add_option("--out", sel.out, "Output table");

  EnsembleArgs ens;
  auto* se = app.add_subcommand("score-ensemble", "Stage 2: two-judge LLM difficulty assessment with resume");
  se->add_option("--dataset", ens.dataset, "Sample table holding the candidates")->required();
  se->add_option("--candidates", ens.candidates, "Candidate id table (sample_id)")->required();
  se->add_option("--store", ens.store, "Checkpoint store (default: <out-dir>/checkpoint.sqlite)");
  se->add_option("--out", ens.out, "Assessments, one JSON document per line (default: <out-dir>/assessments.jsonl)");

  TranscribeArgs tr;
  auto* st = app.add_subcommand("transcribe", "Run every configured ASR provider over the samples");
  st->add_option("--dataset", tr.datasets, "Sample table (repeatable)")->required();
  st->add_option("--audio-root", tr.audio_root, "Directory audio_ref paths are relative to (default: dataset dir)");
  st->add_option("--replay", tr.replay, "Offline replay table (sample_id, provider_id, hypothesis)");
  st->add_option("--provider", tr.providers, "Restrict to these provider ids (repeatable)");
  st->add_option("--store", tr.store, "Checkpoint store (default: <out-dir>/checkpoint.sqlite)");
  st->add_option("--out", tr.out, "Result table (default: <out-dir>/results.tsv)");

  EvaluateArgs ev;
  auto* sv = app.add_subcommand("evaluate", "WER and BERTScore for every successful transcription");
  sv->add_option("--dataset", ev.datasets, "Sample table with references (repeatable)")->required();
  sv->add_option("--results", ev.results, "Result table from transcribe")->required();
  sv->add_option("--out", ev.out, "Metric table (default: <out-dir>/metrics.tsv)");
  auto* syn = sv->add_flag("--synthetic-embeddings", ev.synthetic, "Use deterministic synthetic embeddings (fixtures)");
  auto* ep = sv->add_option("--embed-endpoint", ev.embed_endpoint, "Embedding sidecar at HOST:PORT");
  auto* ec = sv->add_option("--embed-command", ev.embed_command, "Spawn the embedding sidecar and talk over stdio");
  sv->add_flag("--script-normalised", ev.script_normalised,
               "Unify alef/hamza forms, ta marbuta, diacritics and digits before WER");

  AnalyzeArgs an;
  auto* sa = app.add_subcommand("analyze", "Aggregate tables, quartiles, rank concordance and divergence report");
  sa->add_option("--dataset", an.datasets, "Sample table (repeatable)")->required();
  sa->add_option("--scores", an.scores, "Heuristic score table (repeatable)")->required();
  sa->add_option("--metrics", an.metrics, "Metric table from evaluate")->required();
  sa->add_option("--results", an.results, "Result table, for hypothesis text in the divergence table");
  sa->add_option("--report-dir", an.report_dir, "Report directory (default: <out-dir>/report)");
  sa->add_flag("--per-pair-quartiles", an.per_pair_quartiles, "Cut difficulty quartiles within each pair");

  std::string audit_policies;
  auto* sd = app.add_subcommand("audit", "LLM call reduction achieved by the selection policies");
  sd->add_option("--policies", audit_policies, "Per-pair selection policy file (JSON)")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  // Checked here rather than with excludes(): CLI11 lists exclusions in pointer order, which makes help unstable.
  if ((syn->count() > 0) + (ep->count() > 0) + (ec->count() > 0) > 1) {
    err << "csb evaluate: --synthetic-embeddings, --embed-endpoint and --embed-command are mutually exclusive\n";
    return 2;
  }

  try {
    Context ctx{g, load_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config)), out, err};
    if (sh->parsed()) return cmd_score_heuristic(ctx, heur);
    if (ss->parsed()) return cmd_select(ctx, sel);
    if (se->parsed()) return cmd_score_ensemble(ctx, ens);
    if (st->parsed()) return cmd_transcribe(ctx, tr);
    if (sv->parsed()) return cmd_evaluate(ctx, ev);
    if (sa->parsed()) return cmd_analyze(ctx, an);
    if (sd->parsed()) return cmd_audit(ctx, audit_policies);
  } catch (const std::exception& e) {
    err << "csb: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace csb::cli
