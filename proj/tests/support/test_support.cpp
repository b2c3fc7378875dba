#include "test_support.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cli.hpp"
#include "csb/tsv.hpp"

namespace csb::test {

fs::path test_dir() { return CSB_TEST_DIR; }
fs::path fixture(std::string_view name) { return test_dir() / "fixtures" / name; }
fs::path golden(std::string_view name) { return test_dir() / "golden" / name; }
fs::path config_dir() { return CSB_CONFIG_DIR; }
std::string python() {
  const std::string configured = CSB_PYTHON;
  return configured.empty() ? "python3" : configured;
}

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "csb-test-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) { return read_file(path); }

bool update_goldens() {
  const char* v = std::getenv("CSB_UPDATE_GOLDEN");
  return v != nullptr && std::string_view(v) == "1";
}

std::string golden_mismatch(const std::string& actual, const fs::path& golden_path) {
  if (update_goldens()) {
    write_text(golden_path, actual);
    return {};
  }
  if (!fs::exists(golden_path)) return fmt::format("golden {} does not exist (set CSB_UPDATE_GOLDEN=1)", golden_path.string());
  const std::string expected = read_text(golden_path);
  if (expected == actual) return {};
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) {
    if (expected[i] == '\n') ++line;
    ++i;
  }
  auto line_at = [](const std::string& s, std::size_t pos) {
    const auto begin = s.rfind('\n', pos == 0 ? 0 : pos - 1);
    const auto from = begin == std::string::npos || pos == 0 ? 0 : begin + 1;
    const auto end = s.find('\n', from);
    return s.substr(from, end == std::string::npos ? std::string::npos : end - from);
  };
  return fmt::format("{} differs at line {}:\n  expected: {}\n  actual:   {}", golden_path.filename().string(), line,
                     line_at(expected, i), line_at(actual, i));
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"csb"};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run(full, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

ScriptedTransport::ScriptedTransport(Handler handler, std::chrono::milliseconds hold)
    : handler_(std::move(handler)), hold_(hold) {}

HttpResponse ScriptedTransport::send(const HttpRequest& request) {
  const std::size_t now = ++in_flight_;
  std::size_t peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  if (hold_.count() > 0) std::this_thread::sleep_for(hold_);
  struct Leave {
    std::atomic<std::size_t>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  return handler_(request);
}

std::size_t ScriptedTransport::calls() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<HttpRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

CountingJudge::CountingJudge(std::string id, std::uint64_t seed) : inner_(std::move(id), seed) {}

std::string CountingJudge::complete(const std::string& prompt) {
  const std::size_t index = calls_++;
  if (before_call) before_call(index);
  return inner_.complete(prompt);
}

std::string judge_response(int overall, int dims, const std::vector<std::pair<std::string, int>>& overrides) {
  nlohmann::json d = nlohmann::json::object();
  for (auto dim : kAllDimensions) d[std::string(dimension_key(dim))] = {{"score", dims}, {"evidence", "e"}};
  for (const auto& [key, score] : overrides) d[key]["score"] = score;
  return nlohmann::json{{"overall_score", overall},
                        {"dimensions", d},
                        {"hard_tokens", nlohmann::json::array({{{"token", "t"}, {"reason", "r"}}})},
                        {"summary", "s"}}
      .dump();
}

PipelineRun run_fixture_pipeline(const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path fx = fixture("e2e");
  const std::vector<std::string> base{"--config", (fx / "csb.json").string(), "--out-dir", work.string()};
  PipelineRun run;
  auto step = [&](std::string name, std::vector<std::string> args) {
    std::vector<std::string> full = base;
    full.insert(full.end(), args.begin(), args.end());
    const auto r = run_cli(full);
    if (r.code != 0) run.failures.push_back(fmt::format("{}: exit {}: {}", name, r.code, r.err));
  };
  auto produced = [&](std::string golden_name, fs::path p) { run.artifacts.emplace_back(std::move(golden_name), std::move(p)); };

  const std::string policies = (fx / "policies.json").string();
  std::vector<std::string> datasets;
  std::vector<std::string> scores;
  for (const std::string pair : {"ar-eg-en", "de-en"}) {
    const std::string ds = (fx / (pair + ".tsv")).string();
    const auto sc = work / ("scores_" + pair + ".tsv");
    const auto cand = work / ("candidates_" + pair + ".tsv");
    const auto assess = work / ("assessments_" + pair + ".jsonl");
    const auto fin = work / ("final_" + pair + ".tsv");
    step("score-heuristic " + pair, {"score-heuristic", "--dataset", ds, "--pair", pair, "--out", sc.string()});
    step("select stage1 " + pair, {"select", "--stage", "stage1", "--policies", policies, "--pair", pair, "--scores",
                                   sc.string(), "--out", cand.string()});
    step("score-ensemble " + pair,
         {"score-ensemble", "--dataset", ds, "--candidates", cand.string(), "--out", assess.string()});
    step("select final " + pair, {"select", "--stage", "final", "--policies", policies, "--pair", pair, "--scores",
                                  sc.string(), "--assessments", assess.string(), "--out", fin.string()});
    produced("scores_" + pair + ".tsv", sc);
    produced("candidates_" + pair + ".tsv", cand);
    produced("assessments_" + pair + ".jsonl", assess);
    produced("final_" + pair + ".tsv", fin);
    datasets.push_back(ds);
    scores.push_back(sc.string());
  }

  std::vector<std::string> tr{"transcribe", "--replay", (fx / "replay.tsv").string(), "--out",
                              (work / "results.tsv").string()};
  std::vector<std::string> ev{"evaluate", "--results", (work / "results.tsv").string(), "--synthetic-embeddings",
                              "--out", (work / "metrics.tsv").string()};
  std::vector<std::string> an{"analyze", "--metrics", (work / "metrics.tsv").string(), "--results",
                              (work / "results.tsv").string(), "--report-dir", (work / "report").string()};
  for (const auto& ds : datasets) {
    for (auto* v : {&tr, &ev, &an}) {
      v->push_back("--dataset");
      v->push_back(ds);
    }
  }
  for (const auto& sc : scores) {
    an.push_back("--scores");
    an.push_back(sc);
  }
  step("transcribe", tr);
  step("evaluate", ev);
  step("analyze", an);
  produced("results.tsv", work / "results.tsv");
  produced("metrics.tsv", work / "metrics.tsv");
  for (const char* f : {"overall.tsv", "per_pair.tsv", "quartiles.tsv", "quartile_wer.tsv", "quartile_bert.tsv",
                        "concordance.tsv", "divergence_top.tsv", "plot_data.json", "summary.md"})
    produced(std::string("report/") + f, work / "report" / f);

  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace csb::test
