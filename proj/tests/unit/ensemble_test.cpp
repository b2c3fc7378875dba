#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "csb/checkpoint.hpp"
#include "csb/ensemble.hpp"
#include "csb/error.hpp"
#include "csb/judges.hpp"
#include "test_support.hpp"

using namespace csb;
using nlohmann::json;

namespace {

JudgeAssessment make_judge(std::string id, int overall, int dims) {
  JudgeAssessment a;
  a.judge_id = std::move(id);
  a.overall_score = overall;
  for (auto d : kAllDimensions) a.dimensions[static_cast<std::size_t>(d)] = {d, dims, "e"};
  return a;
}

std::vector<Sample> candidates(std::size_t n) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"c" + std::to_string(i), LanguagePair::PersianEnglish, "\u0645\u062A\u0646 \u0634\u0645\u0627\u0631\u0647 " + std::to_string(i) + " feature", ""});
  return out;
}

ScoringOptions fast_options(std::size_t in_flight = 1) {
  ScoringOptions o;
  o.max_in_flight = in_flight;
  o.transport_retry = {3, std::chrono::milliseconds(0), 1.0};
  return o;
}

std::string field_error(std::string_view raw) {
  try {
    parse_assessment(raw, "j");
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Prompt, ContainsTranscriptAndAllDimensionKeys) {
  const Sample s{"p1", LanguagePair::PersianEnglish, "\u0645\u0646 feature \u062C\u062F\u06CC\u062F \u0631\u0648 test \u06A9\u0631\u062F\u0645", ""};
  const auto prompt = build_prompt(s);
  EXPECT_NE(prompt.find(s.transcript), std::string::npos);
  EXPECT_NE(prompt.find("fa-en"), std::string::npos);
  for (auto d : kAllDimensions) EXPECT_NE(prompt.find(dimension_key(d)), std::string::npos) << dimension_key(d);
  EXPECT_EQ(build_prompt(s), prompt);
}

TEST(Prompt, EscapesQuotesAndNewlines) {
  const Sample s{"p2", LanguagePair::GermanEnglish, "er sagte \"hallo\"\nund ging", ""};
  const auto prompt = build_prompt(s);
  EXPECT_NE(prompt.find(R"("er sagte \"hallo\"\nund ging")"), std::string::npos);
  EXPECT_EQ(prompt.find("\"hallo\"\nund"), std::string::npos);
  EXPECT_NE(prompt.find("\"overall_score\""), std::string::npos);
}

TEST(ParseAssessment, AcceptsSchemaDocument) {
  const std::string raw = R"({
    "overall_score": 7,
    "dimensions": {
      "morphological_blending": {"score": 6, "evidence": "الـfeature"},
      "switching_density": {"score": 8, "evidence": "every clause"},
      "slang_and_register_mix": {"score": 3, "evidence": "x"},
      "phonological_ambiguity": {"score": 5, "evidence": "x"},
      "named_entity_jargon_density": {"score": 7, "evidence": "deployment"},
      "script_orthographic_complexity": {"score": 4, "evidence": "x"}
    },
    "hard_tokens": [{"token": "deploymentات", "reason": "suffix attached to an English stem"}],
    "summary": "dense switching"
  })";
  const auto a = parse_assessment(raw, "judge-1");
  EXPECT_EQ(a.judge_id, "judge-1");
  EXPECT_EQ(a.overall_score, 7);
  EXPECT_EQ(a.score_for(Dimension::SwitchingDensity).score, 8);
  EXPECT_EQ(a.score_for(Dimension::MorphologicalBlending).evidence, "\u0627\u0644\u0640feature");
  ASSERT_EQ(a.hard_tokens.size(), 1u);
  EXPECT_EQ(a.hard_tokens[0].token, "deployment\u0627\u062A");
  EXPECT_EQ(a.summary, "dense switching");
}

TEST(ParseAssessment, ToleratesCodeFenceAndProse) {
  const auto doc = test::judge_response(5, 4);
  EXPECT_EQ(parse_assessment("Here you go:\n```json\n" + doc + "\n```\n", "j").overall_score, 5);
}

TEST(ParseAssessment, RangeAndCompletenessErrorsNameTheField) {
  EXPECT_EQ(field_error(test::judge_response(11, 4)), "overall_score");
  EXPECT_EQ(field_error(test::judge_response(0, 4)), "overall_score");
  EXPECT_EQ(field_error(test::judge_response(5, 4, {{"switching_density", 12}})), "dimensions.switching_density.score");

  json five = json::parse(test::judge_response(5, 4));
  five["dimensions"].erase("phonological_ambiguity");
  EXPECT_EQ(field_error(five.dump()), "dimensions.phonological_ambiguity");

  json extra = json::parse(test::judge_response(5, 4));
  extra["dimensions"]["humor"] = {{"score", 1}, {"evidence", ""}};
  EXPECT_EQ(field_error(extra.dump()), "dimensions.humor");

  json many = json::parse(test::judge_response(5, 4));
  many["hard_tokens"] = json::array();
  for (int i = 0; i < 6; ++i) many["hard_tokens"].push_back({{"token", "t"}, {"reason", "r"}});
  EXPECT_EQ(field_error(many.dump()), "hard_tokens");

  json frac = json::parse(test::judge_response(5, 4));
  frac["overall_score"] = 5.5;
  EXPECT_EQ(field_error(frac.dump()), "overall_score");

  json nosum = json::parse(test::judge_response(5, 4));
  nosum.erase("summary");
  EXPECT_EQ(field_error(nosum.dump()), "summary");

  EXPECT_EQ(field_error(""), "response");
  EXPECT_EQ(field_error("{\"overall_score\": 5, \"dimen"), "response");
}

TEST(Combine, MeanOfOverallScores) {
  const auto e = combine(make_judge("a", 7, 5), make_judge("b", 9, 7), "s");
  EXPECT_EQ(e.ensemble_score, 8.0);
  EXPECT_FALSE(e.flagged);
  EXPECT_EQ(combine(make_judge("a", 7, 5), make_judge("b", 8, 5), "s").ensemble_score, 7.5);
  EXPECT_THROW(combine(make_judge("a", 7, 5), make_judge("a", 8, 5), "s"), ValidationError);
}

TEST(Combine, SwitchingDensityDisagreementFlags) {
  auto a = make_judge("a", 7, 5);
  auto b = make_judge("b", 9, 5);
  a.dimensions[static_cast<std::size_t>(Dimension::SwitchingDensity)].score = 2;
  b.dimensions[static_cast<std::size_t>(Dimension::SwitchingDensity)].score = 6;
  const auto e = combine(a, b, "s");
  EXPECT_TRUE(e.flagged);
  ASSERT_EQ(e.flag_reasons.size(), 1u);
  EXPECT_EQ(e.flag_reasons[0], (FlagReason{Dimension::SwitchingDensity, 4}));
}

TEST(Combine, IdenticalAssessmentsAgree) {
  auto a = make_judge("a", 6, 3);
  auto b = a;
  b.judge_id = "b";
  const auto e = combine(a, b, "s");
  EXPECT_EQ(e.ensemble_score, 6.0);
  EXPECT_FALSE(e.flagged);
}

TEST(Combine, ExhaustiveFlagGridAndExactMeans) {
  for (auto d : kAllDimensions) {
    for (int x = kMinScore; x <= kMaxScore; ++x) {
      for (int y = kMinScore; y <= kMaxScore; ++y) {
        auto a = make_judge("a", x, 5);
        auto b = make_judge("b", y, 5);
        a.dimensions[static_cast<std::size_t>(d)].score = x;
        b.dimensions[static_cast<std::size_t>(d)].score = y;
        const auto e = combine(a, b, "s");
        EXPECT_EQ(e.flagged, std::abs(x - y) > 3) << x << " " << y;
        EXPECT_EQ(e.ensemble_score * 2.0, static_cast<double>(x + y));
        EXPECT_GE(e.ensemble_score, 1.0);
        EXPECT_LE(e.ensemble_score, 10.0);
        if (e.flagged) {
          ASSERT_EQ(e.flag_reasons.size(), 1u);
          EXPECT_EQ(e.flag_reasons[0].dimension, d);
          EXPECT_EQ(e.flag_reasons[0].difference, std::abs(x - y));
        }
      }
    }
  }
}

TEST(AssessmentIo, JsonLinesRoundTrip) {
  test::TempDir dir;
  auto a = make_judge("a", 7, 2);
  a.hard_tokens = {{"\u0627\u0644\u0640feature", "blend"}};
  a.summary = "line\nbreak \"quoted\"";
  const std::vector<EnsembleAssessment> v{combine(a, make_judge("b", 8, 9), "s1"),
                                          combine(make_judge("a", 1, 1), make_judge("b", 2, 1), "s2")};
  write_assessments(dir / "a.jsonl", v);
  EXPECT_EQ(load_assessments(dir / "a.jsonl"), v);
  EXPECT_EQ(from_json_line(to_json_line(v[0])), v[0]);
}

TEST(AssessmentIo, InconsistentRecordIsRejected) {
  json j = json::parse(to_json_line(combine(make_judge("a", 7, 2), make_judge("b", 8, 2), "s")));
  j["ensemble_score"] = 9.0;
  EXPECT_THROW(from_json_line(j.dump()), ValidationError);
  j["ensemble_score"] = 7.5;
  j["flagged"] = true;
  EXPECT_THROW(from_json_line(j.dump()), ValidationError);
}

TEST(ScoreCandidates, TwoCallsPerCandidate) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  test::CountingJudge a("a", 1), b("b", 2);
  const auto c = candidates(10);
  const auto run = score_candidates(c, a, b, store, fast_options(3));
  EXPECT_EQ(run.assessments.size(), 10u);
  EXPECT_EQ(run.judge_calls, 20u);
  EXPECT_EQ(a.calls() + b.calls(), 20u);
  EXPECT_TRUE(run.failed.empty());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(run.assessments[i].sample_id, c[i].id);
}

TEST(ScoreCandidates, EmptyInputMakesNoCalls) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  test::CountingJudge a("a", 1), b("b", 2);
  const auto run = score_candidates({}, a, b, store, fast_options());
  EXPECT_TRUE(run.assessments.empty());
  EXPECT_EQ(run.judge_calls, 0u);
}

TEST(ScoreCandidates, SecondRunIsIdempotent) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  test::CountingJudge a("a", 1), b("b", 2);
  const auto c = candidates(5);
  const auto first = score_candidates(c, a, b, store, fast_options(2));
  const auto second = score_candidates(c, a, b, store, fast_options(2));
  EXPECT_EQ(second.judge_calls, 0u);
  EXPECT_EQ(second.resumed, 5u);
  EXPECT_EQ(second.assessments, first.assessments);
}

TEST(ScoreCandidates, ResumeAfterCrashCallsOnlyForRemaining) {
  test::TempDir dir;
  const auto path = dir / "c.sqlite";
  const auto c = candidates(10);

  const pid_t pid = ::fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    CheckpointStore store(path);
    test::CountingJudge a("a", 1), b("b", 2);
    a.before_call = [](std::size_t index) {
      if (index == 6) ::_exit(3);  // dies while the seventh sample is in flight
    };
    score_candidates(c, a, b, store, fast_options(1));
    ::_exit(0);
  }
  int status = 0;
  ASSERT_EQ(::waitpid(pid, &status, 0), pid);
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 3);

  CheckpointStore store(path);
  EXPECT_EQ(store.count("assessments"), 6u);
  test::CountingJudge a("a", 1), b("b", 2);
  const auto run = score_candidates(c, a, b, store, fast_options(1));
  EXPECT_EQ(run.judge_calls, 8u);
  EXPECT_EQ(run.resumed, 6u);
  EXPECT_EQ(run.assessments.size(), 10u);

  test::TempDir fresh;
  CheckpointStore clean(fresh / "c.sqlite");
  test::CountingJudge a2("a", 1), b2("b", 2);
  EXPECT_EQ(score_candidates(c, a2, b2, clean, fast_options(1)).assessments, run.assessments);
}

TEST(ScoreCandidates, ValidationFailureGetsExactlyOneRerequest) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  test::FixedJudge bad("a", "I cannot help with that");
  test::FixedJudge good("b", test::judge_response(5, 5));
  const auto run = score_candidates(candidates(1), bad, good, store, fast_options());
  EXPECT_EQ(bad.calls.load(), 2u);
  EXPECT_TRUE(run.assessments.empty());
  ASSERT_EQ(run.failed.size(), 1u);
  EXPECT_EQ(run.failed[0].sample_id, "c0");
  EXPECT_EQ(store.count("assessments"), 0u);
}

namespace {

class FlakyJudge final : public JudgeClient {
 public:
  FlakyJudge(std::string id, int failures) : id_(std::move(id)), failures_(failures) {}
  const std::string& id() const override { return id_; }
  std::string complete(const std::string&) override {
    ++calls;
    if (failures_-- > 0) throw TransportError("503");
    return test::judge_response(6, 6);
  }
  int calls = 0;

 private:
  std::string id_;
  int failures_;
};

}  // namespace

TEST(ScoreCandidates, TransportErrorsRetryThreeTimes) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  FlakyJudge recovers("a", 2);
  test::FixedJudge good("b", test::judge_response(5, 5));
  auto run = score_candidates(candidates(1), recovers, good, store, fast_options());
  EXPECT_EQ(recovers.calls, 3);
  EXPECT_EQ(run.assessments.size(), 1u);

  test::TempDir dir2;
  CheckpointStore store2(dir2 / "c.sqlite");
  FlakyJudge gives_up("a", 5);
  run = score_candidates(candidates(1), gives_up, good, store2, fast_options());
  EXPECT_EQ(gives_up.calls, 3);
  EXPECT_EQ(run.failed.size(), 1u);
}

TEST(ScoreCandidates, CorruptCheckpointAborts) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  store.put("assessments", "c1", "{not json");
  test::CountingJudge a("a", 1), b("b", 2);
  EXPECT_THROW(score_candidates(candidates(3), a, b, store, fast_options()), StoreCorruption);
}

TEST(ScoreCandidates, SameJudgeTwiceIsRejected) {
  test::TempDir dir;
  CheckpointStore store(dir / "c.sqlite");
  test::CountingJudge a("a", 1), b("a", 2);
  EXPECT_THROW(score_candidates(candidates(1), a, b, store, fast_options()), ValidationError);
}

TEST(StubJudge, DeterministicAndSchemaValid) {
  StubJudge j("stub", 4);
  const auto prompt = build_prompt(candidates(1)[0]);
  EXPECT_EQ(j.complete(prompt), j.complete(prompt));
  EXPECT_NO_THROW(parse_assessment(j.complete(prompt), "stub"));
  EXPECT_NE(StubJudge("stub", 5).complete(prompt), j.complete(prompt));
}

TEST(RemoteJudges, OpenAiRequestShape) {
  auto transport = std::make_shared<test::ScriptedTransport>([](const HttpRequest&) {
    return HttpResponse{200, json{{"choices", {{{"finish_reason", "stop"},
                                                 {"message", {{"content", test::judge_response(4, 4)}}}}}}}
                                 .dump()};
  });
  JudgeConfig cfg{"gpt", JudgeKind::openai, "https://api.example/", "gpt-4o", 0.1, 2048, "KEY_A", 0};
  auto judge = make_judge(cfg, transport, [](const std::string& env) -> std::optional<std::string> {
    return env == "KEY_A" ? std::optional<std::string>("sk-1") : std::nullopt;
  });
  EXPECT_EQ(parse_assessment(judge->complete("prompt"), "gpt").overall_score, 4);
  const auto req = transport->requests().at(0);
  EXPECT_EQ(req.url, "https://api.example/v1/chat/completions");
  const auto body = json::parse(req.body);
  EXPECT_EQ(body["model"], "gpt-4o");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.1);
  EXPECT_EQ(body["response_format"]["type"], "json_object");
  EXPECT_EQ(body["messages"][0]["content"], "prompt");
  EXPECT_EQ(req.headers.at(0).second, "Bearer sk-1");
}

TEST(RemoteJudges, TruncatedCompletionIsAValidationFailure) {
  auto transport = std::make_shared<test::ScriptedTransport>([](const HttpRequest&) {
    return HttpResponse{200, json{{"candidates", {{{"finishReason", "MAX_TOKENS"},
                                                    {"content", {{"parts", {{{"text", "{\"overall"}}}}}}}}}}
                                 .dump()};
  });
  JudgeConfig cfg{"gem", JudgeKind::gemini, "https://g.example", "gemini-1.5-pro", 0.1, 2048, "KEY_B", 0};
  auto judge = make_judge(cfg, transport, [](const std::string&) { return std::optional<std::string>("k"); });
  EXPECT_THROW(judge->complete("p"), ValidationError);
  const auto req = transport->requests().at(0);
  EXPECT_EQ(req.url, "https://g.example/v1beta/models/gemini-1.5-pro:generateContent");
  EXPECT_EQ(json::parse(req.body)["generationConfig"]["responseMimeType"], "application/json");
}

TEST(RemoteJudges, MissingKeyAndBadConfigNameTheField) {
  JudgeConfig cfg{"gpt", JudgeKind::openai, "https://api.example", "gpt-4o", 0.1, 2048, "NOT_SET_ANYWHERE", 0};
  try {
    make_judge(cfg, nullptr, [](const std::string&) { return std::optional<std::string>(); });
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "api_key_env");
  }
  cfg.model = "";
  try {
    validate(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "model");
  }
  cfg.temperature = 3.0;
  EXPECT_THROW(validate(cfg), ValidationError);
}
