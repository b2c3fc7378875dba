#include <gtest/gtest.h>

#include <random>

#include "csb/corpus.hpp"
#include "csb/error.hpp"
#include "csb/tsv.hpp"
#include "csb/utf8.hpp"
#include "test_support.hpp"

using namespace csb;

namespace {

std::string sample_file(const std::vector<std::array<std::string, 4>>& rows) {
  std::string s = "id\tpair\ttranscript\taudio_ref\n";
  for (const auto& r : rows) s += r[0] + "\t" + r[1] + "\t" + r[2] + "\t" + r[3] + "\n";
  return s;
}

}  // namespace

TEST(Corpus, PairCodesRoundTrip) {
  for (auto p : kAllPairs) EXPECT_EQ(parse_pair(to_code(p)), p);
  EXPECT_FALSE(try_parse_pair("en-de").has_value());
  EXPECT_THROW(parse_pair("xx"), Error);
  EXPECT_TRUE(is_latin_only(LanguagePair::GermanEnglish));
  EXPECT_TRUE(uses_arabic_script(LanguagePair::PersianEnglish));
}

TEST(Corpus, LoadsInFileOrder) {
  test::TempDir dir;
  test::write_text(dir / "d.tsv", sample_file({{"s3", "fa-en", "\u0633\u0644\u0627\u0645 hello", "a/3.mp3"},
                                               {"s1", "fa-en", "second", "a/1.mp3"},
                                               {"s2", "fa-en", "third", "a/2.mp3"}}));
  const auto ds = load_dataset(dir / "d.tsv", LanguagePair::PersianEnglish);
  ASSERT_EQ(ds.samples.size(), 3u);
  EXPECT_EQ(ds.samples[0].id, "s3");
  EXPECT_EQ(ds.samples[1].id, "s1");
  EXPECT_EQ(ds.samples[2].id, "s2");
  EXPECT_EQ(ds.samples[0].transcript, "\u0633\u0644\u0627\u0645 hello");
  EXPECT_EQ(load_dataset(dir / "d.tsv").pair, LanguagePair::PersianEnglish);
  ASSERT_NE(ds.find("s1"), nullptr);
  EXPECT_EQ(ds.find("nope"), nullptr);
}

TEST(Corpus, DuplicateIdNamesTheId) {
  test::TempDir dir;
  test::write_text(dir / "d.tsv", sample_file({{"s1", "de-en", "a", "x"}, {"s1", "de-en", "b", "y"}}));
  try {
    load_dataset(dir / "d.tsv", LanguagePair::GermanEnglish);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos) << e.what();
  }
}

TEST(Corpus, RejectsBlankTranscriptEmptyIdAndForeignPair) {
  test::TempDir dir;
  test::write_text(dir / "blank.tsv", sample_file({{"s1", "de-en", "  \\t ", "x"}}));
  EXPECT_THROW(load_dataset(dir / "blank.tsv", LanguagePair::GermanEnglish), Error);
  test::write_text(dir / "noid.tsv", sample_file({{"", "de-en", "text", "x"}}));
  EXPECT_THROW(load_dataset(dir / "noid.tsv", LanguagePair::GermanEnglish), Error);
  test::write_text(dir / "pair.tsv", sample_file({{"s1", "fa-en", "text", "x"}}));
  EXPECT_THROW(load_dataset(dir / "pair.tsv", LanguagePair::GermanEnglish), Error);
}

TEST(Corpus, EmptyFileIsAnEmptyDataset) {
  test::TempDir dir;
  test::write_text(dir / "e.tsv", "");
  EXPECT_TRUE(load_dataset(dir / "e.tsv", LanguagePair::GermanEnglish).samples.empty());
  test::write_text(dir / "h.tsv", "id\tpair\ttranscript\taudio_ref\n");
  EXPECT_TRUE(load_dataset(dir / "h.tsv", LanguagePair::GermanEnglish).samples.empty());
}

TEST(Corpus, MissingFileNamesPath) {
  try {
    load_dataset("/nonexistent/ds.tsv", LanguagePair::GermanEnglish);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/ds.tsv"), std::string::npos);
  }
}

TEST(Corpus, DatasetRoundTripPreservesBytes) {
  test::TempDir dir;
  Dataset ds;
  ds.pair = LanguagePair::EgyptianArabicEnglish;
  ds.samples = {{"a", ds.pair, "\u0627\u0644\u0640 feature\t\u0628\u062A\u0627\u0639\u064A\nline two", "x.mp3"},
                {"b", ds.pair, "back\\slash \r done", "y.mp3"}};
  write_dataset(dir / "d.tsv", ds);
  EXPECT_EQ(load_dataset(dir / "d.tsv", ds.pair), ds);
}

TEST(Corpus, ResultsRoundTrip) {
  test::TempDir dir;
  std::vector<TranscriptionResult> none;
  write_results(dir / "none.tsv", none);
  EXPECT_EQ(read_file(dir / "none.tsv"), "sample_id\tprovider_id\tstatus\tlatency_ms\thypothesis_raw\n");
  EXPECT_TRUE(load_results(dir / "none.tsv").empty());

  std::vector<TranscriptionResult> two{{"s1", "openai", "first\nsecond", TranscriptionStatus::ok, 120},
                                       {"s1", "deepgram", "", TranscriptionStatus::unsupported_pair, 0}};
  write_results(dir / "two.tsv", two);
  EXPECT_EQ(load_results(dir / "two.tsv"), two);
}

TEST(Corpus, ResultsRoundTripProperty) {
  test::TempDir dir;
  std::mt19937 rng(11);
  const std::vector<std::string> pieces{"a", "\n", "\t", "\\", "\u0628\u0643\u0631\u0647", " ", "x", "\r", "\u06F1\u06F2"};
  std::vector<TranscriptionResult> results;
  for (int i = 0; i < 200; ++i) {
    std::string h;
    for (unsigned j = 0; j < rng() % 8; ++j) h += pieces[rng() % pieces.size()];
    const bool ok = rng() % 4 != 0;
    results.push_back({"s" + std::to_string(i), "p" + std::to_string(rng() % 3), ok ? h : "",
                       ok ? TranscriptionStatus::ok : TranscriptionStatus::provider_error, rng() % 5000});
  }
  write_results(dir / "r.tsv", results);
  EXPECT_EQ(load_results(dir / "r.tsv"), results);
}

TEST(Corpus, UnsupportedResultMustHaveEmptyHypothesis) {
  test::TempDir dir;
  test::write_text(dir / "r.tsv", "sample_id\tprovider_id\tstatus\tlatency_ms\thypothesis_raw\n"
                                  "s1\tdeepgram\tunsupported_pair\t0\tsomething\n");
  EXPECT_THROW(load_results(dir / "r.tsv"), Error);
  test::write_text(dir / "s.tsv", "sample_id\tprovider_id\tstatus\tlatency_ms\thypothesis_raw\n"
                                  "s1\tdeepgram\tweird\t0\t\n");
  EXPECT_THROW(load_results(dir / "s.tsv"), Error);
}
