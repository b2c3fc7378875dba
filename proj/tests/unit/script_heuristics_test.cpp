#include <gtest/gtest.h>

#include <random>

#include "csb/corpus.hpp"
#include "csb/error.hpp"
#include "csb/script_heuristics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace csb;

namespace {

std::string random_latin(std::mt19937& rng) {
  static const std::string chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,!?-' ";
  std::string s;
  const std::size_t len = 1 + rng() % 80;
  for (std::size_t i = 0; i < len; ++i) s.push_back(chars[rng() % chars.size()]);
  s.push_back('x');  // never blank
  return s;
}

SignalInputs random_inputs(std::mt19937& rng) {
  SignalInputs in;
  in.n = 1 + rng() % 40;
  in.n_a = rng() % 100;
  in.n_l = rng() % 100;
  const auto sum = in.n_a + in.n_l;
  in.m = sum == 0 ? 0.0 : static_cast<double>(std::min(in.n_a, in.n_l)) / static_cast<double>(sum);
  in.k = rng() % in.n;
  in.b = rng() % 6;
  in.ttr = static_cast<double>(1 + rng() % in.n) / static_cast<double>(in.n);
  return in;
}

}  // namespace

TEST(ScriptHeuristics, ClassifiesCharacters) {
  EXPECT_EQ(classify_char(U'a'), CharClass::Latin);
  EXPECT_EQ(classify_char(U'Z'), CharClass::Latin);
  EXPECT_EQ(classify_char(U'\u0628'), CharClass::Arabic);
  EXPECT_EQ(classify_char(U'\u067E'), CharClass::Arabic);
  EXPECT_EQ(classify_char(U'\u0640'), CharClass::Other);  // tatweel
  EXPECT_EQ(classify_char(U'\u0663'), CharClass::Other);  // Arabic-Indic digit
  EXPECT_EQ(classify_char(U'\u060C'), CharClass::Other);
  EXPECT_EQ(classify_char(U'\u00E9'), CharClass::Other);
  EXPECT_EQ(classify_char(U'7'), CharClass::Other);
}

TEST(ScriptHeuristics, ClassifiesTokens) {
  EXPECT_EQ(classify_token("feature"), TokenClass::Latin);
  EXPECT_EQ(classify_token("\u0628\u064A\u0640confuse"), TokenClass::Latin);
  EXPECT_EQ(classify_token("\u0628\u0643\u0631\u0647"), TokenClass::Arabic);
  EXPECT_EQ(classify_token("ab\u0628\u0643"), TokenClass::Mixed);
  EXPECT_EQ(classify_token("123!"), TokenClass::Other);
  EXPECT_EQ(classify_token("\u0640"), TokenClass::Other);
}

TEST(ScriptHeuristics, SplitsOnUnicodeWhitespaceWithoutNormalizing) {
  const auto t = split_whitespace("  Hello,\tWORLD  \u00A0x\u2003y\n");
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[0], "Hello,");
  EXPECT_EQ(t[1], "WORLD");
  EXPECT_EQ(t[2], "x");
  EXPECT_EQ(t[3], "y");
}

TEST(ScriptHeuristics, SingleScriptSignals) {
  const auto s = extract_signals("hello world");
  EXPECT_EQ(s.n, 2u);
  EXPECT_EQ(s.n_a, 0u);
  EXPECT_EQ(s.n_l, 10u);
  EXPECT_EQ(s.m, 0.0);
  EXPECT_EQ(s.k, 0u);
  EXPECT_EQ(s.b, 0u);
  EXPECT_EQ(s.ttr, 1.0);
  const auto h = compute_hscore(s, false);
  EXPECT_EQ(h.h_mix, 0.0);
  EXPECT_EQ(h.h_alt, 0.0);
}

TEST(ScriptHeuristics, EveryAdjacentPairSwitches) {
  const auto s = extract_signals("\u0643\u0644\u0645\u0629 word \u0643\u0644\u0645\u0629 word");
  EXPECT_EQ(s.k, 3u);
  EXPECT_DOUBLE_EQ(s.ttr, 0.5);
}

TEST(ScriptHeuristics, MixedAndOtherTokensNeverCountAsSwitches) {
  EXPECT_EQ(extract_signals("\u0643\u0644\u0645\u0629 ab\u0628\u0643 word").k, 0u);
  EXPECT_EQ(extract_signals("\u0643\u0644\u0645\u0629 123 word").k, 0u);
}

TEST(ScriptHeuristics, SyntheticSignalProfiles) {
  const auto ds = load_dataset(test::fixture("signal_profiles.tsv"), LanguagePair::EgyptianArabicEnglish);
  const auto a = extract_signals(ds.samples[0].transcript);
  EXPECT_EQ(a.n, 14u);
  EXPECT_EQ(a.n_a, 42u);
  EXPECT_EQ(a.n_l, 31u);
  EXPECT_DOUBLE_EQ(a.m, 31.0 / 73.0);
  EXPECT_EQ(a.k, 6u);
  EXPECT_EQ(a.b, 2u);
  EXPECT_EQ(a.ttr, 1.0);
  EXPECT_NEAR(compute_hscore(a, false).composite, 8.37, 1e-9);

  const auto b = extract_signals(ds.samples[1].transcript);
  EXPECT_EQ(b.n, 7u);
  EXPECT_EQ(b.n_a, 19u);
  EXPECT_EQ(b.n_l, 6u);
  EXPECT_EQ(b.k, 2u);
  EXPECT_EQ(b.b, 1u);
  EXPECT_NEAR(compute_hscore(b, false).composite, 5.54, 1e-9);
}

TEST(ScriptHeuristics, PublishedSignalInputsReproduceComposites) {
  const SignalInputs a{14, 42, 31, 31.0 / 73.0, 6, 2, 1.0};
  const auto ha = compute_hscore(a, false);
  EXPECT_NEAR(ha.h_mix, 10.0, 0.05);
  EXPECT_NEAR(ha.h_alt, 8.6, 0.05);
  EXPECT_NEAR(ha.h_morph, 6.7, 0.05);
  EXPECT_NEAR(ha.h_len, 4.5, 0.05);
  EXPECT_NEAR(ha.h_vocab, 10.0, 0.05);
  EXPECT_NEAR(ha.composite, 8.37, 0.01);

  const SignalInputs b{7, 19, 6, 6.0 / 25.0, 2, 1, 1.0};
  const auto hb = compute_hscore(b, false);
  EXPECT_NEAR(hb.h_mix, 6.9, 0.05);
  EXPECT_NEAR(hb.h_alt, 5.7, 0.05);
  EXPECT_NEAR(hb.h_morph, 3.3, 0.05);
  EXPECT_NEAR(hb.h_len, 1.0, 0.05);
  EXPECT_NEAR(hb.h_vocab, 10.0, 0.05);
  EXPECT_NEAR(hb.composite, 5.54, 0.01);
}

TEST(ScriptHeuristics, ExactSignalsDifferOnlyByRounding) {
  const SignalInputs a{14, 42, 31, 31.0 / 73.0, 6, 2, 1.0};
  HScoreOptions exact;
  exact.round_signals = false;
  const auto h = compute_hscore(a, false, exact);
  EXPECT_NEAR(h.h_alt, 60.0 / 7.0, 1e-12);
  EXPECT_NEAR(h.h_morph, 20.0 / 3.0, 1e-12);
  EXPECT_NEAR(h.composite, 8.3547619, 1e-6);
}

TEST(ScriptHeuristics, ShortTranscriptHasNoLengthSignal) {
  SignalInputs in{4, 10, 10, 0.5, 3, 3, 1.0};
  EXPECT_EQ(compute_hscore(in, false).h_len, 0.0);
  in.n = 5;
  EXPECT_EQ(compute_hscore(in, false).h_len, 0.0);
  in.n = 6;
  EXPECT_EQ(compute_hscore(in, false).h_len, 0.5);
}

TEST(ScriptHeuristics, CompositeIsTheWeightedSum) {
  std::mt19937 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto in = random_inputs(rng);
    for (bool round : {false, true}) {
      HScoreOptions o;
      o.round_signals = round;
      const auto h = compute_hscore(in, false, o);
      EXPECT_NEAR(h.composite, 0.30 * h.h_mix + 0.30 * h.h_alt + 0.20 * h.h_morph + 0.10 * h.h_len + 0.10 * h.h_vocab,
                  1e-9);
      const auto ref = oracle::hscore(static_cast<double>(in.n), in.m, static_cast<double>(in.k),
                                      static_cast<double>(in.b), in.ttr, false, round);
      EXPECT_NEAR(h.composite, ref.composite, 1e-9);
      for (double v : {h.h_mix, h.h_alt, h.h_morph, h.h_len, h.h_vocab, h.composite}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 10.0);
      }
    }
  }
}

TEST(ScriptHeuristics, SaturationThresholdsAreExact) {
  EXPECT_EQ(compute_hscore({10, 35, 65, 0.35, 0, 0, 0.1}, false).h_mix, 10.0);
  EXPECT_EQ(compute_hscore({10, 1, 1, 0.5, 0, 3, 0.1}, false).h_morph, 10.0);
  EXPECT_EQ(compute_hscore({10, 1, 1, 0.5, 0, 9, 0.1}, false).h_morph, 10.0);
  EXPECT_EQ(compute_hscore({25, 1, 1, 0.5, 0, 0, 0.1}, false).h_len, 10.0);
  EXPECT_EQ(compute_hscore({90, 1, 1, 0.5, 0, 0, 0.1}, false).h_len, 10.0);
  EXPECT_EQ(compute_hscore({10, 1, 1, 0.5, 0, 0, 0.7}, false).h_vocab, 10.0);
  EXPECT_EQ(compute_hscore({10, 1, 1, 0.5, 5, 0, 0.7}, false).h_alt, 10.0);
}

TEST(ScriptHeuristics, MixSignalIsSymmetricInScripts) {
  std::mt19937 rng(9);
  for (int i = 0; i < 500; ++i) {
    auto in = random_inputs(rng);
    auto swapped = in;
    std::swap(swapped.n_a, swapped.n_l);
    EXPECT_EQ(compute_hscore(in, false).h_mix, compute_hscore(swapped, false).h_mix);
  }
}

TEST(ScriptHeuristics, CompositeMonotoneInEachInput) {
  std::mt19937 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto in = random_inputs(rng);
    const double base = compute_hscore(in, false).composite;
    auto more_b = in;
    ++more_b.b;
    EXPECT_GE(compute_hscore(more_b, false).composite, base);
    if (in.k + 1 <= in.n - 1) {
      auto more_k = in;
      ++more_k.k;
      EXPECT_GE(compute_hscore(more_k, false).composite, base);
    }
    auto more_m = in;
    more_m.m = std::min(0.5, in.m + 0.05);
    EXPECT_GE(compute_hscore(more_m, false).composite, base);
    auto more_t = in;
    more_t.ttr = std::min(1.0, in.ttr + 0.05);
    EXPECT_GE(compute_hscore(more_t, false).composite, base);
  }
}

TEST(ScriptHeuristics, AppendingSameClassTokenKeepsSwitchCount) {
  std::mt19937 rng(17);
  const std::vector<std::string> arabic{"\u0643\u0644\u0645\u0629", "\u0628\u0643\u0631\u0647", "\u0634\u063A\u0644", "\u0644\u064A\u0647"};
  const std::vector<std::string> latin{"word", "call", "meeting", "file"};
  for (int i = 0; i < 300; ++i) {
    std::string t;
    bool last_arabic = false;
    for (unsigned j = 0; j < 1 + rng() % 10; ++j) {
      last_arabic = rng() % 2 == 0;
      t += (last_arabic ? arabic : latin)[rng() % 4] + " ";
    }
    const auto k = extract_signals(t).k;
    const std::string appended = t + (last_arabic ? arabic : latin)[rng() % 4];
    EXPECT_EQ(extract_signals(appended).k, k);
  }
}

TEST(ScriptHeuristics, LatinTranscriptsAreDegenerate) {
  std::mt19937 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const auto s = extract_signals(random_latin(rng));
    for (bool flag : {true, false}) {
      const auto h = compute_hscore(s, flag);
      EXPECT_EQ(h.h_mix, 0.0);
      EXPECT_EQ(h.h_alt, 0.0);
      EXPECT_LE(h.composite, 4.0);
    }
  }
}

TEST(ScriptHeuristics, DegenerateFlagZeroesMixing) {
  const auto h = compute_hscore({14, 42, 31, 31.0 / 73.0, 6, 2, 1.0}, true);
  EXPECT_EQ(h.h_mix, 0.0);
  EXPECT_EQ(h.h_alt, 0.0);
  EXPECT_LE(h.composite, 4.0);
  EXPECT_TRUE(h.degenerate_latin_pair);
}

TEST(ScriptHeuristics, GermanDatasetStaysWithinDegenerateBound) {
  Dataset ds;
  ds.pair = LanguagePair::GermanEnglish;
  ds.samples = {{"d1", ds.pair, "Wir haben das Meeting gecancelt und das Update downloaden", "a"},
                {"d2", ds.pair, "Kurz gesagt", "b"},
                {"d3", ds.pair, "Das Testen vom Deployment dauert ewig lange heute leider wieder", "c"}};
  const auto scored = score_dataset(ds);
  ASSERT_EQ(scored.size(), 3u);
  for (const auto& s : scored) {
    EXPECT_TRUE(s.score.degenerate_latin_pair);
    EXPECT_LE(s.score.composite, 4.0);
  }
  EXPECT_EQ(scored[0].score.inputs.b, 1u);  // downloaden
  EXPECT_EQ(scored[2].score.inputs.b, 1u);  // Testen
}

TEST(ScriptHeuristics, EmptyDatasetScoresNothing) {
  Dataset ds;
  EXPECT_TRUE(score_dataset(ds).empty());
}

TEST(ScriptHeuristics, MorphRuleFamilies) {
  const auto r = MorphRules::defaults();
  EXPECT_EQ(count_morph_hits("\u0627\u0644\u0640feature", r), 1u);
  EXPECT_EQ(count_morph_hits("\u0627\u0644\u0640\u0640\u0640feature", r), 1u);
  EXPECT_EQ(count_morph_hits("\u0627\u0644feature", r), 1u);
  EXPECT_EQ(count_morph_hits("\u0627\u0644\u0643\u062A\u0627\u0628", r), 0u);
  EXPECT_EQ(count_morph_hits("meeting\u0627\u062A", r), 1u);
  EXPECT_EQ(count_morph_hits("designer-\u064A\u0646", r), 1u);
  EXPECT_EQ(count_morph_hits("meeting\u0627\u062A\u0643", r), 0u);  // suffix runs into another letter
  EXPECT_EQ(count_morph_hits("\u0627\u0644\u0640meeting\u0627\u062A", r), 2u);
  EXPECT_EQ(count_morph_hits("Downloaden", r), 1u);
  EXPECT_EQ(count_morph_hits("Update-ung", r), 1u);
  EXPECT_EQ(count_morph_hits("updates", r), 0u);
  EXPECT_EQ(count_morph_hits("gecheckt", r), 0u);
  EXPECT_EQ(count_morph_hits("Garten", r), 0u);
}

TEST(ScriptHeuristics, RuleFileMatchesDefaults) {
  const auto file = MorphRules::load(test::config_dir() / "morph_rules.txt");
  const auto def = MorphRules::defaults();
  EXPECT_EQ(file.article_prefixes, def.article_prefixes);
  EXPECT_EQ(file.arabic_suffixes, def.arabic_suffixes);
  EXPECT_EQ(file.german_suffixes, def.german_suffixes);
  EXPECT_EQ(file.english_stems, def.english_stems);
}

TEST(ScriptHeuristics, RuleParsing) {
  const auto r = MorphRules::parse("# comment\n\narticle-prefix \u0627\u0644\nenglish-stem Chat\ngerman-suffix EN\n");
  ASSERT_EQ(r.english_stems.size(), 1u);
  EXPECT_EQ(r.english_stems[0], "chat");
  EXPECT_EQ(r.german_suffixes[0], "en");
  EXPECT_TRUE(r.arabic_suffixes.empty());
  EXPECT_EQ(count_morph_hits("Chatten", r), 0u);
  EXPECT_EQ(count_morph_hits("Chaten", r), 1u);
  try {
    MorphRules::parse("english-stem ok\nprefix x\n", "rules.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.file(), "rules.txt");
  }
  EXPECT_THROW(MorphRules::parse("english-stem two words\n"), ParseError);
  EXPECT_THROW(MorphRules::parse("english-stem\n"), ParseError);
}

TEST(ScriptHeuristics, RangeValidationNamesTheField) {
  auto field_of = [](const SignalInputs& in) -> std::string {
    try {
      compute_hscore(in, false);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return "";
  };
  EXPECT_EQ(field_of({10, 0, 0, 0.6, 0, 0, 1.0}), "m");
  EXPECT_EQ(field_of({10, 0, 0, 0.2, 10, 0, 1.0}), "k");
  EXPECT_EQ(field_of({10, 0, 0, 0.2, 0, 0, 1.5}), "ttr");
  EXPECT_EQ(field_of({10, 0, 0, 0.2, 9, 0, 1.0}), "");
  EXPECT_THROW(extract_signals(" \t "), Error);
}

TEST(ScriptHeuristics, ArabicFixtureMatchesGolden) {
  const auto ds = load_dataset(test::fixture("arabic10.tsv"), LanguagePair::SaudiArabicEnglish);
  ASSERT_EQ(ds.samples.size(), 10u);
  std::vector<HScoreRow> rows;
  for (const auto& s : score_dataset(ds)) rows.push_back(s.row());
  const auto text = format_scores(rows);
  EXPECT_EQ(test::golden_mismatch(text, test::golden("arabic10_scores.tsv")), "");

  test::TempDir dir;
  write_scores(dir / "s.tsv", rows);
  EXPECT_EQ(load_scores(dir / "s.tsv"), rows);
}
