#include <gtest/gtest.h>

#include "csb/error.hpp"
#include "csb/manifest.hpp"
#include "test_support.hpp"

using namespace csb;

TEST(Manifest, RunIdDependsOnHashAndSeed) {
  const auto a = make_run_id("abc", 7);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, make_run_id("abc", 7));
  EXPECT_NE(a, make_run_id("abc", 8));
  EXPECT_NE(a, make_run_id("abd", 7));
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.run_id = "r";
  m.config_hash = "h";
  m.seeds = {{"global", 7}, {"presample:ar-sa-en", 18446744073709551615ull}};
  m.stages = {{"evaluate", "complete"}, {"score-ensemble", "partial"}};
  m.judges = {{"a", "openai:gpt-4o"}};
  m.providers = {{"deepgram", "nova-3"}};
  m.embedding_model = "xlm-roberta-large";
  m.embedding_layer = "17";
  m.tool_version = "1.0.0";
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);

  test::TempDir dir;
  save_manifest(dir / "sub" / "manifest.json", m);
  EXPECT_EQ(load_manifest(dir / "sub" / "manifest.json").value(), m);
}

TEST(Manifest, MissingAndMalformedFiles) {
  test::TempDir dir;
  EXPECT_FALSE(load_manifest(dir / "none.json").has_value());
  test::write_text(dir / "bad.json", "{\"run_id\": 3}");
  try {
    load_manifest(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  test::write_text(dir / "trunc.json", "{\"run_id\": \"x\"");
  EXPECT_THROW(load_manifest(dir / "trunc.json"), Error);
}
