#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace csb;

TEST(EndToEnd, FixturePipelineMatchesGoldens) {
  test::TempDir work;
  const auto run = test::run_fixture_pipeline(work.path());
  for (const auto& f : run.failures) ADD_FAILURE() << f;
  ASSERT_TRUE(run.failures.empty());
  EXPECT_LT(run.seconds, 10.0);
  for (const auto& [name, path] : run.artifacts) {
    ASSERT_TRUE(std::filesystem::exists(path)) << name;
    EXPECT_EQ(test::golden_mismatch(test::read_text(path), test::golden("e2e/" + name)), "") << name;
  }
}

TEST(EndToEnd, RerunIsByteIdentical) {
  test::TempDir a;
  test::TempDir b;
  const auto first = test::run_fixture_pipeline(a.path());
  const auto second = test::run_fixture_pipeline(b.path());
  ASSERT_TRUE(first.failures.empty());
  ASSERT_TRUE(second.failures.empty());
  ASSERT_EQ(first.artifacts.size(), second.artifacts.size());
  for (std::size_t i = 0; i < first.artifacts.size(); ++i) {
    auto text_a = test::read_text(first.artifacts[i].second);
    auto text_b = test::read_text(second.artifacts[i].second);
    // Output paths are echoed nowhere in the artifacts, so no rewriting is needed.
    EXPECT_EQ(text_a, text_b) << first.artifacts[i].first;
  }
}
