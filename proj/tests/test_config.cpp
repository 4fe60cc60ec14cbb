#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "jsafe/config.hpp"

namespace jsafe {
namespace {

TEST(KeyValueConfig, ParsesCommentsBlankLinesAndWhitespace) {
  const auto c = KeyValueConfig::parse("# header\n\n  alpha = 1.5  \nbeta=two words # trailing\n\tgamma =\n");
  EXPECT_EQ(c.values().size(), 3u);
  EXPECT_EQ(c.get_double("alpha", 0.0), 1.5);
  EXPECT_EQ(c.get_string("beta", ""), "two words");
  EXPECT_EQ(c.get_string("gamma", "x"), "");
}

TEST(KeyValueConfig, LaterAssignmentsWin) {
  const auto c = KeyValueConfig::parse("n = 1\nn = 2\n");
  EXPECT_EQ(c.get_int("n", 0), 2);
}

TEST(KeyValueConfig, FallbacksForMissingKeys) {
  const KeyValueConfig c;
  EXPECT_FALSE(c.has("x"));
  EXPECT_EQ(c.get_int("x", 7), 7);
  EXPECT_EQ(c.get_double("x", 0.25), 0.25);
  EXPECT_EQ(c.get_string("x", "d"), "d");
}

TEST(KeyValueConfig, MalformedLinesNameTheLine) {
  try {
    KeyValueConfig::parse("a = 1\njust words\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(KeyValueConfig::parse(" = 3"), ConfigError);
}

TEST(KeyValueConfig, TypedGettersRejectGarbage) {
  const auto c = KeyValueConfig::parse("i = 12x\nd = 1.0.0\nf = 2.5\n");
  EXPECT_THROW(c.get_int("i", 0), ConfigError);
  EXPECT_THROW(c.get_double("d", 0), ConfigError);
  EXPECT_THROW(c.get_int("f", 0), ConfigError);
}

TEST(KeyValueConfig, LoadsFilesAndReportsMissingOnes) {
  const auto path = std::filesystem::temp_directory_path() / "jsafe_config_test.cfg";
  {
    std::ofstream f(path);
    f << "episodes = 40\n";
  }
  EXPECT_EQ(KeyValueConfig::load(path.string()).get_int("episodes", 0), 40);
  std::filesystem::remove(path);
  EXPECT_THROW(KeyValueConfig::load(path.string()), ConfigError);
}

TEST(KeyValueConfig, SetOverrides) {
  auto c = KeyValueConfig::parse("seed = 1");
  c.set("seed", "9");
  EXPECT_EQ(c.get_int("seed", 0), 9);
}

}  // namespace
}  // namespace jsafe
