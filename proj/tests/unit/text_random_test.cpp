#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <vector>

#include "mixprompt/random.hpp"
#include "mixprompt/text_util.hpp"

namespace mp = mixprompt;

TEST(TextUtil, TrimAndCase) {
  EXPECT_EQ(mp::trim("  a b \t\n"), "a b");
  EXPECT_EQ(mp::trim(""), "");
  EXPECT_EQ(mp::to_lower_ascii("MiXeD 123"), "mixed 123");
  EXPECT_EQ(mp::capitalize_first("movie review"), "Movie review");
  EXPECT_EQ(mp::capitalize_first(""), "");
  EXPECT_TRUE(mp::iequals_ascii("Positive", "pOSITIVE"));
  EXPECT_FALSE(mp::iequals_ascii("Positive", "Positiv"));
  EXPECT_TRUE(mp::starts_with_icase("Sentiment: x", "sentiment"));
}

TEST(TextUtil, SplitJoinCollapse) {
  EXPECT_EQ(mp::split_whitespace("  a  b\tc\n"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(mp::split_whitespace("   ").empty());
  EXPECT_EQ(mp::join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(mp::collapse_whitespace("a \n\n b"), "a b");
  EXPECT_EQ(mp::collapse_whitespace("  a  "), " a ");
}

TEST(Random, SeedMixingIsOrderSensitiveAndStable) {
  EXPECT_EQ(mp::mix_seed({1, 2}), mp::mix_seed({1, 2}));
  EXPECT_NE(mp::mix_seed({1, 2}), mp::mix_seed({2, 1}));
  EXPECT_NE(mp::mix_seed({1}), mp::mix_seed({1, 0}));
  // Frozen values guard against accidental changes to the seeding scheme,
  // which would silently change every golden output.
  EXPECT_EQ(mp::splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(mp::stable_hash("abc"), mp::stable_hash("abc"));
  EXPECT_NE(mp::stable_hash("abc"), mp::stable_hash("abd"));
  EXPECT_NE(mp::stable_hash("abc", 1), mp::stable_hash("abc", 2));
}

TEST(Random, UniformIndexStaysInRangeAndCoversIt) {
  mp::Rng rng = mp::make_rng({42});
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    auto v = mp::uniform_index(rng, 7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Random, Uniform01InUnitInterval) {
  mp::Rng rng = mp::make_rng({7});
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double u = mp::uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.01);
}

TEST(Random, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(20), b(20);
  for (int i = 0; i < 20; ++i) a[i] = b[i] = i;
  mp::Rng r1 = mp::make_rng({3, 4});
  mp::Rng r2 = mp::make_rng({3, 4});
  mp::shuffle(std::span<int>(a), r1);
  mp::shuffle(std::span<int>(b), r2);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sorted[i], i);
}
