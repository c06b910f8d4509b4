#include "vqakit/textkit.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace vqakit {
namespace {

TEST(NormalizeAnswer, AllRulesOn) {
  EXPECT_EQ(normalize_answer(" Yes. "), "yes");
  EXPECT_EQ(normalize_answer(""), "");
  EXPECT_EQ(normalize_answer("The red Bottle"), "red bottle");
}

TEST(NormalizeAnswer, AllRulesOffIsIdentity) {
  const auto none = NormalizationRules::none();
  for (std::string s : {"", " Yes. ", "The  red\tBottle!?", "ÄÖÜ the A"}) {
    EXPECT_EQ(normalize_answer(s, none), s);
  }
}

TEST(NormalizeAnswer, IndividualRules) {
  auto only = [](auto setter) {
    auto r = NormalizationRules::none();
    setter(r);
    return r;
  };
  const auto lower = only([](auto& r) { r.lowercase = true; });
  const auto trim = only([](auto& r) { r.trim_whitespace = true; });
  const auto punct = only([](auto& r) { r.strip_terminal_punctuation = true; });
  const auto collapse =
      only([](auto& r) { r.collapse_internal_whitespace = true; });
  const auto articles = only([](auto& r) { r.drop_articles = true; });

  EXPECT_EQ(normalize_answer("MiXeD Ünïcode", lower), "mixed Ünïcode");
  EXPECT_EQ(normalize_answer(" \t a b \n", trim), "a b");
  EXPECT_EQ(normalize_answer("what?!.,", punct), "what");
  EXPECT_EQ(normalize_answer("e.g. this", punct), "e.g. this");
  EXPECT_EQ(normalize_answer("a  b\t\tc", collapse), "a b c");
  EXPECT_EQ(normalize_answer("the cat and a hat", articles), "cat and hat");
  EXPECT_EQ(normalize_answer("An apple", articles), "apple");
  EXPECT_EQ(normalize_answer("theme another", articles), "theme another");
  EXPECT_EQ(normalize_answer("the", articles), "");
}

TEST(NormalizeAnswer, ArticleRemovalCanExposePunctuation) {
  // "yes. the" -> "yes." -> "yes": rules run again until stable.
  EXPECT_EQ(normalize_answer("yes. the"), "yes");
  EXPECT_EQ(normalize_answer("Yes ."), "yes");
}

TEST(NormalizeAnswer, IdempotentUnderEveryRuleSubset) {
  std::mt19937_64 rng(1234);
  const std::string alphabet = "aAnNtThHeE .,!?\t\nxy";
  for (unsigned mask = 0; mask < 32; ++mask) {
    NormalizationRules r{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0,
                         (mask & 8) != 0, (mask & 16) != 0};
    for (int trial = 0; trial < 2000; ++trial) {
      std::string s;
      const std::size_t len = rng() % 16;
      for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
      const std::string once = normalize_answer(s, r);
      ASSERT_EQ(normalize_answer(once, r), once)
          << "rules mask " << mask << " input '" << s << "'";
    }
  }
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", ""), 3u);
  EXPECT_EQ(testing_oracles::naive_levenshtein(U"kitten", U"sitting"), 3u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
}

TEST(Levenshtein, CountsScalarValuesNotBytes) {
  // "é" is two bytes in UTF-8, "😀" four.
  EXPECT_EQ(levenshtein("café", "cafe"), 1u);
  EXPECT_EQ(levenshtein("😀", "x"), 1u);
  EXPECT_EQ(levenshtein("日本語", "日本"), 1u);
}

TEST(Levenshtein, MalformedUtf8IsDeterministic) {
  const std::string bad = "a\xff" "b";
  EXPECT_EQ(decode_utf8(bad).size(), 3u);
  EXPECT_EQ(levenshtein(bad, "ab"), 1u);
  EXPECT_EQ(levenshtein(bad, bad), 0u);
}

TEST(Levenshtein, MatchesRecursiveOracleExhaustively) {
  const auto words = testing_oracles::all_words(U"abc", 6);
  ASSERT_EQ(words.size(), 1093u);
  // The recursive oracle is exponential; a sparse stride keeps this unit
  // test fast while the acceptance suite covers every pair.
  for (std::size_t i = 0; i < words.size(); i += 7) {
    for (std::size_t j = 0; j < words.size(); j += 11) {
      ASSERT_EQ(edit_distance(words[i], words[j]),
                testing_oracles::naive_levenshtein(words[i], words[j]));
    }
  }
}

TEST(Levenshtein, MetricAxiomsOnRandomTriples) {
  std::mt19937_64 rng(99);
  const auto word = [&] {
    std::string s;
    const std::size_t len = rng() % 13;
    for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng() % 4);
    return s;
  };
  for (int i = 0; i < 3000; ++i) {
    const auto a = word(), b = word(), c = word();
    const auto ab = levenshtein(a, b);
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(levenshtein(a, c), ab + levenshtein(b, c));
    EXPECT_LE(ab, std::max(a.size(), b.size()));
    EXPECT_GE(ab, a.size() > b.size() ? a.size() - b.size() : b.size() - a.size());
  }
}

}  // namespace
}  // namespace vqakit
