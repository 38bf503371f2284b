#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "theaitre/context.hpp"
#include "theaitre/error.hpp"
#include "theaitre/summarize.hpp"

using namespace theaitre;

namespace {

ScriptLine cue(LineId id, const char* who, const char* text) { return ScriptLine::cue(id, CharacterName(who), text); }

oracles::Matrix random_graph(std::mt19937_64& rng, std::size_t n) {
  oracles::Matrix w(n, std::vector<double>(n, 0.0));
  const double density = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::uniform_real_distribution<double>(0, 1)(rng) < density) {
        w[i][j] = w[j][i] = std::uniform_real_distribution<double>(0.01, 3.0)(rng);
      }
    }
  }
  return w;
}

LineGraph to_graph(const oracles::Matrix& w) {
  LineGraph g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (i != j) g.set_weight(i, j, w[i][j]);
    }
  }
  return g;
}

}  // namespace

// --- similarity -------------------------------------------------------------------

TEST(Similarity, IdenticalFourWordLines) {
  const auto a = cue(0, "A", "robots dream electric sheep");
  EXPECT_NEAR(line_similarity(a, a), 4.0 / (2.0 * std::log(4.0)), 1e-12);
  EXPECT_NEAR(line_similarity(a, a), 1.4426950408889634, 1e-12);
}

TEST(Similarity, DisjointIsZero) {
  EXPECT_EQ(line_similarity(cue(0, "A", "robots dream"), cue(1, "B", "kettle boils")), 0.0);
}

TEST(Similarity, OneWordSafeguard) {
  const auto y = cue(0, "A", "yes");
  EXPECT_DOUBLE_EQ(line_similarity(y, y), 0.5);
}

TEST(Similarity, StopWordsCaseAndNamesIgnored) {
  const auto a = cue(0, "ROBOT", "The Robot dreams!");
  const auto b = cue(1, "MAN", "robot, DREAMS of the man");
  // "robot" and "man" are cue names, "the"/"of" stop words: {dreams} vs {dreams}
  EXPECT_DOUBLE_EQ(line_similarity(a, b), 0.5);
}

TEST(Similarity, MaxPhrasesCapsDistinctWords) {
  WordFilter f;
  const auto words = content_words(cue(0, "A", "alpha beta gamma delta alpha"), f, 2);
  EXPECT_EQ(words, (std::vector<std::string>{"alpha", "beta"}));
}

TEST(StopWords, BuiltinListLoaded) {
  const auto& sw = StopWords::builtin();
  EXPECT_GE(sw.size(), 100u);
  EXPECT_TRUE(sw.contains("the"));
  EXPECT_FALSE(sw.contains("robot"));
  const auto parsed = StopWords::parse("# comment\nfoo\n  Bar \n\n");
  EXPECT_TRUE(parsed.contains("foo"));
  EXPECT_TRUE(parsed.contains("bar"));
  EXPECT_EQ(parsed.size(), 2u);
}

// --- pagerank ---------------------------------------------------------------------

TEST(PageRank, SingleNodeIsOneMinusD) {
  LineGraph g(1);
  const auto r = pagerank(g, {});
  ASSERT_EQ(r.scores.size(), 1u);
  EXPECT_NEAR(r.scores[0], 0.15, 1e-12);
}

TEST(PageRank, SymmetricPairEqual) {
  LineGraph g(2);
  g.set_weight(0, 1, 2.0);
  g.set_weight(1, 0, 2.0);
  const auto r = pagerank(g, {});
  EXPECT_NEAR(r.scores[0], r.scores[1], 1e-12);
  EXPECT_NEAR(r.scores[0], 1.0, 1e-6);
}

TEST(PageRank, RejectsSelfLoopsAndNegativeWeights) {
  LineGraph g(2);
  EXPECT_THROW(g.set_weight(0, 0, 1.0), Error);
  EXPECT_THROW(g.set_weight(0, 1, -1.0), Error);
}

TEST(PageRank, MatchesDenseOracles) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const auto w = random_graph(rng, n);
    const auto r = pagerank(to_graph(w), {});
    const auto power = oracles::pagerank_power(w, 0.85);
    const auto solved = oracles::pagerank_solve(w, 0.85);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(r.scores[i], power[i], 1e-6);
      EXPECT_NEAR(power[i], solved[i], 1e-9);
      EXPECT_GT(r.scores[i], 0.0);
    }
  }
}

TEST(PageRank, ConnectedSymmetricSumsToNodeCount) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    oracles::Matrix w(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) w[i][j] = w[j][i] = std::uniform_real_distribution<double>(0.1, 2)(rng);
    }
    const auto r = pagerank(to_graph(w), {});
    EXPECT_NEAR(std::accumulate(r.scores.begin(), r.scores.end(), 0.0), static_cast<double>(n), 1e-3);
  }
}

// --- textrank -----------------------------------------------------------------------

TEST(TextRank, ShortInputReturnedWhole) {
  const std::vector<ScriptLine> lines = {cue(0, "A", "x"), cue(1, "B", "y"), cue(2, "A", "z")};
  EXPECT_EQ(textrank_select(lines, 5, {}), lines);
}

TEST(TextRank, DominantLineWins) {
  const std::vector<ScriptLine> lines = {
      cue(0, "A", "kettle"),
      cue(1, "B", "robots dream electric sheep tonight"),
      cue(2, "A", "robots dream"),
      cue(3, "B", "electric sheep"),
      cue(4, "A", "dream tonight"),
  };
  const auto picked = textrank_select(lines, 1, {});
  ASSERT_EQ(picked.size(), 1u);
  EXPECT_EQ(picked[0].id, 1u);
}

TEST(TextRank, OutputIsOrderedSubset) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const auto cast = fixtures::random_cast(rng, 3);
    const auto s = parse_script(fixtures::random_script_text(rng, 200, cast, 12));
    const auto idx = textrank_indices(s.lines, 5, {});
    EXPECT_EQ(idx.size(), std::min<std::size_t>(5, s.lines.size()));
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
  }
}

// --- context budget -------------------------------------------------------------------

TEST(Context, DefaultsAreTheBudgetConstants) {
  ContextBudget b;
  EXPECT_EQ(b.max_tokens, 924u);
  EXPECT_EQ(b.recent_tokens, 250u);
  EXPECT_EQ(b.summary_lines, 5u);
  EXPECT_EQ(b.max_tokens + SamplerConfig{}.max_new_tokens, 1024u);
  EXPECT_NO_THROW(validate(b, 100, 1024));
  EXPECT_THROW(validate(b, 101, 1024), Error);
}

TEST(Context, TokenLength) {
  auto lm = fixtures::hash_lm();
  EXPECT_EQ(token_length(parse_script("A: x y"), *lm), 4u);
  EXPECT_EQ(token_length(Script{}, *lm), 0u);
  auto s = parse_script("A: x y");
  const auto before = token_length(s, *lm);
  s.lines.push_back(ScriptLine::cue(1, CharacterName("B"), ""));
  EXPECT_GT(token_length(s, *lm), before);
}

TEST(Context, SplitRecentAllWhenShort) {
  auto lm = fixtures::hash_lm();
  const auto s = parse_script("A: x y\nB: z");
  const auto split = split_recent(s, 250, *lm);
  EXPECT_TRUE(split.older.empty());
  EXPECT_EQ(split.recent.size(), 2u);
}

TEST(Context, SplitRecentHandCounted) {
  auto lm = fixtures::hash_lm();
  // older line: 1 + 50 + 1 = 52 tokens; recent lines: 1 + 118 + 1 = 120 each -> 240
  std::mt19937_64 rng(1);
  const std::string text = "A: " + fixtures::random_utterance(rng, 50) + "\nB: " +
                           fixtures::random_utterance(rng, 118) + "\nA: " + fixtures::random_utterance(rng, 118);
  const auto s = parse_script(text);
  ASSERT_EQ(token_length(s, *lm), 292u);
  const auto split = split_recent(s, 250, *lm);
  ASSERT_EQ(split.recent.size(), 2u);
  EXPECT_EQ(split.recent[0].id, 1u);
  EXPECT_EQ(split.older.size(), 1u);
}

TEST(Context, SplitRecentSingleOverlongLine) {
  auto lm = fixtures::hash_lm();
  std::mt19937_64 rng(2);
  const auto s = parse_script("A: " + fixtures::random_utterance(rng, 298));
  const auto split = split_recent(s, 250, *lm);
  EXPECT_TRUE(split.older.empty());
  ASSERT_EQ(split.recent.size(), 1u);
}

TEST(Context, SplitRecentOverlongFinalLineKeepsOnlyIt) {
  auto lm = fixtures::hash_lm();
  std::mt19937_64 rng(3);
  const auto s = parse_script("A: hello\nB: " + fixtures::random_utterance(rng, 300));
  const auto split = split_recent(s, 250, *lm);
  EXPECT_EQ(split.older.size(), 1u);
  ASSERT_EQ(split.recent.size(), 1u);
  EXPECT_EQ(split.recent[0].id, 1u);
}

TEST(Context, UnderBudgetPassesThrough) {
  auto lm = fixtures::hash_lm();
  std::mt19937_64 rng(4);
  const auto cast = fixtures::random_cast(rng, 3);
  const auto text = fixtures::random_script_text(rng, 500, cast);
  const auto s = parse_script(text);
  const auto plan = plan_context(s, {}, {}, *lm);
  EXPECT_FALSE(plan.summarized);
  EXPECT_EQ(plan.tokens, lm->encode(text));
}

TEST(Context, MatchesStepByStepOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto lm = fixtures::hash_lm();
    const auto cast = fixtures::random_cast(rng, 2 + trial % 4);
    const auto text = fixtures::random_script_text(rng, 1000 + (trial * 53) % 2000, cast);
    const auto s = parse_script(text);
    const auto plan = plan_context(s, {}, {}, *lm);
    const auto oracle = oracles::build_context(text, 924, 250, 5, {}, *lm);
    EXPECT_EQ(plan.tokens, oracle.tokens) << trial;
    EXPECT_LE(plan.tokens.size(), 924u);
    EXPECT_EQ(plan.recent.size(), oracle.recent.size());
    EXPECT_EQ(plan.summary.size(), oracle.summary.size());
  }
}

TEST(Context, PinnedSettingStaysInFront) {
  std::mt19937_64 rng(6);
  auto lm = fixtures::hash_lm();
  const auto cast = fixtures::random_cast(rng, 3);
  const std::string setting = "A bare stage with one chair.\n";
  const auto text = setting + fixtures::random_script_text(rng, 2000, cast).substr(0);
  auto s = parse_script(text);
  ContextBudget b;
  b.pin_setting = true;
  const auto tokens = build_context(s, b, {}, *lm);
  const auto head = lm->encode(context_text(flatten_lines(Script{s.setting, {}})));
  ASSERT_LE(tokens.size(), 924u);
  EXPECT_TRUE(std::equal(head.begin(), head.end(), tokens.begin()));
}

TEST(Context, InvalidBudgets) {
  auto lm = fixtures::hash_lm();
  ContextBudget b;
  b.recent_tokens = 924;
  EXPECT_THROW(plan_context(parse_script("A: x"), b, {}, *lm), Error);
  b.recent_tokens = 0;
  EXPECT_THROW(plan_context(parse_script("A: x"), b, {}, *lm), Error);
}
