#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "theaitre/decode.hpp"
#include "theaitre/error.hpp"
#include "theaitre/text.hpp"

using namespace theaitre;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Protocol;
}

std::vector<CharacterName> names(std::initializer_list<const char*> list) {
  std::vector<CharacterName> out;
  for (auto n : list) out.emplace_back(n);
  return out;
}

}  // namespace

// --- vocabulary and mock models ---------------------------------------------------

TEST(WhitespaceVocab, EncodeDecodeRoundTrip) {
  WhitespaceVocab v;
  const auto t = v.encode("A: x y\nB: z\n");
  EXPECT_EQ(t.size(), 7u);
  EXPECT_EQ(t[3], WhitespaceVocab::kNewline);
  EXPECT_EQ(v.decode(t), "A: x y\nB: z\n");
  EXPECT_EQ(v.encode("A: x y"), TokenSeq(t.begin(), t.begin() + 3));
}

TEST(HashLm, PureAndBounded) {
  auto lm = fixtures::hash_lm();
  const auto ctx = lm->encode("ROBOT: hello there\n");
  const auto a = lm->next_logits(ctx);
  const auto b = lm->next_logits(ctx);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), lm->vocab_size());
  for (std::size_t i = 1; i < lm->base_vocab(); ++i) {
    EXPECT_GE(a[i], 0.0);
    EXPECT_LT(a[i], 1.0);
  }
  EXPECT_GE(a[0], 0.5);  // newline bias
}

TEST(HashLm, WordsAddedLaterStayOutOfSupportUnlessWanted) {
  auto lm = fixtures::hash_lm();
  const auto ctx = lm->encode("ZORGON: qwerty\n");
  const auto logits = lm->next_logits(ctx);
  EXPECT_EQ(logits[static_cast<std::size_t>(ctx[0])], kNegInf);
  const TokenId want[] = {ctx[0]};
  const auto pinned = lm->next_logits(ctx, want);
  EXPECT_TRUE(std::isfinite(pinned[static_cast<std::size_t>(ctx[0])]));
  // growing the vocabulary does not change the finite part
  lm->encode("brand new words appear");
  const auto later = lm->next_logits(ctx);
  EXPECT_TRUE(std::equal(logits.begin(), logits.end(), later.begin()));
}

TEST(HashLm, RejectsOverlongContext) {
  HashLmConfig cfg;
  cfg.context_limit = 4;
  auto lm = fixtures::hash_lm(cfg);
  EXPECT_EQ(code_of([&] { lm->next_logits(TokenSeq{1, 2, 3, 4, 5}); }), ErrorCode::ContextOverflow);
  EXPECT_EQ(code_of([&] { lm->next_logits(TokenSeq{}); }), ErrorCode::InvalidContext);
}

TEST(ScriptedLm, ForcesLongestMatchingRule) {
  auto vocab = fixtures::fresh_vocab();
  ScriptedLm lm(vocab, {{"", "A: hi there\n"}, {"B: ping\n", "C: pong\n"}});
  auto ctx = lm.encode("B: ping\n");
  auto forced = lm.forced_token(ctx);
  EXPECT_EQ(forced, vocab->find("C:"));
  ctx.push_back(forced);
  EXPECT_EQ(lm.forced_token(ctx), vocab->find("pong"));
  const auto logits = lm.next_logits(ctx);
  EXPECT_EQ(logits[static_cast<std::size_t>(vocab->find("pong"))], ScriptedLm::kForced);
  EXPECT_EQ(logits[1], ScriptedLm::kSuppressed);
  EXPECT_EQ(lm.forced_token(lm.encode("X: y\n")), vocab->find("A:"));
}

TEST(ScriptedLm, LoadsRulesFromJson) {
  const auto path = std::filesystem::temp_directory_path() / "scripted_rules_test.json";
  {
    std::ofstream out(path);
    out << R"([{"after": "A: x\n", "emit": "B: y\n"}, {"emit": "A: x\n"}])";
  }
  const auto rules = ScriptedLm::load_rules(path.string());
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].emit, "B: y\n");
  EXPECT_EQ(rules[1].after, "");
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([] { ScriptedLm::load_rules("/nonexistent/rules.json"); }), ErrorCode::InvalidConfig);
}

// --- logit transforms ------------------------------------------------------------

TEST(RepetitionPenalty, Arithmetic) {
  LogitVector l = {2.0, -2.0, 3.0, 0.0};
  const TokenId ctx[] = {0, 1, 0, 3};
  apply_repetition_penalty(l, ctx, 1.01);
  EXPECT_NEAR(l[0], 1.9801980198019802, 1e-12);
  EXPECT_NEAR(l[1], -2.02, 1e-12);
  EXPECT_EQ(l[2], 3.0);
  EXPECT_EQ(l[3], 0.0);
}

TEST(RepetitionPenalty, OneIsExactNoOp) {
  std::mt19937_64 rng(9);
  LogitVector l(500);
  for (auto& v : l) v = std::uniform_real_distribution<double>(-5, 5)(rng);
  const auto before = l;
  TokenSeq ctx;
  for (int i = 0; i < 200; ++i) ctx.push_back(static_cast<TokenId>(rng() % 500));
  apply_repetition_penalty(l, ctx, 1.0);
  EXPECT_EQ(l, before);
}

TEST(RepetitionPenalty, MonotoneAndArgmaxOutsideContextKept) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    LogitVector l(64);
    for (auto& v : l) v = std::uniform_real_distribution<double>(-3, 3)(rng);
    TokenSeq ctx;
    for (int i = 0; i < 10; ++i) ctx.push_back(static_cast<TokenId>(rng() % 64));
    auto p = l;
    apply_repetition_penalty(p, ctx, 1.3);
    std::size_t best_out = 64, best_out_p = 64;
    for (std::size_t i = 0; i < 64; ++i) {
      const bool in_ctx = std::find(ctx.begin(), ctx.end(), static_cast<TokenId>(i)) != ctx.end();
      if (in_ctx && l[i] > 0) EXPECT_LT(p[i], l[i]);
      if (!in_ctx) {
        if (best_out == 64 || l[i] > l[best_out]) best_out = i;
        if (best_out_p == 64 || p[i] > p[best_out_p]) best_out_p = i;
      }
    }
    EXPECT_EQ(best_out, best_out_p);
  }
}

TEST(CueTrie, BuildsSharedPrefixes) {
  auto lm = fixtures::hash_lm();
  const auto cast = names({"OLD MAN", "OLD WOMAN", "BOY"});
  const auto trie = CueTrie::build(cast, *lm);
  EXPECT_EQ(trie.children(CueTrie::kRoot).size(), 2u);
  EXPECT_EQ(trie.max_depth(), 2u);
  const auto old_node = trie.child(CueTrie::kRoot, lm->vocab()->find("OLD"));
  ASSERT_TRUE(old_node);
  EXPECT_EQ(trie.children(*old_node).size(), 2u);
  EXPECT_EQ(trie.terminal(*old_node), nullptr);
  const auto boy = trie.child(CueTrie::kRoot, lm->vocab()->find("BOY:"));
  ASSERT_TRUE(boy);
  EXPECT_EQ(trie.terminal(*boy)->str(), "BOY");
}

TEST(ConstrainLineStart, OnlyChildrenStayFinite) {
  auto lm = fixtures::hash_lm();
  const auto cast = names({"A", "B"});
  const auto trie = CueTrie::build(cast, *lm);
  LogitVector l(lm->vocab_size(), 0.25);
  constrain_line_start(l, trie, CueTrie::kRoot);
  const auto kids = trie.children(CueTrie::kRoot);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const bool allowed = std::find(kids.begin(), kids.end(), static_cast<TokenId>(i)) != kids.end();
    EXPECT_EQ(std::isfinite(l[i]), allowed) << i;
  }
  LogitVector starved(lm->vocab_size(), kNegInf);
  EXPECT_EQ(code_of([&] { constrain_line_start(starved, trie, CueTrie::kRoot); }), ErrorCode::ConstraintStarved);
}

TEST(SpeakerBoost, AddsRecencyTimesCoefficient) {
  auto lm = fixtures::hash_lm();
  const auto cast = names({"A", "B"});
  const auto trie = CueTrie::build(cast, *lm);
  SpeakerRecency rec;
  rec.lines_since[cast[0]] = 3;
  rec.lines_since[cast[1]] = 0;
  LogitVector l(lm->vocab_size(), 1.0);
  auto zero = l;
  apply_speaker_boost(zero, trie, rec, 0.0);
  EXPECT_EQ(zero, l);
  apply_speaker_boost(l, trie, rec, 0.1);
  EXPECT_NEAR(l[static_cast<std::size_t>(trie.path(0)[0])], 1.3, 1e-12);
  EXPECT_EQ(l[static_cast<std::size_t>(trie.path(1)[0])], 1.0);
}

TEST(Recency, CountsLinesSinceLastCue) {
  const auto s = parse_script("A: one\nB: two\n(pause)\nA: three");
  const auto cast = names({"A", "B", "C"});
  const auto r = compute_recency(s.lines, cast);
  EXPECT_EQ(r.get(cast[0]), 0u);
  EXPECT_EQ(r.get(cast[1]), 2u);
  EXPECT_EQ(r.get(cast[2]), 5u);
}

// --- sampling -------------------------------------------------------------------

TEST(SampleToken, GreedyPicksArgmax) {
  SamplerConfig cfg;
  cfg.greedy = true;
  SampleRng rng(1);
  EXPECT_EQ(sample_token({0.1, 3.0, 2.0}, cfg, rng), 1);
}

TEST(SampleToken, TopKRestrictsSupport) {
  SamplerConfig cfg;
  cfg.top_k = 2;
  cfg.temperature = 5.0;
  std::set<TokenId> seen;
  for (std::uint64_t s = 0; s < 400; ++s) {
    SampleRng rng(s);
    seen.insert(sample_token({0.0, 1.0, 0.5, 0.9, kNegInf}, cfg, rng));
  }
  EXPECT_EQ(seen, (std::set<TokenId>{1, 3}));
}

TEST(SampleToken, FrequenciesFollowSoftmax) {
  SamplerConfig cfg;
  cfg.top_k = 0;
  cfg.temperature = 1.0;
  const LogitVector l = {0.0, std::log(3.0)};
  int ones = 0;
  SampleRng rng(77);
  for (int i = 0; i < 20000; ++i) ones += sample_token(l, cfg, rng) == 1;
  EXPECT_NEAR(ones / 20000.0, 0.75, 0.015);
}

TEST(SampleRng, StreamsDependOnAllThreeInputs) {
  SampleRng a(1, 2, 3), b(1, 2, 3), c(1, 2, 4), d(1, 3, 3);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_NE(x, d.uniform());
}

// --- generation loop --------------------------------------------------------------

TEST(GenerateLine, SpeakerAlwaysAllowedAndReproducible) {
  std::mt19937_64 r(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto lm = fixtures::hash_lm();
    const auto cast = fixtures::random_cast(r, 2 + trial % 5);
    const auto ctx = lm->encode(fixtures::random_script_text(r, 60, cast));
    const auto rec = compute_recency({}, cast);
    SampleRng rng1(trial), rng2(trial);
    const auto a = generate_line(ctx, cast, rec, {}, *lm, rng1);
    const auto b = generate_line(ctx, cast, rec, {}, *lm, rng2);
    EXPECT_EQ(a.line, b.line);
    EXPECT_NE(std::find(cast.begin(), cast.end(), *a.line.speaker), cast.end());
    EXPECT_EQ(a.line.origin, LineOrigin::Generated);
  }
}

TEST(GenerateLine, CutOffAtMaxNewTokens) {
  HashLmConfig hc;
  hc.newline_bias = -100.0;
  auto lm = fixtures::hash_lm(hc);
  const auto cast = names({"A"});
  SamplerConfig cfg;
  cfg.max_new_tokens = 7;
  SampleRng rng(3);
  const auto g = generate_line(lm->encode("A: hi\n"), cast, compute_recency({}, cast), cfg, *lm, rng);
  EXPECT_TRUE(g.truncated);
  EXPECT_EQ(g.tokens.size(), 7u);
  EXPECT_EQ(text::split_words(g.line.text).size(), 6u);
}

TEST(GenerateLine, StopsAtNewline) {
  auto vocab = fixtures::fresh_vocab();
  ScriptedLm lm(vocab, {{"", "B: short reply\n"}});
  const auto cast = names({"A", "B"});
  SampleRng rng(3);
  const auto g = generate_line(lm.encode("A: hi\n"), cast, compute_recency({}, cast), {}, lm, rng);
  EXPECT_FALSE(g.truncated);
  EXPECT_EQ(render_line(g.line), "B: short reply");
}

TEST(GenerateLine, OverflowAndConfigErrors) {
  HashLmConfig hc;
  hc.context_limit = 50;
  auto lm = fixtures::hash_lm(hc);
  const auto cast = names({"A"});
  SampleRng rng(1);
  SamplerConfig cfg;
  cfg.max_new_tokens = 48;
  const auto ctx = lm->encode("A: one two three\n");
  EXPECT_EQ(code_of([&] { generate_line(ctx, cast, {}, cfg, *lm, rng); }), ErrorCode::ContextOverflow);
  cfg.temperature = 0;
  EXPECT_EQ(code_of([&] { generate_line(ctx, cast, {}, cfg, *lm, rng); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { generate_line(ctx, std::vector<CharacterName>{}, {}, SamplerConfig{}, *lm, rng); }),
            ErrorCode::NoCharacters);
}

TEST(GenerateLine, Cancellation) {
  auto lm = fixtures::hash_lm();
  const auto cast = names({"A"});
  const auto trie = CueTrie::build(cast, *lm);
  std::stop_source src;
  src.request_stop();
  SampleRng rng(1);
  EXPECT_EQ(code_of([&] { generate_line(lm->encode("A: x\n"), trie, {}, {}, *lm, rng, src.get_token()); }),
            ErrorCode::Cancelled);
}
