#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <random>

#include "fixtures.hpp"
#include "theaitre/batch.hpp"
#include "theaitre/error.hpp"
#include "theaitre/session.hpp"
#include "theaitre/store.hpp"

using namespace theaitre;

namespace {

constexpr const char* kPrompt = "A small kitchen.\nROBOT: Good morning.\nMAN: Is it?\n";

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Protocol;
}

/// Delegating backend whose next_logits blocks until released.
class GateLm : public LmBackend {
 public:
  explicit GateLm(std::shared_ptr<LmBackend> inner) : inner_(std::move(inner)) {}
  TokenSeq encode(std::string_view t) override { return inner_->encode(t); }
  std::string decode(std::span<const TokenId> t) override { return inner_->decode(t); }
  std::size_t vocab_size() const override { return inner_->vocab_size(); }
  std::size_t context_limit() const override { return inner_->context_limit(); }
  TokenId newline_token() const override { return inner_->newline_token(); }
  BackendHealth health() override { return inner_->health(); }
  LogitVector next_logits(std::span<const TokenId> c, std::span<const TokenId> want = {}) override {
    {
      std::unique_lock lk(m_);
      entered_ = true;
      cv_.notify_all();
      cv_.wait(lk, [&] { return open_; });
    }
    return inner_->next_logits(c, want);
  }
  void wait_entered() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return entered_; });
  }
  void open() {
    std::lock_guard lk(m_);
    open_ = true;
    cv_.notify_all();
  }

 private:
  std::shared_ptr<LmBackend> inner_;
  std::mutex m_;
  std::condition_variable cv_;
  bool entered_ = false;
  bool open_ = false;
};

class DownLm : public GateLm {
 public:
  using GateLm::GateLm;
  LogitVector next_logits(std::span<const TokenId>, std::span<const TokenId>) override {
    throw Error(ErrorCode::BackendUnavailable, "down", std::chrono::milliseconds(1000), 3);
  }
};

std::filesystem::path temp_root(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("theaitre_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::shared_ptr<Session> make(const char* prompt = kPrompt, GenerationSettings s = {},
                              SessionServices services = fixtures::mock_services()) {
  return Session::create("s1", prompt, s, 7, std::move(services));
}

}  // namespace

TEST(Session, CreateRecordsPromptAndCast) {
  auto s = make();
  const auto st = s->snapshot();
  EXPECT_EQ(st.prompt.setting, "A small kitchen.");
  ASSERT_EQ(st.characters.size(), 2u);
  EXPECT_EQ(st.next_line_id, 2u);
  ASSERT_EQ(st.events.size(), 1u);
  EXPECT_EQ(st.events[0].action, EventAction::Create);
  EXPECT_EQ(st.status, SessionStatus::Idle);
  EXPECT_EQ(s->export_plain(), "A small kitchen.\nROBOT: Good morning.\nMAN: Is it?\n");
}

TEST(Session, CreateErrors) {
  EXPECT_EQ(code_of([] { make("Just a setting."); }), ErrorCode::NoCharacters);
  EXPECT_EQ(code_of([] { make("   "); }), ErrorCode::EmptyScript);
  GenerationSettings bad;
  bad.sampler.temperature = -1;
  EXPECT_EQ(code_of([&] { make(kPrompt, bad); }), ErrorCode::InvalidConfig);
}

TEST(Session, GenerateAppendsTranslatedLine) {
  auto s = make();
  const auto line = s->generate_next();
  EXPECT_EQ(line.id, 2u);
  EXPECT_EQ(line.origin, LineOrigin::Generated);
  ASSERT_TRUE(line.speaker);
  const auto st = s->snapshot();
  EXPECT_TRUE(std::find(st.characters.begin(), st.characters.end(), *line.speaker) != st.characters.end());
  ASSERT_EQ(st.translations.count(2), 1u);
  EXPECT_EQ(st.translations.at(2).target_cue, line.speaker->str());
  EXPECT_EQ(st.generation, 1u);
  EXPECT_EQ(st.events.back().action, EventAction::Generate);
  EXPECT_EQ(st.events.back().line_id, 2u);
  EXPECT_DOUBLE_EQ(st.generated_fraction(), 1.0);
}

TEST(Session, LineIdsAreMaxPlusOneAfterDiscard) {
  auto s = make();
  s->generate_next();
  s->generate_next();
  s->discard_from(3);
  EXPECT_EQ(s->snapshot().lines.size(), 1u);
  EXPECT_EQ(s->generate_next().id, 4u);
}

TEST(Session, DiscardErrors) {
  auto s = make();
  s->generate_next();
  EXPECT_EQ(code_of([&] { s->discard_from(0); }), ErrorCode::PromptLineImmutable);
  EXPECT_EQ(code_of([&] { s->discard_from(99); }), ErrorCode::UnknownLine);
  s->discard_from(2);
  EXPECT_TRUE(s->snapshot().lines.empty());
  EXPECT_EQ(s->snapshot().translations.size(), 2u);
  EXPECT_EQ(s->snapshot().translations.count(2), 0u);
}

TEST(Session, ManualLinesAndNewCharacters) {
  auto s = make();
  const auto line = s->insert_manual("GHOST", "Boo.");
  EXPECT_EQ(line.origin, LineOrigin::Manual);
  const auto st = s->snapshot();
  EXPECT_EQ(st.characters.size(), 3u);
  EXPECT_DOUBLE_EQ(st.generated_fraction(), 0.0);
  EXPECT_EQ(code_of([&] { s->insert_manual("A:B", "x"); }), ErrorCode::InvalidText);
  EXPECT_EQ(code_of([&] { s->insert_manual("A", "two\nlines"); }), ErrorCode::InvalidText);
  EXPECT_EQ(code_of([&] { s->insert_manual("A", "  "); }), ErrorCode::InvalidText);
}

TEST(Session, GeneratedFractionCountsCodePoints) {
  SessionState st;
  st.lines.push_back(ScriptLine::cue(0, CharacterName("A"), "123456789", LineOrigin::Generated));
  st.lines.push_back(ScriptLine::cue(1, CharacterName("B"), "ž", LineOrigin::Manual));
  EXPECT_DOUBLE_EQ(st.generated_fraction(), 0.9);
}

TEST(Session, RenameRerendersTranslations) {
  auto s = make(kPrompt, {}, fixtures::mock_services(nullptr, std::make_shared<ReverseMt>()));
  const auto line = s->generate_next();
  s->set_name(*line.speaker, "ROBOTKA");
  const auto st = s->snapshot();
  EXPECT_EQ(st.translations.at(line.id).target_cue, "ROBOTKA");
  EXPECT_EQ(st.events.back().action, EventAction::Rename);
  EXPECT_EQ(code_of([&] { s->set_name(*line.speaker, "BAD:NAME"); }), ErrorCode::InvalidText);
}

TEST(Session, BackendErrorLeavesStateUnchanged) {
  auto down = std::make_shared<DownLm>(fixtures::hash_lm());
  auto s = make(kPrompt, {}, fixtures::mock_services(down));
  const auto before = s->snapshot();
  try {
    s->generate_next();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
    EXPECT_EQ(e.retry_after(), std::chrono::milliseconds(1000));
  }
  EXPECT_EQ(s->snapshot(), before);
}

TEST(Session, BusyWhileGeneratingAndCancel) {
  auto gate = std::make_shared<GateLm>(fixtures::hash_lm());
  auto s = make(kPrompt, {}, fixtures::mock_services(gate));
  EXPECT_FALSE(s->cancel());
  auto fut = std::async(std::launch::async, [&] { return s->generate_next(); });
  gate->wait_entered();
  EXPECT_EQ(s->status(), SessionStatus::Generating);
  EXPECT_EQ(code_of([&] { s->generate_next(); }), ErrorCode::Busy);
  EXPECT_EQ(code_of([&] { s->insert_manual("A", "x"); }), ErrorCode::Busy);
  EXPECT_TRUE(s->cancel());
  gate->open();
  try {
    fut.get();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Cancelled);
  }
  EXPECT_EQ(s->status(), SessionStatus::Idle);
  EXPECT_TRUE(s->snapshot().lines.empty());
  EXPECT_NO_THROW(s->generate_next());
}

TEST(Session, DuplicateExhaustedIsLogged) {
  auto vocab = fixtures::fresh_vocab();
  auto lm = std::make_shared<ScriptedLm>(vocab, std::vector<ScriptedRule>{{"", "ROBOT: Good morning.\n"}});
  auto s = make(kPrompt, {}, fixtures::mock_services(lm));
  try {
    s->generate_next();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateExhausted);
    EXPECT_EQ(e.attempts(), 6);
  }
  const auto st = s->snapshot();
  EXPECT_TRUE(st.lines.empty());
  EXPECT_EQ(st.generation, 1u);
  EXPECT_EQ(st.events.back().action, EventAction::GenerateFailed);
  EXPECT_EQ(st.events.back().data.at("retries"), 5);
}

TEST(Session, JsonRoundTrip) {
  auto s = make(kPrompt, {}, fixtures::mock_services(nullptr, std::make_shared<ReverseMt>()));
  s->generate_next();
  s->insert_manual("GHOST", "Boo.");
  s->set_name(CharacterName("MAN"), "MUŽ");
  const auto st = s->snapshot();
  const auto j = to_json(st);
  EXPECT_EQ(j.at("session_id"), "s1");
  EXPECT_EQ(j.at("lines").size(), 4u);
  EXPECT_EQ(state_from_json(j), st);
  EXPECT_EQ(state_from_json(nlohmann::json::parse(j.dump())), st);
  EXPECT_EQ(s->export_structured(), j);
}

TEST(Session, ReplayReconstructsState) {
  auto s = make();
  s->generate_next();
  s->generate_next();
  s->insert_manual("GHOST", "Boo.");
  s->generate_next();
  s->discard_from(3);
  s->set_name(CharacterName("ROBOT"), "ROBOTKA");
  s->generate_next();
  const auto st = s->snapshot();
  auto r = Session::replay("s1", st.events, fixtures::mock_services());
  EXPECT_EQ(r->snapshot(), st);
}

TEST(Session, ReplayDetectsDivergence) {
  auto s = make();
  s->generate_next();
  auto events = s->snapshot().events;
  events[1].line_id = 17;
  EXPECT_EQ(code_of([&] { Session::replay("s1", events, fixtures::mock_services()); }), ErrorCode::Storage);
  EXPECT_EQ(code_of([&] { Session::replay("s1", {}, fixtures::mock_services()); }), ErrorCode::Storage);
}

TEST(Store, PersistsAndReloads) {
  const auto root = temp_root("store");
  GenerationSettings defaults;
  auto m = std::make_shared<SessionManager>(fixtures::mock_services(), defaults, 11, root);
  auto s = m->create({kPrompt, nlohmann::json{{"sampler.top_k", 20}}, std::nullopt, {}});
  EXPECT_TRUE(s->id().starts_with("s-"));
  s->generate_next();
  s->insert_manual("GHOST", "Boo.");
  const auto st = s->snapshot();
  EXPECT_EQ(st.settings.sampler.top_k, 20u);
  EXPECT_EQ(st.seed, 11u);

  SessionStore store(root);
  EXPECT_EQ(store.list(), std::vector<std::string>{s->id()});
  EXPECT_EQ(store.load_events(s->id()), st.events);
  EXPECT_EQ(store.load_snapshot(s->id()), st);

  SessionManager fresh(fixtures::mock_services(), defaults, std::nullopt, root);
  EXPECT_EQ(fresh.load_stored(), 1u);
  EXPECT_EQ(fresh.get(s->id())->snapshot(), st);

  // a stale snapshot falls back to replay
  std::filesystem::remove(root / s->id() / "snapshot.json");
  SessionManager replayed(fixtures::mock_services(), defaults, std::nullopt, root);
  EXPECT_EQ(replayed.load_stored(), 1u);
  EXPECT_EQ(replayed.get(s->id())->snapshot(), st);
  EXPECT_EQ(code_of([&] { replayed.get("nope"); }), ErrorCode::UnknownSession);
  std::filesystem::remove_all(root);
}

TEST(Store, RejectsBadConfigAndIds) {
  SessionManager m(fixtures::mock_services(), {}, 1);
  EXPECT_EQ(code_of([&] { m.create({kPrompt, nlohmann::json{{"sampler.top_k", "x"}}, std::nullopt, {}}); }),
            ErrorCode::InvalidConfig);
  EXPECT_TRUE(m.ids().empty());
  SessionStore store(temp_root("ids"));
  EXPECT_EQ(code_of([&] { store.load_events("../etc"); }), ErrorCode::Storage);
}

TEST(Batch, DeterministicAndWritesBothFiles) {
  const auto a = batch_generate(kPrompt, 6, {}, 3, fixtures::mock_services());
  const auto b = batch_generate(kPrompt, 6, {}, 3, fixtures::mock_services());
  EXPECT_EQ(a.plain, b.plain);
  EXPECT_EQ(a.structured.dump(), b.structured.dump());
  EXPECT_EQ(a.session_id, batch_session_id(kPrompt, 6, 3));
  const auto c = batch_generate(kPrompt, 6, {}, 4, fixtures::mock_services());
  EXPECT_NE(a.plain, c.plain);
  EXPECT_TRUE(a.plain.starts_with(kPrompt));

  const auto dir = temp_root("batch");
  std::filesystem::create_directories(dir);
  const auto [txt, js] = write_exports(a, dir / "out.txt");
  EXPECT_EQ(txt.filename(), "out.txt");
  EXPECT_EQ(js.filename(), "out.json");
  std::ifstream f(txt, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f), {}), a.plain);
  std::filesystem::remove_all(dir);
}
