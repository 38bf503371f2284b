#include "theaitre/session.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>

#include "theaitre/context.hpp"
#include "theaitre/decode.hpp"
#include "theaitre/error.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

using nlohmann::json;

std::string_view to_string(SessionStatus s) noexcept {
  return s == SessionStatus::Idle ? "idle" : "generating";
}

namespace {

constexpr std::pair<EventAction, std::string_view> kActionNames[] = {
    {EventAction::Create, "create"},   {EventAction::Generate, "generate"},
    {EventAction::GenerateFailed, "generate_failed"}, {EventAction::Discard, "discard"},
    {EventAction::Insert, "insert"},   {EventAction::Rename, "rename"},
};

}  // namespace

std::string_view to_string(EventAction a) noexcept {
  for (const auto& [act, name] : kActionNames) {
    if (act == a) return name;
  }
  return "unknown";
}

std::optional<EventAction> action_from_string(std::string_view s) noexcept {
  for (const auto& [act, name] : kActionNames) {
    if (name == s) return act;
  }
  return std::nullopt;
}

json to_json(const SessionEvent& e) {
  return {{"seq", e.seq},
          {"timestamp_ms", e.timestamp_ms},
          {"action", to_string(e.action)},
          {"line_id", e.line_id ? json(*e.line_id) : json(nullptr)},
          {"data", e.data}};
}

SessionEvent event_from_json(const json& j) {
  try {
    SessionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    auto action = action_from_string(j.at("action").get<std::string>());
    if (!action) throw Error(ErrorCode::Storage, "unknown event action " + j.at("action").dump());
    e.action = *action;
    if (j.contains("line_id") && !j.at("line_id").is_null()) e.line_id = j.at("line_id").get<LineId>();
    e.data = j.value("data", json::object());
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Storage, std::string("malformed event: ") + ex.what());
  }
}

Script SessionState::full_script() const {
  Script out = prompt;
  out.lines.insert(out.lines.end(), lines.begin(), lines.end());
  return out;
}

double SessionState::generated_fraction() const {
  std::size_t generated = 0;
  std::size_t manual = 0;
  for (const auto& line : lines) {
    const auto n = text::utf8_length(line.text);
    if (line.origin == LineOrigin::Generated) generated += n;
    if (line.origin == LineOrigin::Manual) manual += n;
  }
  const auto total = generated + manual;
  return total == 0 ? 0.0 : static_cast<double>(generated) / static_cast<double>(total);
}

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Clock logical_clock() {
  auto counter = std::make_shared<std::atomic<std::int64_t>>(0);
  return [counter] { return counter->fetch_add(1); };
}

namespace {

json names_to_json(const NameTable& names) {
  json out = json::object();
  for (const auto& [k, v] : names) out[k.str()] = v;
  return out;
}

NameTable names_from_json(const json& j) {
  NameTable out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "names must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    auto name = CharacterName::try_make(k);
    if (!name) throw Error(ErrorCode::InvalidText, "invalid character name '" + k + "'");
    out[*name] = v.get<std::string>();
  }
  return out;
}

std::string checked_target_name(std::string_view target) {
  auto t = text::trim(target);
  if (t.empty() || t.find_first_of(":\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::InvalidText, "target name must be non-empty and free of ':' and line breaks");
  }
  return std::string(t);
}

void check_names(const NameTable& names) {
  for (const auto& [_, v] : names) checked_target_name(v);
}

std::vector<ScriptLine> all_lines(const SessionState& s) {
  std::vector<ScriptLine> out = s.prompt.lines;
  out.insert(out.end(), s.lines.begin(), s.lines.end());
  return out;
}

}  // namespace

Session::Session(SessionState state, SessionServices services, SessionObserver observer)
    : id_(state.id), services_(std::move(services)), observer_(std::move(observer)), state_(std::move(state)) {
  if (!services_.lm) throw Error(ErrorCode::InvalidConfig, "session needs a language model backend");
  if (!services_.mt) services_.mt = std::make_shared<IdentityMt>();
  if (!services_.clock) services_.clock = system_clock_ms();
}

std::shared_ptr<Session> Session::create(std::string id, std::string_view prompt_text, GenerationSettings settings,
                                         std::uint64_t seed, SessionServices services, NameTable names,
                                         SessionObserver observer) {
  if (!services.lm) throw Error(ErrorCode::InvalidConfig, "session needs a language model backend");
  validate(settings, services.lm->context_limit());
  check_names(names);

  SessionState state;
  state.id = std::move(id);
  state.prompt = parse_script(prompt_text);
  if (extract_characters(state.prompt).empty()) {
    throw Error(ErrorCode::NoCharacters, "the prompt needs at least one 'NAME: text' line");
  }
  state.names = std::move(names);
  state.settings = settings;
  state.seed = seed;
  for (const auto& line : state.prompt.lines) state.next_line_id = std::max(state.next_line_id, line.id + 1);

  std::shared_ptr<Session> session(new Session(std::move(state), std::move(services), std::move(observer)));
  std::lock_guard lk(session->mutex_);
  auto& st = session->state_;
  for (auto& t : translate_lines(st.prompt.lines, st.names, *session->services_.mt, st.settings.languages)) {
    st.translations.emplace(t.source.id, std::move(t));
  }
  session->refresh_derived();
  const auto& event = session->log(EventAction::Create, std::nullopt,
                                   {{"prompt", std::string(prompt_text)},
                                    {"seed", seed},
                                    {"settings", to_json(st.settings)},
                                    {"names", names_to_json(st.names)}});
  session->notify(event);
  return session;
}

std::shared_ptr<Session> Session::restore(SessionState state, SessionServices services, SessionObserver observer) {
  state.status = SessionStatus::Idle;
  std::shared_ptr<Session> session(new Session(std::move(state), std::move(services), std::move(observer)));
  std::lock_guard lk(session->mutex_);
  session->refresh_derived();
  return session;
}

std::shared_ptr<Session> Session::replay(const std::string& id, const std::vector<SessionEvent>& events,
                                         SessionServices services) {
  if (events.empty() || events.front().action != EventAction::Create) {
    throw Error(ErrorCode::Storage, "event log of session " + id + " does not start with create");
  }
  const Clock original_clock = services.clock;
  auto cursor = std::make_shared<std::size_t>(0);
  services.clock = [cursor, &events] {
    const std::size_t i = std::min(*cursor, events.size() - 1);
    ++*cursor;
    return events[i].timestamp_ms;
  };

  const auto& head = events.front().data;
  std::shared_ptr<Session> session;
  try {
    session = create(id, head.at("prompt").get<std::string>(), settings_from_json(head.at("settings")),
                     head.at("seed").get<std::uint64_t>(), services, names_from_json(head.value("names", json())));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Storage, std::string("malformed create event: ") + e.what());
  }

  auto diverged = [&](const SessionEvent& e, const std::string& why) {
    return Error(ErrorCode::Storage, "replay of session " + id + " diverged at event " + std::to_string(e.seq) +
                                         " (" + std::string(to_string(e.action)) + "): " + why);
  };

  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto& e = events[i];
    try {
      switch (e.action) {
        case EventAction::Create:
          throw diverged(e, "second create");
        case EventAction::Generate: {
          const auto line = session->generate_next();
          if (!e.line_id || line.id != *e.line_id) throw diverged(e, "line id mismatch");
          break;
        }
        case EventAction::GenerateFailed:
          try {
            session->generate_next();
          } catch (const Error& err) {
            if (err.code() == ErrorCode::DuplicateExhausted) break;
            throw;
          }
          throw diverged(e, "generation succeeded");
        case EventAction::Discard:
          if (!e.line_id) throw diverged(e, "missing line id");
          session->discard_from(*e.line_id);
          break;
        case EventAction::Insert:
          session->insert_manual(e.data.at("speaker").get<std::string>(), e.data.at("text").get<std::string>());
          break;
        case EventAction::Rename:
          session->set_name(CharacterName(e.data.at("speaker").get<std::string>()),
                            e.data.at("target").get<std::string>());
          break;
      }
    } catch (const json::exception& ex) {
      throw diverged(e, ex.what());
    }
  }

  std::lock_guard lk(session->mutex_);
  if (session->state_.events != events) {
    throw Error(ErrorCode::Storage, "replay of session " + id + " produced a different event log");
  }
  session->services_.clock = original_clock ? original_clock : system_clock_ms();
  return session;
}

void Session::require_idle() const {
  if (state_.status != SessionStatus::Idle) {
    throw Error(ErrorCode::Busy, "session " + id_ + " is generating");
  }
}

void Session::refresh_derived() {
  const auto lines = all_lines(state_);
  state_.characters = extract_characters(lines);
  state_.recency = compute_recency(lines, state_.characters);
}

SessionEvent& Session::log(EventAction action, std::optional<LineId> line_id, json data) {
  SessionEvent e;
  e.seq = state_.events.size();
  e.timestamp_ms = services_.clock();
  e.action = action;
  e.line_id = line_id;
  e.data = std::move(data);
  state_.events.push_back(std::move(e));
  return state_.events.back();
}

void Session::notify(const SessionEvent& event) {
  if (observer_) observer_(state_, event);
}

ScriptLine Session::generate_next() {
  std::unique_lock lk(mutex_);
  require_idle();
  state_.status = SessionStatus::Generating;
  stop_ = std::stop_source{};
  const auto stop = stop_.get_token();
  const Script script = state_.full_script();
  const auto characters = state_.characters;
  const auto recency = state_.recency;
  const auto settings = state_.settings;
  const auto names = state_.names;
  const auto seed = state_.seed;
  const auto generation = state_.generation;
  const LineId line_id = state_.next_line_id;
  std::set<std::string> window;
  {
    const auto lines = all_lines(state_);
    const std::size_t w = std::min(settings.retry.duplicate_window, lines.size());
    for (auto it = lines.end() - static_cast<std::ptrdiff_t>(w); it != lines.end(); ++it) {
      window.insert(normalize_line(render_line(*it)));
    }
  }
  lk.unlock();

  auto& lm = *services_.lm;
  std::optional<GeneratedLine> accepted;
  std::size_t retries = 0;
  TranslatedLine translated;
  try {
    const auto context = build_context(script, settings.budget, settings.summarizer, lm);
    const auto trie = CueTrie::build(characters, lm);
    for (std::size_t attempt = 0; attempt <= settings.retry.max_retries; ++attempt) {
      SampleRng rng(seed, generation, attempt);
      auto g = generate_line(context, trie, recency, settings.sampler, lm, rng, stop);
      if (!window.contains(normalize_line(render_line(g.line)))) {
        accepted = std::move(g);
        retries = attempt;
        break;
      }
    }
    if (!accepted) {
      throw Error(ErrorCode::DuplicateExhausted,
                  "every candidate repeated one of the last " + std::to_string(settings.retry.duplicate_window) +
                      " lines after " + std::to_string(settings.retry.max_retries) + " retries",
                  std::chrono::milliseconds(0), static_cast<int>(settings.retry.max_retries + 1));
    }
    accepted->line.id = line_id;
    accepted->line.origin = LineOrigin::Generated;
    translated = translate_line(accepted->line, names, *services_.mt, settings.languages);
  } catch (const Error& e) {
    lk.lock();
    state_.status = SessionStatus::Idle;
    if (e.code() == ErrorCode::DuplicateExhausted) {
      ++state_.generation;
      const auto& event = log(EventAction::GenerateFailed, std::nullopt,
                              {{"generation", generation}, {"retries", settings.retry.max_retries}});
      notify(event);
    }
    throw;
  } catch (...) {
    lk.lock();
    state_.status = SessionStatus::Idle;
    throw;
  }

  lk.lock();
  ++state_.generation;
  state_.next_line_id = line_id + 1;
  state_.lines.push_back(accepted->line);
  state_.translations[line_id] = std::move(translated);
  refresh_derived();
  state_.status = SessionStatus::Idle;
  const auto& event = log(EventAction::Generate, line_id,
                          {{"generation", generation}, {"retries", retries}, {"truncated", accepted->truncated}});
  notify(event);
  return accepted->line;
}

void Session::discard_from(LineId line_id) {
  std::lock_guard lk(mutex_);
  require_idle();
  for (const auto& line : state_.prompt.lines) {
    if (line.id == line_id) throw Error(ErrorCode::PromptLineImmutable, "prompt lines cannot be discarded");
  }
  auto it = std::find_if(state_.lines.begin(), state_.lines.end(),
                         [&](const ScriptLine& l) { return l.id == line_id; });
  if (it == state_.lines.end()) {
    throw Error(ErrorCode::UnknownLine, "no line " + std::to_string(line_id) + " in session " + id_);
  }
  const auto removed = static_cast<std::size_t>(state_.lines.end() - it);
  for (auto r = it; r != state_.lines.end(); ++r) state_.translations.erase(r->id);
  state_.lines.erase(it, state_.lines.end());
  refresh_derived();
  const auto& event = log(EventAction::Discard, line_id, {{"removed", removed}});
  notify(event);
}

ScriptLine Session::insert_manual(std::string_view speaker, std::string_view text) {
  std::lock_guard lk(mutex_);
  require_idle();
  auto name = CharacterName::try_make(text::trim(speaker));
  if (!name) throw Error(ErrorCode::InvalidText, "invalid speaker name '" + std::string(speaker) + "'");
  if (text.find_first_of("\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::InvalidText, "a line cannot contain line breaks");
  }
  const auto body = text::trim(text);
  if (body.empty()) throw Error(ErrorCode::InvalidText, "a manual line needs text");

  auto line = ScriptLine::cue(state_.next_line_id, *name, std::string(body), LineOrigin::Manual);
  state_.translations[line.id] = translate_line(line, state_.names, *services_.mt, state_.settings.languages);
  state_.lines.push_back(line);
  ++state_.next_line_id;
  refresh_derived();
  const auto& event = log(EventAction::Insert, line.id, {{"speaker", name->str()}, {"text", line.text}});
  notify(event);
  return line;
}

void Session::set_name(const CharacterName& speaker, std::string target) {
  std::lock_guard lk(mutex_);
  require_idle();
  target = checked_target_name(target);
  state_.names[speaker] = target;
  for (auto& [_, t] : state_.translations) {
    if (t.source.is_cue() && *t.source.speaker == speaker) t.target_cue = target;
  }
  const auto& event = log(EventAction::Rename, std::nullopt, {{"speaker", speaker.str()}, {"target", target}});
  notify(event);
}

bool Session::cancel() {
  std::lock_guard lk(mutex_);
  if (state_.status != SessionStatus::Generating) return false;
  stop_.request_stop();
  return true;
}

SessionState Session::snapshot() const {
  std::lock_guard lk(mutex_);
  return state_;
}

SessionStatus Session::status() const {
  std::lock_guard lk(mutex_);
  return state_.status;
}

std::string Session::export_plain() const {
  std::lock_guard lk(mutex_);
  return render_script(state_.full_script()) + "\n";
}

json Session::export_structured() const {
  std::lock_guard lk(mutex_);
  return to_json(state_);
}

// --- JSON form ------------------------------------------------------------------

namespace {

json line_to_json(const ScriptLine& l) {
  return {{"id", l.id},
          {"kind", to_string(l.kind)},
          {"speaker", l.speaker ? json(l.speaker->str()) : json(nullptr)},
          {"text", l.text},
          {"origin", to_string(l.origin)}};
}

ScriptLine line_from_json(const json& j) {
  const auto id = j.at("id").get<LineId>();
  auto origin = origin_from_string(j.at("origin").get<std::string>());
  if (!origin) throw Error(ErrorCode::Storage, "unknown line origin " + j.at("origin").dump());
  auto text = j.at("text").get<std::string>();
  if (j.contains("speaker") && !j.at("speaker").is_null()) {
    return ScriptLine::cue(id, CharacterName(j.at("speaker").get<std::string>()), std::move(text), *origin);
  }
  return ScriptLine::direction(id, std::move(text), *origin);
}

}  // namespace

json to_json(const SessionState& s) {
  json lines = json::array();
  for (const auto& l : all_lines(s)) lines.push_back(line_to_json(l));
  json translations = json::array();
  for (const auto& [id, t] : s.translations) {
    translations.push_back({{"line_id", id},
                            {"target_cue", t.target_cue ? json(*t.target_cue) : json(nullptr)},
                            {"target_text", t.target_text},
                            {"rendered", t.rendered()},
                            {"status", t.status == TranslationStatus::Ok ? "ok" : "unavailable"}});
  }
  json events = json::array();
  for (const auto& e : s.events) events.push_back(to_json(e));
  json characters = json::array();
  for (const auto& c : s.characters) characters.push_back(c.str());

  return {{"session_id", s.id},
          {"prompt", render_script(s.prompt) + "\n"},
          {"setting", s.prompt.setting},
          {"lines", lines},
          {"translations", translations},
          {"names", names_to_json(s.names)},
          {"characters", characters},
          {"events", events},
          {"configs", to_json(s.settings)},
          {"seed", s.seed},
          {"generation", s.generation},
          {"next_line_id", s.next_line_id},
          {"status", to_string(s.status)},
          {"generated_fraction", s.generated_fraction()}};
}

SessionState state_from_json(const json& j) {
  try {
    SessionState s;
    s.id = j.at("session_id").get<std::string>();
    s.prompt.setting = j.value("setting", std::string{});
    for (const auto& item : j.at("lines")) {
      auto line = line_from_json(item);
      (line.origin == LineOrigin::Prompt ? s.prompt.lines : s.lines).push_back(std::move(line));
    }
    std::map<LineId, const ScriptLine*> by_id;
    for (const auto& l : s.prompt.lines) by_id[l.id] = &l;
    for (const auto& l : s.lines) by_id[l.id] = &l;
    for (const auto& item : j.at("translations")) {
      const auto id = item.at("line_id").get<LineId>();
      auto src = by_id.find(id);
      if (src == by_id.end()) throw Error(ErrorCode::Storage, "translation for unknown line " + std::to_string(id));
      TranslatedLine t;
      t.source = *src->second;
      t.target_text = item.at("target_text").get<std::string>();
      if (!item.at("target_cue").is_null()) t.target_cue = item.at("target_cue").get<std::string>();
      t.status = item.at("status").get<std::string>() == "ok" ? TranslationStatus::Ok : TranslationStatus::Unavailable;
      s.translations.emplace(id, std::move(t));
    }
    s.names = names_from_json(j.value("names", json()));
    for (const auto& e : j.at("events")) s.events.push_back(event_from_json(e));
    s.settings = settings_from_json(j.at("configs"));
    s.seed = j.at("seed").get<std::uint64_t>();
    s.generation = j.at("generation").get<std::uint64_t>();
    s.next_line_id = j.at("next_line_id").get<LineId>();
    const auto lines = all_lines(s);
    s.characters = extract_characters(lines);
    s.recency = compute_recency(lines, s.characters);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Storage, std::string("malformed session document: ") + e.what());
  }
}

}  // namespace theaitre
