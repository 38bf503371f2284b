#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "theaitre/lm_backend.hpp"
#include "theaitre/script.hpp"
#include "theaitre/settings.hpp"
#include "theaitre/translate.hpp"

namespace theaitre {

enum class SessionStatus { Idle, Generating };

std::string_view to_string(SessionStatus s) noexcept;

enum class EventAction { Create, Generate, GenerateFailed, Discard, Insert, Rename };

std::string_view to_string(EventAction a) noexcept;
std::optional<EventAction> action_from_string(std::string_view s) noexcept;

/// One entry of the append-only session log. `data` carries whatever replay
/// needs for the action:
///   create          {prompt, seed, settings, names}
///   generate        {generation, retries, truncated}
///   generate_failed {generation, retries}
///   discard         {removed}
///   insert          {speaker, text}
///   rename          {speaker, target}
struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  EventAction action = EventAction::Create;
  std::optional<LineId> line_id;
  nlohmann::json data = nlohmann::json::object();

  bool operator==(const SessionEvent&) const = default;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

struct SessionState {
  std::string id;
  Script prompt;
  std::vector<ScriptLine> lines;
  std::map<LineId, TranslatedLine> translations;
  NameTable names;
  std::vector<CharacterName> characters;
  SpeakerRecency recency;
  GenerationSettings settings;
  std::uint64_t seed = 0;
  std::uint64_t generation = 0;
  LineId next_line_id = 0;
  SessionStatus status = SessionStatus::Idle;
  std::vector<SessionEvent> events;

  /// Prompt followed by the session lines.
  Script full_script() const;
  /// Generated code points / (generated + manual), line text only; 0 if none.
  double generated_fraction() const;

  bool operator==(const SessionState&) const = default;
};

using Clock = std::function<std::int64_t()>;
Clock system_clock_ms();
/// 0, 1, 2, ... per call; for reproducible batch output.
Clock logical_clock();

struct SessionServices {
  std::shared_ptr<LmBackend> lm;
  std::shared_ptr<MtClient> mt;
  Clock clock;
};

/// Called under the session lock after every mutation.
using SessionObserver = std::function<void(const SessionState&, const SessionEvent&)>;

class Session {
 public:
  /// Throws NoCharacters for prompts without cue lines, InvalidConfig for bad
  /// settings, EmptyScript for blank prompts.
  static std::shared_ptr<Session> create(std::string id, std::string_view prompt_text, GenerationSettings settings,
                                         std::uint64_t seed, SessionServices services, NameTable names = {},
                                         SessionObserver observer = {});

  /// Adopts a stored state as is.
  static std::shared_ptr<Session> restore(SessionState state, SessionServices services,
                                          SessionObserver observer = {});

  /// Re-executes the log against `services`. Timestamps are taken from the
  /// log. Throws Storage if the backends produce a different history.
  static std::shared_ptr<Session> replay(const std::string& id, const std::vector<SessionEvent>& events,
                                         SessionServices services);

  const std::string& id() const noexcept { return id_; }

  ScriptLine generate_next();
  void discard_from(LineId line_id);
  ScriptLine insert_manual(std::string_view speaker, std::string_view text);
  /// Edits the name table and re-renders every cue translation.
  void set_name(const CharacterName& speaker, std::string target);
  /// Requests the in-flight generation to stop; false when idle.
  bool cancel();

  SessionState snapshot() const;
  SessionStatus status() const;

  std::string export_plain() const;
  nlohmann::json export_structured() const;

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

 private:
  Session(SessionState state, SessionServices services, SessionObserver observer);

  void require_idle() const;
  void refresh_derived();
  SessionEvent& log(EventAction action, std::optional<LineId> line_id, nlohmann::json data);
  void notify(const SessionEvent& event);

  std::string id_;
  SessionServices services_;
  SessionObserver observer_;
  mutable std::mutex mutex_;
  SessionState state_;
  std::stop_source stop_;
};

nlohmann::json to_json(const SessionState& state);
/// Inverse of to_json; derived fields are recomputed.
SessionState state_from_json(const nlohmann::json& j);

}  // namespace theaitre
