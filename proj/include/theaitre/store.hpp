#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "theaitre/session.hpp"

namespace theaitre {

/// One directory per session under the root:
///   <root>/<id>/events.jsonl   append-only log, one event per line
///   <root>/<id>/snapshot.json  latest state, replaced atomically
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void record(const SessionState& state, const SessionEvent& event);

  std::vector<std::string> list() const;
  std::optional<SessionState> load_snapshot(const std::string& id) const;
  std::vector<SessionEvent> load_events(const std::string& id) const;

 private:
  std::filesystem::path dir(const std::string& id) const;

  std::filesystem::path root_;
  std::mutex mutex_;
};

struct CreateRequest {
  std::string prompt;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  NameTable names;
};

/// Owns the live sessions of a server process.
class SessionManager {
 public:
  SessionManager(SessionServices services, GenerationSettings defaults, std::optional<std::uint64_t> default_seed,
                 std::optional<std::filesystem::path> storage = std::nullopt);

  std::shared_ptr<Session> create(const CreateRequest& request);
  /// Throws UnknownSession.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// Loads every stored session: snapshot when it matches the log, replay
  /// otherwise. Returns the number loaded; unreadable sessions are skipped.
  std::size_t load_stored();

  const GenerationSettings& defaults() const noexcept { return defaults_; }
  const SessionServices& services() const noexcept { return services_; }

 private:
  std::string fresh_id();
  SessionObserver observer();

  SessionServices services_;
  GenerationSettings defaults_;
  std::optional<std::uint64_t> default_seed_;
  std::unique_ptr<SessionStore> store_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_rng_;
};

}  // namespace theaitre
