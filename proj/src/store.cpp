#include "theaitre/store.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "theaitre/error.hpp"

namespace theaitre {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

void write_atomically(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Storage, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Storage, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot replace " + target.string() + ": " + ec.message());
}

}  // namespace

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot create storage root " + root_.string() + ": " + ec.message());
}

fs::path SessionStore::dir(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::Storage, "session id '" + id + "' is not storable");
  return root_ / id;
}

void SessionStore::record(const SessionState& state, const SessionEvent& event) {
  std::lock_guard lk(mutex_);
  const auto d = dir(state.id);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot create " + d.string() + ": " + ec.message());
  {
    std::ofstream log(d / "events.jsonl", std::ios::binary | std::ios::app);
    if (!log) throw Error(ErrorCode::Storage, "cannot append to " + (d / "events.jsonl").string());
    log << to_json(event).dump() << '\n';
    log.flush();
    if (!log) throw Error(ErrorCode::Storage, "short write to " + (d / "events.jsonl").string());
  }
  write_atomically(d / "snapshot.json", to_json(state).dump(1));
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_, ec)) {
    if (!entry.is_directory()) continue;
    auto name = entry.path().filename().string();
    if (valid_id(name) && fs::exists(entry.path() / "events.jsonl")) out.push_back(std::move(name));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<SessionState> SessionStore::load_snapshot(const std::string& id) const {
  std::ifstream in(dir(id) / "snapshot.json", std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return state_from_json(json::parse(in));
  } catch (const json::exception&) {
    return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<SessionEvent> SessionStore::load_events(const std::string& id) const {
  std::ifstream in(dir(id) / "events.jsonl", std::ios::binary);
  if (!in) throw Error(ErrorCode::Storage, "no event log for session " + id);
  std::vector<SessionEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception&) {
      break;  // torn final write
    }
  }
  return out;
}

// --- SessionManager -------------------------------------------------------------

SessionManager::SessionManager(SessionServices services, GenerationSettings defaults,
                               std::optional<std::uint64_t> default_seed, std::optional<fs::path> storage)
    : services_(std::move(services)), defaults_(defaults), default_seed_(default_seed), id_rng_(std::random_device{}()) {
  if (!services_.lm) throw Error(ErrorCode::InvalidConfig, "no language model backend configured");
  if (!services_.mt) services_.mt = std::make_shared<IdentityMt>();
  if (!services_.clock) services_.clock = system_clock_ms();
  validate(defaults_, services_.lm->context_limit());
  if (storage) store_ = std::make_unique<SessionStore>(*storage);
}

std::string SessionManager::fresh_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  for (;;) {
    auto v = id_rng_();
    std::string id = "s-";
    for (int i = 0; i < 16; ++i, v >>= 4) id.push_back(kHex[v & 0xf]);
    if (!sessions_.contains(id)) return id;
  }
}

SessionObserver SessionManager::observer() {
  if (!store_) return {};
  SessionStore* store = store_.get();
  return [store](const SessionState& state, const SessionEvent& event) {
    try {
      store->record(state, event);
    } catch (const Error& e) {
      std::cerr << "storage: " << e.what() << '\n';
    }
  };
}

std::shared_ptr<Session> SessionManager::create(const CreateRequest& request) {
  const auto settings = settings_from_json(request.config, defaults_);
  std::uint64_t seed = 0;
  std::string id;
  {
    std::lock_guard lk(mutex_);
    seed = request.seed ? *request.seed : default_seed_ ? *default_seed_ : id_rng_();
    id = fresh_id();
    sessions_[id] = nullptr;  // reserve
  }
  try {
    auto session = Session::create(id, request.prompt, settings, seed, services_, request.names, observer());
    std::lock_guard lk(mutex_);
    sessions_[id] = session;
    return session;
  } catch (...) {
    std::lock_guard lk(mutex_);
    sessions_.erase(id);
    throw;
  }
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lk(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end() || !it->second) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lk(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) {
    if (s) out.push_back(id);
  }
  return out;
}

std::size_t SessionManager::load_stored() {
  if (!store_) return 0;
  std::size_t loaded = 0;
  for (const auto& id : store_->list()) {
    try {
      const auto events = store_->load_events(id);
      std::shared_ptr<Session> session;
      auto snap = store_->load_snapshot(id);
      if (snap && snap->id == id && snap->events == events) {
        session = Session::restore(std::move(*snap), services_, observer());
      } else {
        session = Session::replay(id, events, services_);
        session = Session::restore(session->snapshot(), services_, observer());
      }
      std::lock_guard lk(mutex_);
      sessions_[id] = std::move(session);
      ++loaded;
    } catch (const Error& e) {
      std::cerr << "storage: skipping session " << id << ": " << e.what() << '\n';
    }
  }
  return loaded;
}

}  // namespace theaitre
