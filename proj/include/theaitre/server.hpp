#pragma once

#include <memory>
#include <string>
#include <thread>

#include "theaitre/error.hpp"
#include "theaitre/store.hpp"

namespace theaitre {

/// HTTP status for an error code: 400 bad input, 404 unknown session/line,
/// 409 busy/immutable/cancelled, 422 duplicate guard, 502 starved constraint,
/// 503 backend or MT outage, 500 otherwise.
int http_status(ErrorCode code) noexcept;

/// JSON API:
///   GET  /healthz
///   GET  /sessions
///   POST /sessions                                {prompt, config?, seed?, names?} -> 201 {id}
///   GET  /sessions/{id}
///   POST /sessions/{id}/generate
///   POST /sessions/{id}/cancel
///   POST /sessions/{id}/lines                     {speaker, text}
///   POST /sessions/{id}/lines/{line_id}/discard
///   POST /sessions/{id}/names                     {speaker, target}
///   GET  /sessions/{id}/export?format=plain|structured
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<SessionManager> manager);
  ~HttpServer();

  /// Binds (port 0 picks a free port) and serves on a background thread.
  void start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();
  int port() const noexcept { return port_; }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

 private:
  struct Impl;
  void bind(const std::string& host, int port);

  std::shared_ptr<SessionManager> manager_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace theaitre
