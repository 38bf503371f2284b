#include "theaitre/remote.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "theaitre/error.hpp"

namespace theaitre {

using nlohmann::json;

// --- connection pool ------------------------------------------------------------

struct HttpPool {
  std::string origin;  // scheme://host:port
  std::string base;    // path prefix without trailing slash
  std::chrono::milliseconds timeout;
  std::size_t capacity;

  std::mutex mutex;
  std::condition_variable cv;
  std::vector<std::unique_ptr<httplib::Client>> idle;
  std::size_t created = 0;

  HttpPool(const std::string& url, std::chrono::milliseconds t, std::size_t cap)
      : timeout(t), capacity(std::max<std::size_t>(cap, 1)) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    origin = url.substr(0, path_start);
    if (scheme_end == std::string::npos) origin = "http://" + origin;
    base = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    if (url.empty()) throw Error(ErrorCode::InvalidConfig, "empty service URL");
  }

  std::unique_ptr<httplib::Client> acquire() {
    std::unique_lock lk(mutex);
    cv.wait(lk, [&] { return !idle.empty() || created < capacity; });
    if (!idle.empty()) {
      auto c = std::move(idle.back());
      idle.pop_back();
      return c;
    }
    ++created;
    lk.unlock();
    auto c = std::make_unique<httplib::Client>(origin);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    c->set_connection_timeout(secs, usecs);
    c->set_read_timeout(secs, usecs);
    c->set_write_timeout(secs, usecs);
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    {
      std::lock_guard lk(mutex);
      idle.push_back(std::move(c));
    }
    cv.notify_one();
  }
};

namespace {

struct Reply {
  int status = 0;
  std::string body;
  std::optional<std::chrono::milliseconds> retry_after;
};

std::optional<Reply> call_once(HttpPool& pool, const std::string& method, const std::string& path,
                               const std::string& body) {
  auto client = pool.acquire();
  const std::string full = pool.base + path;
  httplib::Result r = method == "GET" ? client->Get(full) : client->Post(full, body, "application/json");
  std::optional<Reply> out;
  if (r) {
    Reply reply{r->status, r->body, std::nullopt};
    if (r->has_header("Retry-After")) {
      try {
        reply.retry_after = std::chrono::seconds(std::stoll(r->get_header_value("Retry-After")));
      } catch (const std::exception&) {
      }
    }
    out = std::move(reply);
  }
  pool.release(std::move(client));
  return out;
}

/// 2xx -> parsed body; 5xx, 429 and transport errors are retried; other
/// statuses are protocol errors.
json request(HttpPool& pool, const std::string& method, const std::string& path, const json& body, int attempts,
             std::chrono::milliseconds backoff, ErrorCode unavailable) {
  attempts = std::max(attempts, 1);
  const std::string payload = body.is_null() ? std::string() : body.dump();
  std::string last = "no attempt made";
  std::chrono::milliseconds retry_after = backoff;
  for (int a = 1; a <= attempts; ++a) {
    auto reply = call_once(pool, method, path, payload);
    const auto delay = backoff * (1 << std::min(a - 1, 10));
    retry_after = delay;
    if (!reply) {
      last = "cannot reach " + pool.origin;
    } else if (reply->status >= 200 && reply->status < 300) {
      try {
        return json::parse(reply->body);
      } catch (const json::exception& e) {
        throw Error(unavailable == ErrorCode::TranslationUnavailable ? unavailable : ErrorCode::Protocol,
                    path + ": malformed reply: " + e.what());
      }
    } else if (reply->status == 413) {
      throw Error(unavailable == ErrorCode::TranslationUnavailable ? unavailable : ErrorCode::ContextOverflow,
                  path + ": " + reply->body);
    } else if (reply->status >= 500 || reply->status == 429) {
      last = path + " answered " + std::to_string(reply->status);
      if (reply->retry_after) retry_after = *reply->retry_after;
    } else {
      throw Error(unavailable == ErrorCode::TranslationUnavailable ? unavailable : ErrorCode::Protocol,
                  path + " answered " + std::to_string(reply->status) + ": " + reply->body);
    }
    if (a < attempts) std::this_thread::sleep_for(delay);
  }
  throw Error(unavailable, last + " after " + std::to_string(attempts) + " attempts", retry_after, attempts);
}

}  // namespace

// --- RemoteLm -------------------------------------------------------------------

RemoteLm::RemoteLm(RemoteLmConfig config)
    : config_(std::move(config)),
      pool_(std::make_unique<HttpPool>(config_.url, config_.timeout, config_.pool_size)),
      vocab_size_(config_.vocab_size),
      context_limit_(config_.context_limit) {
  if (config_.top_k == 0) throw Error(ErrorCode::InvalidConfig, "lm.top_k must be >= 1");
}

RemoteLm::~RemoteLm() = default;

void RemoteLm::handshake() const {
  try {
    auto info = request(*pool_, "GET", "/v1/info", nullptr, 1, config_.backoff, ErrorCode::BackendUnavailable);
    if (info.contains("vocab_size")) vocab_size_ = info.at("vocab_size").get<std::size_t>();
    if (info.contains("context_limit")) context_limit_ = info.at("context_limit").get<std::size_t>();
    if (info.contains("newline_token")) newline_ = info.at("newline_token").get<TokenId>();
    std::lock_guard lk(model_mutex_);
    model_ = info.value("model", std::string{});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackendUnavailable) throw;
  }
  if (newline_.load() < 0) {
    auto reply = request(*pool_, "POST", "/v1/encode", {{"text", "\n"}}, config_.max_attempts, config_.backoff,
                         ErrorCode::BackendUnavailable);
    const auto tokens = reply.at("tokens").get<TokenSeq>();
    if (tokens.size() != 1) throw Error(ErrorCode::Protocol, "the newline does not encode to a single token");
    newline_ = tokens.front();
  }
  handshaken_ = true;
}

void RemoteLm::ensure_handshake() const {
  if (!handshaken_.load()) handshake();
}

TokenId RemoteLm::newline_token() const {
  ensure_handshake();
  return newline_.load();
}

TokenSeq RemoteLm::encode(std::string_view text) {
  ensure_handshake();
  auto reply = request(*pool_, "POST", "/v1/encode", {{"text", std::string(text)}}, config_.max_attempts,
                       config_.backoff, ErrorCode::BackendUnavailable);
  try {
    return reply.at("tokens").get<TokenSeq>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("/v1/encode: ") + e.what());
  }
}

std::string RemoteLm::decode(std::span<const TokenId> tokens) {
  ensure_handshake();
  auto reply = request(*pool_, "POST", "/v1/decode", {{"tokens", TokenSeq(tokens.begin(), tokens.end())}},
                       config_.max_attempts, config_.backoff, ErrorCode::BackendUnavailable);
  try {
    return reply.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("/v1/decode: ") + e.what());
  }
}

LogitVector RemoteLm::next_logits(std::span<const TokenId> context, std::span<const TokenId> want) {
  ensure_handshake();
  check_context(context, context_limit());
  json body = {{"tokens", TokenSeq(context.begin(), context.end())}, {"top_k", config_.top_k}};
  if (!want.empty()) body["want"] = TokenSeq(want.begin(), want.end());
  auto reply =
      request(*pool_, "POST", "/v1/logits", body, config_.max_attempts, config_.backoff, ErrorCode::BackendUnavailable);
  try {
    if (reply.contains("vocab_size")) vocab_size_ = reply.at("vocab_size").get<std::size_t>();
    if (reply.contains("context_limit")) context_limit_ = reply.at("context_limit").get<std::size_t>();
    LogitVector logits(vocab_size(), -std::numeric_limits<double>::infinity());
    for (const auto& pair : reply.at("logits")) {
      const auto id = pair.at(0).get<std::int64_t>();
      if (id < 0 || static_cast<std::size_t>(id) >= logits.size()) {
        throw Error(ErrorCode::Protocol, "/v1/logits: token id " + std::to_string(id) + " outside the vocabulary");
      }
      if (pair.at(1).is_number()) logits[static_cast<std::size_t>(id)] = pair.at(1).get<double>();
    }
    return logits;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("/v1/logits: ") + e.what());
  }
}

BackendHealth RemoteLm::health() {
  BackendHealth h;
  try {
    handshake();
    h.reachable = true;
    std::lock_guard lk(model_mutex_);
    h.model = model_;
  } catch (const Error& e) {
    h.detail = e.what();
  }
  return h;
}

// --- RemoteMt -------------------------------------------------------------------

RemoteMt::RemoteMt(RemoteMtConfig config)
    : config_(std::move(config)), pool_(std::make_unique<HttpPool>(config_.url, config_.timeout, config_.pool_size)) {}

RemoteMt::~RemoteMt() = default;

std::vector<std::string> RemoteMt::translate(const std::vector<std::string>& sentences,
                                             const std::string& source_lang, const std::string& target_lang) {
  if (sentences.empty()) return {};
  auto reply = request(*pool_, "POST", "/v1/translate",
                       {{"src_lang", source_lang}, {"tgt_lang", target_lang}, {"sentences", sentences}},
                       config_.max_attempts, config_.backoff, ErrorCode::TranslationUnavailable);
  try {
    auto out = reply.at("translations").get<std::vector<std::string>>();
    if (out.size() != sentences.size()) {
      throw Error(ErrorCode::TranslationUnavailable, "MT returned " + std::to_string(out.size()) + " sentences for " +
                                                         std::to_string(sentences.size()));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::TranslationUnavailable, std::string("/v1/translate: ") + e.what());
  }
}

bool RemoteMt::healthy() {
  try {
    translate({"ok"}, "en", "en");
    return true;
  } catch (const Error&) {
    return false;
  }
}

// --- mock services --------------------------------------------------------------

struct MockHttpService::Impl {
  httplib::Server server;
};

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) {
  int status = 500;
  switch (e.code()) {
    case ErrorCode::ContextOverflow: status = 413; break;
    case ErrorCode::InvalidContext:
    case ErrorCode::InvalidToken:
    case ErrorCode::InvalidText: status = 400; break;
    default: break;
  }
  reply_json(res, status, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply_error(res, e);
  } catch (const json::exception& e) {
    reply_json(res, 400, {{"error", "Protocol"}, {"message", e.what()}});
  }
}

}  // namespace

MockHttpService::MockHttpService() : impl_(std::make_unique<Impl>()) {}

MockHttpService::~MockHttpService() { stop(); }

bool MockHttpService::should_fail() {
  int n = failures_.load();
  while (n > 0) {
    if (failures_.compare_exchange_weak(n, n - 1)) return true;
  }
  return false;
}

bool MockHttpService::inject_failure(httplib::Response& res) {
  if (!should_fail()) return false;
  res.set_header("Retry-After", "1");
  reply_json(res, 503, {{"error", "BackendUnavailable"}, {"message", "injected failure"}});
  return true;
}

void MockHttpService::bind(const std::string& host, int port) {
  auto& server = impl_->server;
  server.set_pre_routing_handler([this](const httplib::Request&, httplib::Response&) {
    ++requests_;
    return httplib::Server::HandlerResponse::Unhandled;
  });
  install();
  host_ = host;
  if (port == 0) {
    port_ = server.bind_to_any_port(host);
  } else {
    port_ = server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::InvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
}

void MockHttpService::start(const std::string& host, int port) {
  bind(host, port);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockHttpService::run(const std::string& host, int port) {
  bind(host, port);
  impl_->server.listen_after_bind();
}

void MockHttpService::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockHttpService::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

MockLmService::MockLmService(std::shared_ptr<LmBackend> backend, std::string model)
    : backend_(std::move(backend)), model_(std::move(model)) {}

MockLmService::~MockLmService() { stop(); }

void MockLmService::install() {
  auto& server = impl_->server;
  server.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
    if (inject_failure(res)) return;
    guarded(res, [&] {
      reply_json(res, 200,
                 {{"model", model_},
                  {"context_limit", backend_->context_limit()},
                  {"vocab_size", backend_->vocab_size()},
                  {"newline_token", backend_->newline_token()}});
    });
  });
  server.Post("/v1/encode", [this](const httplib::Request& req, httplib::Response& res) {
    if (inject_failure(res)) return;
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      reply_json(res, 200, {{"tokens", backend_->encode(body.at("text").get<std::string>())}});
    });
  });
  server.Post("/v1/decode", [this](const httplib::Request& req, httplib::Response& res) {
    if (inject_failure(res)) return;
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto tokens = body.at("tokens").get<TokenSeq>();
      reply_json(res, 200, {{"text", backend_->decode(tokens)}});
    });
  });
  server.Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
    if (inject_failure(res)) return;
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto tokens = body.at("tokens").get<TokenSeq>();
      const auto want = body.value("want", TokenSeq{});
      const auto top_k = body.value("top_k", std::size_t{512});
      const auto logits = backend_->next_logits(tokens, want);

      std::vector<std::size_t> order(logits.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const auto k = std::min(top_k, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
      order.resize(k);
      for (auto w : want) {
        if (w >= 0 && static_cast<std::size_t>(w) < logits.size()) order.push_back(static_cast<std::size_t>(w));
      }
      std::sort(order.begin(), order.end());
      order.erase(std::unique(order.begin(), order.end()), order.end());

      json pairs = json::array();
      for (auto id : order) {
        if (std::isfinite(logits[id])) pairs.push_back({id, logits[id]});
      }
      reply_json(res, 200,
                 {{"logits", pairs},
                  {"model", model_},
                  {"context_limit", backend_->context_limit()},
                  {"vocab_size", logits.size()}});
    });
  });
}

MockMtService::MockMtService(std::shared_ptr<MtClient> mt) : mt_(std::move(mt)) {}

MockMtService::~MockMtService() { stop(); }

void MockMtService::install() {
  impl_->server.Post("/v1/translate", [this](const httplib::Request& req, httplib::Response& res) {
    if (inject_failure(res)) return;
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto sentences = body.at("sentences").get<std::vector<std::string>>();
      reply_json(res, 200,
                 {{"translations", mt_->translate(sentences, body.value("src_lang", std::string("en")),
                                                  body.value("tgt_lang", std::string("cs")))}});
    });
  });
}

}  // namespace theaitre
