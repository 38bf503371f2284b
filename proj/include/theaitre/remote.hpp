#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "theaitre/lm_backend.hpp"
#include "theaitre/translate.hpp"

namespace httplib {
struct Response;
}

namespace theaitre {

struct HttpPool;

struct RemoteLmConfig {
  std::string url;  // e.g. http://127.0.0.1:8500
  std::chrono::milliseconds timeout{30000};
  std::size_t top_k = 512;
  /// Used until the server reports its own values.
  std::size_t vocab_size = 50257;
  std::size_t context_limit = 1024;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
  std::size_t pool_size = 4;
};

/// Client for the logits service:
///   GET  /v1/info    -> {model, context_limit, vocab_size, newline_token}
///   POST /v1/logits  {tokens, want, top_k} -> {logits:[[id, value]...], model, context_limit}
///   POST /v1/encode  {text} -> {tokens}
///   POST /v1/decode  {tokens} -> {text}
/// Ids missing from a top-K reply come back as -inf. Transport failures and
/// 5xx replies are retried with exponential backoff, then surface as
/// Error(BackendUnavailable) carrying retry_after and the attempt count.
class RemoteLm : public LmBackend {
 public:
  explicit RemoteLm(RemoteLmConfig config);
  ~RemoteLm() override;

  TokenSeq encode(std::string_view text) override;
  std::string decode(std::span<const TokenId> tokens) override;
  std::size_t vocab_size() const override { return vocab_size_.load(); }
  std::size_t context_limit() const override { return context_limit_.load(); }
  TokenId newline_token() const override;
  LogitVector next_logits(std::span<const TokenId> context, std::span<const TokenId> want = {}) override;
  BackendHealth health() override;

  /// Fetches /v1/info; falls back to /v1/encode("\n") for the newline id.
  void handshake() const;

 private:
  void ensure_handshake() const;

  RemoteLmConfig config_;
  std::unique_ptr<HttpPool> pool_;
  mutable std::atomic<std::size_t> vocab_size_;
  mutable std::atomic<std::size_t> context_limit_;
  mutable std::atomic<TokenId> newline_{-1};
  mutable std::atomic<bool> handshaken_{false};
  mutable std::mutex model_mutex_;
  mutable std::string model_;
};

struct RemoteMtConfig {
  std::string url;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 2;
  std::chrono::milliseconds backoff{200};
  std::size_t pool_size = 2;
};

/// POST /v1/translate {src_lang, tgt_lang, sentences} -> {translations}.
/// Any failure becomes Error(TranslationUnavailable).
class RemoteMt : public MtClient {
 public:
  explicit RemoteMt(RemoteMtConfig config);
  ~RemoteMt() override;

  std::vector<std::string> translate(const std::vector<std::string>& sentences, const std::string& source_lang,
                                     const std::string& target_lang) override;
  bool healthy() override;

 private:
  RemoteMtConfig config_;
  std::unique_ptr<HttpPool> pool_;
};

/// In-process HTTP services speaking the two wire protocols above, for
/// tests and for the `mock-lm` / `mock-mt` subcommands.
class MockHttpService {
 public:
  virtual ~MockHttpService();

  /// Binds to host:port (port 0 picks a free one) and serves on a thread.
  void start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  int port() const noexcept { return port_; }
  std::string url() const;

  /// The next `n` requests get 503 with Retry-After: 1.
  void fail_next(int n) { failures_.store(n); }
  std::size_t requests() const noexcept { return requests_.load(); }

 protected:
  MockHttpService();
  struct Impl;
  std::unique_ptr<Impl> impl_;
  bool should_fail();
  /// Answers 503 with Retry-After: 1 while injected failures remain.
  bool inject_failure(httplib::Response& res);

 private:
  virtual void install() = 0;
  void bind(const std::string& host, int port);

  std::thread thread_;
  int port_ = 0;
  std::string host_;
  std::atomic<int> failures_{0};
  std::atomic<std::size_t> requests_{0};
};

class MockLmService : public MockHttpService {
 public:
  MockLmService(std::shared_ptr<LmBackend> backend, std::string model = "mock");
  ~MockLmService() override;

 private:
  void install() override;
  std::shared_ptr<LmBackend> backend_;
  std::string model_;
};

class MockMtService : public MockHttpService {
 public:
  explicit MockMtService(std::shared_ptr<MtClient> mt);
  ~MockMtService() override;

 private:
  void install() override;
  std::shared_ptr<MtClient> mt_;
};

}  // namespace theaitre
