#pragma once

#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace theaitre {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Full-vocabulary logits. Entries absent from a truncated remote response
/// and entries removed by a constraint are -inf.
using LogitVector = std::vector<double>;

struct BackendHealth {
  bool reachable = false;
  std::string model;
  std::string detail;
};

/// Tokenizer plus next-token distribution with a hard context limit.
/// Implementations must tolerate concurrent calls from several sessions.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual TokenSeq encode(std::string_view text) = 0;
  /// Throws Error(InvalidToken) for ids outside [0, vocab_size()).
  virtual std::string decode(std::span<const TokenId> tokens) = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context_limit() const = 0;
  virtual TokenId newline_token() const = 0;

  /// `want` lists ids whose logits must be present in the result even when
  /// the backend truncates to its top-K. Requires
  /// 0 < context.size() <= context_limit(); throws InvalidContext or
  /// ContextOverflow otherwise.
  virtual LogitVector next_logits(std::span<const TokenId> context,
                                  std::span<const TokenId> want = {}) = 0;

  virtual BackendHealth health() = 0;
};

/// Whitespace vocabulary shared by the mock backends: one token per
/// whitespace-separated word plus a reserved newline token (id 0). The
/// vocabulary grows when encode() meets a new word.
class WhitespaceVocab {
 public:
  static constexpr TokenId kNewline = 0;

  WhitespaceVocab();
  /// Pre-registers `words` (e.g. a base lexicon) in order.
  explicit WhitespaceVocab(std::span<const std::string> words);

  TokenSeq encode(std::string_view text);
  std::string decode(std::span<const TokenId> tokens) const;
  std::size_t size() const;
  /// Lookup without growing; -1 when absent.
  TokenId find(std::string_view word) const;

 private:
  TokenId intern(std::string_view word);

  mutable std::shared_mutex mutex_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Small built-in English lexicon giving the hash model something to say.
std::vector<std::string> default_mock_lexicon();

struct HashLmConfig {
  std::size_t context_limit = 1024;
  /// Number of trailing context tokens that feed the hash.
  std::size_t window = 8;
  double newline_bias = 0.5;
  std::uint64_t salt = 0;
};

/// logits[v] = hash(last `window` tokens, v) in [0, 1), plus a constant
/// bias on the newline token so lines terminate. Only the words known when
/// the model was built, plus any `want` ids, get finite logits; words other
/// sessions add later never change what this model samples.
class HashLm : public LmBackend {
 public:
  HashLm(std::shared_ptr<WhitespaceVocab> vocab, HashLmConfig config = {});

  TokenSeq encode(std::string_view text) override { return vocab_->encode(text); }
  std::string decode(std::span<const TokenId> tokens) override { return vocab_->decode(tokens); }
  std::size_t vocab_size() const override { return vocab_->size(); }
  std::size_t context_limit() const override { return config_.context_limit; }
  TokenId newline_token() const override { return WhitespaceVocab::kNewline; }
  LogitVector next_logits(std::span<const TokenId> context, std::span<const TokenId> want = {}) override;
  BackendHealth health() override { return {true, "hash-lm", ""}; }

  const std::shared_ptr<WhitespaceVocab>& vocab() const noexcept { return vocab_; }
  std::size_t base_vocab() const noexcept { return base_vocab_; }

 private:
  std::shared_ptr<WhitespaceVocab> vocab_;
  HashLmConfig config_;
  std::size_t base_vocab_ = 0;
};

/// One forced continuation: once the context ends with `after`, the model
/// emits `emit` token by token.
struct ScriptedRule {
  std::string after;
  std::string emit;
};

/// Deterministic scripted model. The rule whose `after` plus already-emitted
/// prefix of `emit` forms the longest suffix of the context decides the next
/// token (first rule wins ties). That token gets logit kForced and all
/// others kSuppressed; contexts no rule matches fall back to HashLm.
class ScriptedLm : public LmBackend {
 public:
  static constexpr double kForced = 10.0;
  static constexpr double kSuppressed = -1.0e4;

  ScriptedLm(std::shared_ptr<WhitespaceVocab> vocab, std::vector<ScriptedRule> rules,
             HashLmConfig fallback = {});

  /// JSON array of {"after": str, "emit": str}.
  static std::vector<ScriptedRule> load_rules(const std::string& path);

  TokenSeq encode(std::string_view text) override { return vocab_->encode(text); }
  std::string decode(std::span<const TokenId> tokens) override { return vocab_->decode(tokens); }
  std::size_t vocab_size() const override { return vocab_->size(); }
  std::size_t context_limit() const override { return fallback_.context_limit(); }
  TokenId newline_token() const override { return WhitespaceVocab::kNewline; }
  LogitVector next_logits(std::span<const TokenId> context, std::span<const TokenId> want = {}) override;
  BackendHealth health() override { return {true, "scripted-lm", ""}; }

  /// The forced token for `context`, or -1 when no rule applies.
  TokenId forced_token(std::span<const TokenId> context) const;

 private:
  struct CompiledRule {
    TokenSeq after;
    TokenSeq emit;
  };

  std::shared_ptr<WhitespaceVocab> vocab_;
  std::vector<CompiledRule> rules_;
  HashLm fallback_;
};

/// Shared precondition check for next_logits implementations.
void check_context(std::span<const TokenId> context, std::size_t limit);

}  // namespace theaitre
