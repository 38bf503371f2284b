#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace theaitre {

enum class ErrorCode {
  EmptyScript,
  InvalidText,
  InvalidToken,
  InvalidContext,
  ContextOverflow,
  BackendUnavailable,
  NoCharacters,
  ConstraintStarved,
  TranslationUnavailable,
  DuplicateExhausted,
  UnknownSession,
  UnknownLine,
  PromptLineImmutable,
  Busy,
  Cancelled,
  InvalidConfig,
  Storage,
  Protocol,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Error(ErrorCode code, const std::string& message, std::chrono::milliseconds retry_after,
        int attempts)
      : Error(code, message) {
    retry_after_ = retry_after;
    attempts_ = attempts;
  }

  ErrorCode code() const noexcept { return code_; }

  /// Populated for BackendUnavailable / TranslationUnavailable raised by remote clients.
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ErrorCode code_;
  std::optional<std::chrono::milliseconds> retry_after_;
  int attempts_ = 0;
};

}  // namespace theaitre
