#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "theaitre/session.hpp"
#include "theaitre/settings.hpp"

namespace theaitre {

struct BackendOptions {
  std::string lm_url;            // remote logits service; wins over lm_mock
  std::string lm_mock = "hash";  // hash | scripted:FILE
  std::size_t lm_top_k = 512;
  long lm_timeout_ms = 30000;
  int lm_max_attempts = 3;
  std::size_t lm_context_limit = 1024;
  double lm_newline_bias = 0.5;
  std::string mt_url;
  std::string mt_mock = "identity";  // identity | reverse
  long mt_timeout_ms = 30000;
};

struct AppConfig {
  GenerationSettings settings;
  BackendOptions backends;
  std::string bind = "127.0.0.1:8080";
  std::optional<std::filesystem::path> storage;
  std::optional<std::uint64_t> seed;
};

/// Session knobs (see setting_keys()) plus lm.url, lm.mock, lm.top_k,
/// lm.timeout_ms, lm.max_attempts, lm.context_limit, lm.newline_bias,
/// mt.url, mt.mock, mt.timeout_ms, server.bind, server.storage, server.seed.
void apply_config_entry(AppConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
void load_config_file(AppConfig& config, const std::filesystem::path& path);

/// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_bind(std::string_view bind);

SessionServices make_services(const AppConfig& config);

}  // namespace theaitre
