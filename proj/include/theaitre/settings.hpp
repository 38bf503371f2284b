#pragma once

#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "theaitre/context.hpp"
#include "theaitre/decode.hpp"
#include "theaitre/summarize.hpp"
#include "theaitre/translate.hpp"

namespace theaitre {

struct RetryPolicy {
  std::size_t max_retries = 5;       // T
  std::size_t duplicate_window = 6;  // W

  bool operator==(const RetryPolicy&) const = default;
};

/// Every tunable knob of a session.
struct GenerationSettings {
  SamplerConfig sampler;
  ContextBudget budget;
  SummarizerConfig summarizer;
  RetryPolicy retry;
  LanguagePair languages;

  bool operator==(const GenerationSettings&) const = default;
};

/// Dotted keys accepted by apply_setting, e.g. "sampler.temperature",
/// "budget.M", "retry.duplicate_window", "mt.target_lang".
const std::vector<std::string>& setting_keys();

/// Throws Error(InvalidConfig) for unknown keys or unparsable values.
void apply_setting(GenerationSettings& settings, std::string_view key, std::string_view value);

/// Range checks plus the budget/limit headroom check.
void validate(const GenerationSettings& settings, std::size_t context_limit);

nlohmann::json to_json(const GenerationSettings& settings);

/// Accepts the nested form produced by to_json, flat dotted keys, or a mix;
/// unspecified knobs keep their value from `base`.
GenerationSettings settings_from_json(const nlohmann::json& j, GenerationSettings base = {});

}  // namespace theaitre
