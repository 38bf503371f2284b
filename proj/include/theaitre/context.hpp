#pragma once

#include <vector>

#include "theaitre/lm_backend.hpp"
#include "theaitre/script.hpp"
#include "theaitre/summarize.hpp"

namespace theaitre {

/// Token budget for the model input.
struct ContextBudget {
  std::size_t max_tokens = 924;     // M
  std::size_t recent_tokens = 250;  // R
  std::size_t summary_lines = 5;    // N
  /// Keep the setting block out of summarization and always in front.
  bool pin_setting = false;

  bool operator==(const ContextBudget&) const = default;
};

/// Checks 0 < R < M, N >= 1 and, when given, M + max_new_tokens <= context_limit.
void validate(const ContextBudget& budget);
void validate(const ContextBudget& budget, std::size_t max_new_tokens, std::size_t context_limit);

/// Rendered script plus a closing newline, so decoding starts a fresh line.
/// Empty for a script with no text at all.
std::string context_text(const Script& script);
std::string context_text(const std::vector<ScriptLine>& lines);

/// length(encode(render_script(script) + "\n")); 0 for an empty script.
std::size_t token_length(const Script& script, LmBackend& backend);

struct RecentSplit {
  std::vector<ScriptLine> older;   // setting lines (id kSettingLineId) included
  std::vector<ScriptLine> recent;
};

/// Finds the first line break inside the last R tokens and keeps every
/// complete line after it. The break that closes the final line does not
/// count; without any other break the final line alone is kept.
RecentSplit split_recent(const Script& script, std::size_t recent_tokens, LmBackend& backend);

struct ContextPlan {
  TokenSeq tokens;
  bool summarized = false;
  std::size_t cropped_tokens = 0;
  std::vector<ScriptLine> summary;  // selected older lines, original order
  std::vector<ScriptLine> recent;
};

/// Under budget: the full encoding. Otherwise keep the recent lines,
/// summarize the older ones to N lines, concatenate, and crop from the
/// front to M tokens.
ContextPlan plan_context(const Script& script, const ContextBudget& budget, const SummarizerConfig& scfg,
                         LmBackend& backend);

TokenSeq build_context(const Script& script, const ContextBudget& budget, const SummarizerConfig& scfg,
                       LmBackend& backend);

}  // namespace theaitre
