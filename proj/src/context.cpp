#include "theaitre/context.hpp"

#include <algorithm>

#include "theaitre/error.hpp"

namespace theaitre {

void validate(const ContextBudget& budget) {
  if (budget.recent_tokens == 0 || budget.recent_tokens >= budget.max_tokens) {
    throw Error(ErrorCode::InvalidConfig, "context budget needs 0 < R < M");
  }
  if (budget.summary_lines < 1) throw Error(ErrorCode::InvalidConfig, "summary length N must be >= 1");
}

void validate(const ContextBudget& budget, std::size_t max_new_tokens, std::size_t context_limit) {
  validate(budget);
  if (budget.max_tokens + max_new_tokens > context_limit) {
    throw Error(ErrorCode::InvalidConfig, "M + max_new_tokens (" + std::to_string(budget.max_tokens) + " + " +
                                              std::to_string(max_new_tokens) + ") exceeds the model context limit " +
                                              std::to_string(context_limit));
  }
}

std::string context_text(const std::vector<ScriptLine>& lines) {
  if (lines.empty()) return {};
  return render_lines(lines) + "\n";
}

std::string context_text(const Script& script) {
  auto rendered = render_script(script);
  if (rendered.empty() && script.lines.empty()) return {};
  return rendered + "\n";
}

std::size_t token_length(const Script& script, LmBackend& backend) {
  const auto text = context_text(script);
  return text.empty() ? 0 : backend.encode(text).size();
}

namespace {

RecentSplit split_lines_recent(std::vector<ScriptLine> lines, std::size_t recent_tokens, LmBackend& backend) {
  RecentSplit split;
  if (lines.empty()) return split;
  const TokenSeq tokens = backend.encode(context_text(lines));
  const std::size_t total = tokens.size();
  if (total <= recent_tokens) {
    split.recent = std::move(lines);
    return split;
  }
  const TokenId newline = backend.newline_token();
  std::size_t breaks_before = lines.size() - 1;  // fallback: final line only
  for (std::size_t p = total - recent_tokens; p + 1 < total; ++p) {
    if (tokens[p] != newline) continue;
    const std::span<const TokenId> prefix(tokens.data(), p + 1);
    const auto decoded = backend.decode(prefix);
    breaks_before = static_cast<std::size_t>(std::count(decoded.begin(), decoded.end(), '\n'));
    break;
  }
  breaks_before = std::min(breaks_before, lines.size() - 1);
  const auto cut = lines.begin() + static_cast<std::ptrdiff_t>(breaks_before);
  split.older.assign(std::make_move_iterator(lines.begin()), std::make_move_iterator(cut));
  split.recent.assign(std::make_move_iterator(cut), std::make_move_iterator(lines.end()));
  return split;
}

}  // namespace

RecentSplit split_recent(const Script& script, std::size_t recent_tokens, LmBackend& backend) {
  if (recent_tokens < 1) throw Error(ErrorCode::InvalidConfig, "R must be >= 1");
  return split_lines_recent(flatten_lines(script), recent_tokens, backend);
}

ContextPlan plan_context(const Script& script, const ContextBudget& budget, const SummarizerConfig& scfg,
                         LmBackend& backend) {
  validate(budget);
  ContextPlan plan;
  const auto full_text = context_text(script);
  plan.tokens = full_text.empty() ? TokenSeq{} : backend.encode(full_text);
  if (plan.tokens.size() <= budget.max_tokens) {
    plan.recent = flatten_lines(script);
    return plan;
  }
  plan.summarized = true;

  std::vector<ScriptLine> pinned;
  std::vector<ScriptLine> body;
  if (budget.pin_setting) {
    pinned = flatten_lines(Script{script.setting, {}});
    body = script.lines;
  } else {
    body = flatten_lines(script);
  }

  auto split = split_lines_recent(std::move(body), budget.recent_tokens, backend);
  plan.summary = textrank_select(split.older, budget.summary_lines, scfg);
  plan.recent = std::move(split.recent);

  std::vector<ScriptLine> assembled = plan.summary;
  assembled.insert(assembled.end(), plan.recent.begin(), plan.recent.end());
  TokenSeq rest = backend.encode(context_text(assembled));
  TokenSeq head = pinned.empty() ? TokenSeq{} : backend.encode(context_text(pinned));

  if (head.size() >= budget.max_tokens) {
    // The pinned block alone overflows; fall back to a plain front crop.
    head.insert(head.end(), rest.begin(), rest.end());
    rest = std::move(head);
    head.clear();
  }
  const std::size_t room = budget.max_tokens - head.size();
  if (rest.size() > room) {
    plan.cropped_tokens = rest.size() - room;
    rest.erase(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(plan.cropped_tokens));
  }
  head.insert(head.end(), rest.begin(), rest.end());
  plan.tokens = std::move(head);
  return plan;
}

TokenSeq build_context(const Script& script, const ContextBudget& budget, const SummarizerConfig& scfg,
                       LmBackend& backend) {
  return plan_context(script, budget, scfg, backend).tokens;
}

}  // namespace theaitre
