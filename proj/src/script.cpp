#include "theaitre/script.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

#include "theaitre/error.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

namespace {

bool valid_name(std::string_view trimmed) {
  return !trimmed.empty() && trimmed.find(':') == std::string_view::npos &&
         trimmed.find('\n') == std::string_view::npos &&
         trimmed.find('\r') == std::string_view::npos;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyScript: return "EmptyScript";
    case ErrorCode::InvalidText: return "InvalidText";
    case ErrorCode::InvalidToken: return "InvalidToken";
    case ErrorCode::InvalidContext: return "InvalidContext";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::NoCharacters: return "NoCharacters";
    case ErrorCode::ConstraintStarved: return "ConstraintStarved";
    case ErrorCode::TranslationUnavailable: return "TranslationUnavailable";
    case ErrorCode::DuplicateExhausted: return "DuplicateExhausted";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownLine: return "UnknownLine";
    case ErrorCode::PromptLineImmutable: return "PromptLineImmutable";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::Cancelled: return "Cancelled";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Storage: return "Storage";
    case ErrorCode::Protocol: return "Protocol";
  }
  return "Unknown";
}

CharacterName::CharacterName(std::string_view text) {
  auto t = text::trim(text);
  if (!valid_name(t)) throw Error(ErrorCode::InvalidText, "invalid character name '" + std::string(text) + "'");
  text_ = std::string(t);
}

std::optional<CharacterName> CharacterName::try_make(std::string_view text) {
  auto t = text::trim(text);
  if (!valid_name(t)) return std::nullopt;
  return CharacterName(Trusted{}, std::string(t));
}

std::string_view to_string(LineKind kind) noexcept {
  return kind == LineKind::Cue ? "cue" : "stage-direction";
}

std::string_view to_string(LineOrigin origin) noexcept {
  switch (origin) {
    case LineOrigin::Prompt: return "prompt";
    case LineOrigin::Generated: return "generated";
    case LineOrigin::Manual: return "manual";
  }
  return "prompt";
}

std::optional<LineOrigin> origin_from_string(std::string_view s) noexcept {
  if (s == "prompt") return LineOrigin::Prompt;
  if (s == "generated") return LineOrigin::Generated;
  if (s == "manual") return LineOrigin::Manual;
  return std::nullopt;
}

ScriptLine ScriptLine::cue(LineId id, CharacterName speaker, std::string text, LineOrigin origin) {
  return ScriptLine{id, LineKind::Cue, std::move(speaker), std::move(text), origin};
}

ScriptLine ScriptLine::direction(LineId id, std::string text, LineOrigin origin) {
  return ScriptLine{id, LineKind::StageDirection, std::nullopt, std::move(text), origin};
}

bool ScriptLine::same_content(const ScriptLine& other) const noexcept {
  return kind == other.kind && speaker == other.speaker && text == other.text;
}

std::optional<std::pair<CharacterName, std::string>> parse_cue(std::string_view line) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto name = CharacterName::try_make(line.substr(0, colon));
  if (!name) return std::nullopt;
  auto utterance = text::rtrim(line.substr(colon + 1));
  while (!utterance.empty() && (utterance.front() == ' ' || utterance.front() == '\t')) {
    utterance.remove_prefix(1);
  }
  return std::make_pair(std::move(*name), std::string(utterance));
}

Script parse_script(std::string_view input) {
  if (text::trim(input).empty()) throw Error(ErrorCode::EmptyScript, "script text is empty");
  if (input.back() == '\n') input.remove_suffix(1);

  Script script;
  std::vector<std::string_view> setting;
  bool seen_cue = false;
  LineId next_id = 0;
  for (auto raw : text::split_lines(input)) {
    auto line = strip_cr(raw);
    auto cue = parse_cue(line);
    if (cue) {
      seen_cue = true;
      script.lines.push_back(ScriptLine::cue(next_id++, std::move(cue->first), std::move(cue->second)));
    } else if (!seen_cue) {
      setting.push_back(line);
    } else {
      script.lines.push_back(ScriptLine::direction(next_id++, std::string(text::rtrim(line))));
    }
  }
  for (std::size_t i = 0; i < setting.size(); ++i) {
    if (i) script.setting += '\n';
    script.setting += setting[i];
  }
  return script;
}

std::string render_line(const ScriptLine& line) {
  if (!line.is_cue()) return line.text;
  std::string out = line.speaker->str();
  out += ':';
  if (!line.text.empty()) {
    out += ' ';
    out += line.text;
  }
  return out;
}

std::string render_lines(const std::vector<ScriptLine>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += render_line(lines[i]);
  }
  return out;
}

std::string render_script(const Script& script) {
  std::string out = script.setting;
  if (!script.lines.empty()) {
    if (!out.empty()) out += '\n';
    out += render_lines(script.lines);
  }
  return out;
}

std::vector<CharacterName> extract_characters(const std::vector<ScriptLine>& lines) {
  std::vector<CharacterName> out;
  for (const auto& line : lines) {
    if (!line.is_cue()) continue;
    if (std::find(out.begin(), out.end(), *line.speaker) == out.end()) out.push_back(*line.speaker);
  }
  return out;
}

std::vector<CharacterName> extract_characters(const Script& script) {
  return extract_characters(script.lines);
}

std::vector<ScriptLine> flatten_lines(const Script& script) {
  std::vector<ScriptLine> out;
  if (!script.setting.empty()) {
    for (auto piece : text::split_lines(script.setting)) {
      out.push_back(ScriptLine::direction(kSettingLineId, std::string(piece)));
    }
  }
  out.insert(out.end(), script.lines.begin(), script.lines.end());
  return out;
}

bool same_content(const Script& a, const Script& b) noexcept {
  return a.setting == b.setting &&
         std::equal(a.lines.begin(), a.lines.end(), b.lines.begin(), b.lines.end(),
                    [](const ScriptLine& x, const ScriptLine& y) { return x.same_content(y); });
}

std::string normalize_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  bool pending_space = false;
  while (i < len) {
    UChar32 c;
    U8_NEXT(bytes, i, len, c);
    if (c < 0) c = 0xFFFD;
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    char buf[4];
    std::int32_t n = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), n, 4, u_foldCase(c, U_FOLD_CASE_DEFAULT), err);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace theaitre
