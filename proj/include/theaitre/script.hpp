#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace theaitre {

using LineId = std::uint64_t;

/// Id carried by setting-block lines once the setting is flattened into
/// ordinary lines for context assembly. Never assigned to a real line.
inline constexpr LineId kSettingLineId = std::numeric_limits<LineId>::max();

/// Speaker name of a cue line. Trimmed, non-empty, no colon, no newline.
/// Identity is byte equality; there is no case folding.
class CharacterName {
 public:
  /// Throws Error(InvalidText) when the trimmed text is not a valid name.
  explicit CharacterName(std::string_view text);

  static std::optional<CharacterName> try_make(std::string_view text);

  const std::string& str() const noexcept { return text_; }

  auto operator<=>(const CharacterName&) const = default;
  bool operator==(const CharacterName&) const = default;

 private:
  struct Trusted {};
  CharacterName(Trusted, std::string text) : text_(std::move(text)) {}

  std::string text_;
};

enum class LineKind { Cue, StageDirection };
enum class LineOrigin { Prompt, Generated, Manual };

std::string_view to_string(LineKind kind) noexcept;
std::string_view to_string(LineOrigin origin) noexcept;
std::optional<LineOrigin> origin_from_string(std::string_view s) noexcept;

struct ScriptLine {
  LineId id = 0;
  LineKind kind = LineKind::StageDirection;
  std::optional<CharacterName> speaker;  // engaged iff kind == Cue
  std::string text;
  LineOrigin origin = LineOrigin::Prompt;

  static ScriptLine cue(LineId id, CharacterName speaker, std::string text,
                        LineOrigin origin = LineOrigin::Prompt);
  static ScriptLine direction(LineId id, std::string text, LineOrigin origin = LineOrigin::Prompt);

  bool is_cue() const noexcept { return kind == LineKind::Cue; }

  /// Same kind, speaker and text. Ignores id and origin.
  bool same_content(const ScriptLine& other) const noexcept;

  bool operator==(const ScriptLine&) const = default;
};

struct Script {
  std::string setting;
  std::vector<ScriptLine> lines;

  bool operator==(const Script&) const = default;
};

/// Splits `NAME: utterance` on the first colon. Returns nullopt when the
/// physical line is not a cue.
std::optional<std::pair<CharacterName, std::string>> parse_cue(std::string_view line);

/// Throws Error(EmptyScript) when text holds nothing but whitespace.
Script parse_script(std::string_view text);

/// One physical line per ScriptLine, Unix newlines, no trailing newline.
std::string render_line(const ScriptLine& line);
std::string render_lines(const std::vector<ScriptLine>& lines);
std::string render_script(const Script& script);

/// Unique cue speakers in order of first appearance.
std::vector<CharacterName> extract_characters(const Script& script);
std::vector<CharacterName> extract_characters(const std::vector<ScriptLine>& lines);

/// Setting block split into stage-direction lines (id kSettingLineId)
/// followed by the script lines. render_lines() of the result equals
/// render_script() of the input.
std::vector<ScriptLine> flatten_lines(const Script& script);

bool same_content(const Script& a, const Script& b) noexcept;

/// Simple case fold, trim, collapse internal whitespace runs to one space.
std::string normalize_line(std::string_view text);

}  // namespace theaitre
