#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "theaitre/script.hpp"

namespace theaitre {

/// Sentence-aligned machine translation. translate() returns exactly one
/// output per input or throws Error(TranslationUnavailable).
class MtClient {
 public:
  virtual ~MtClient() = default;
  virtual std::vector<std::string> translate(const std::vector<std::string>& sentences,
                                             const std::string& source_lang, const std::string& target_lang) = 0;
  virtual bool healthy() { return true; }
};

class IdentityMt : public MtClient {
 public:
  std::vector<std::string> translate(const std::vector<std::string>& sentences, const std::string&,
                                     const std::string&) override {
    return sentences;
  }
};

/// Reverses each sentence code point by code point: "ab cd" -> "dc ba".
class ReverseMt : public MtClient {
 public:
  std::vector<std::string> translate(const std::vector<std::string>& sentences, const std::string&,
                                     const std::string&) override;
};

/// Source-name -> target-name table. Names missing from the table map to
/// themselves.
using NameTable = std::map<CharacterName, std::string>;

struct LanguagePair {
  std::string source = "en";
  std::string target = "cs";

  bool operator==(const LanguagePair&) const = default;
};

enum class TranslationStatus { Ok, Unavailable };

struct TranslatedLine {
  ScriptLine source;
  std::string target_text;
  /// Name-table image of the source speaker; empty for stage directions.
  std::optional<std::string> target_cue;
  TranslationStatus status = TranslationStatus::Ok;

  /// `TARGETCUE: text` for cues, the text alone for directions. Untranslated
  /// lines render their source text.
  std::string rendered() const;

  bool operator==(const TranslatedLine&) const = default;
};

std::string target_cue_for(const CharacterName& speaker, const NameTable& names);

/// The utterance goes to MT alone; the cue comes from the name table. A
/// transport failure yields the source text flagged Unavailable.
TranslatedLine translate_line(const ScriptLine& line, const NameTable& names, MtClient& mt,
                              const LanguagePair& langs = {});

/// One batched MT call; if it fails, lines are retried one by one so a
/// single bad line cannot sink the rest.
std::vector<TranslatedLine> translate_lines(const std::vector<ScriptLine>& lines, const NameTable& names,
                                            MtClient& mt, const LanguagePair& langs = {});

std::vector<TranslatedLine> translate_script(const Script& script, const NameTable& names, MtClient& mt,
                                             const LanguagePair& langs = {});

}  // namespace theaitre
