#include "theaitre/translate.hpp"

#include "theaitre/error.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

std::vector<std::string> ReverseMt::translate(const std::vector<std::string>& sentences, const std::string&,
                                              const std::string&) {
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(text::utf8_reverse(s));
  return out;
}

std::string TranslatedLine::rendered() const {
  const std::string& body = status == TranslationStatus::Ok ? target_text : source.text;
  if (!target_cue) return body;
  return body.empty() ? *target_cue + ":" : *target_cue + ": " + body;
}

std::string target_cue_for(const CharacterName& speaker, const NameTable& names) {
  auto it = names.find(speaker);
  return it == names.end() ? speaker.str() : it->second;
}

namespace {

TranslatedLine shell(const ScriptLine& line, const NameTable& names) {
  TranslatedLine out;
  out.source = line;
  if (line.is_cue()) out.target_cue = target_cue_for(*line.speaker, names);
  return out;
}

TranslatedLine unavailable(const ScriptLine& line, const NameTable& names) {
  auto out = shell(line, names);
  out.target_text = line.text;
  out.status = TranslationStatus::Unavailable;
  return out;
}

// MT output may carry stray line breaks; a translated line stays one line.
std::string single_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return std::string(text::trim(s));
}

}  // namespace

TranslatedLine translate_line(const ScriptLine& line, const NameTable& names, MtClient& mt,
                              const LanguagePair& langs) {
  auto out = shell(line, names);
  try {
    auto result = mt.translate({line.text}, langs.source, langs.target);
    if (result.size() != 1) throw Error(ErrorCode::TranslationUnavailable, "MT returned misaligned output");
    out.target_text = single_line(std::move(result.front()));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TranslationUnavailable) throw;
    return unavailable(line, names);
  }
  return out;
}

std::vector<TranslatedLine> translate_lines(const std::vector<ScriptLine>& lines, const NameTable& names,
                                            MtClient& mt, const LanguagePair& langs) {
  std::vector<TranslatedLine> out;
  if (lines.empty()) return out;
  std::vector<std::string> batch;
  batch.reserve(lines.size());
  for (const auto& line : lines) batch.push_back(line.text);

  std::vector<std::string> result;
  try {
    result = mt.translate(batch, langs.source, langs.target);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TranslationUnavailable) throw;
  }
  if (result.size() != lines.size()) {
    for (const auto& line : lines) out.push_back(translate_line(line, names, mt, langs));
    return out;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = shell(lines[i], names);
    t.target_text = single_line(std::move(result[i]));
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TranslatedLine> translate_script(const Script& script, const NameTable& names, MtClient& mt,
                                             const LanguagePair& langs) {
  return translate_lines(script.lines, names, mt, langs);
}

}  // namespace theaitre
