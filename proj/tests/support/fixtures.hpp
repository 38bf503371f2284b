#pragma once

#include <algorithm>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "theaitre/lm_backend.hpp"
#include "theaitre/script.hpp"
#include "theaitre/session.hpp"
#include "theaitre/translate.hpp"

namespace fixtures {

using namespace theaitre;

inline std::shared_ptr<WhitespaceVocab> fresh_vocab() {
  const auto lexicon = default_mock_lexicon();
  return std::make_shared<WhitespaceVocab>(lexicon);
}

inline std::shared_ptr<HashLm> hash_lm(HashLmConfig cfg = {}) { return std::make_shared<HashLm>(fresh_vocab(), cfg); }

inline SessionServices mock_services(std::shared_ptr<LmBackend> lm = nullptr,
                                     std::shared_ptr<MtClient> mt = nullptr) {
  SessionServices s;
  s.lm = lm ? std::move(lm) : hash_lm();
  s.mt = mt ? std::move(mt) : std::make_shared<IdentityMt>();
  s.clock = logical_clock();
  return s;
}

inline std::string random_word(std::mt19937_64& rng) {
  static const auto lexicon = default_mock_lexicon();
  return lexicon[std::uniform_int_distribution<std::size_t>(0, lexicon.size() - 1)(rng)];
}

inline std::string random_name(std::mt19937_64& rng, bool allow_spaces = true) {
  static const char* const kFirst[] = {"ROBOT", "MASTER", "BOY", "GIRL", "DEATH", "ANNA", "PETR", "JANA",
                                       "OLD",   "YOUNG",  "DOG", "CAT",  "KING",  "QUEEN", "NURSE", "DOCTOR"};
  static const char* const kSecond[] = {"MAN", "WOMAN", "ONE", "TWO", "SR", "JR"};
  std::string name = kFirst[std::uniform_int_distribution<int>(0, 15)(rng)];
  if (allow_spaces && std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
    name += " ";
    name += kSecond[std::uniform_int_distribution<int>(0, 5)(rng)];
  }
  return name;
}

/// k distinct names.
inline std::vector<CharacterName> random_cast(std::mt19937_64& rng, std::size_t k, bool allow_spaces = true) {
  std::vector<CharacterName> out;
  while (out.size() < k) {
    CharacterName n(random_name(rng, allow_spaces));
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

inline std::string random_utterance(std::mt19937_64& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
  }
  return out;
}

/// Canonical script text (one trailing newline) of roughly `target_tokens`
/// whitespace tokens, with an occasional setting block and stage direction.
inline std::string random_script_text(std::mt19937_64& rng, std::size_t target_tokens,
                                      const std::vector<CharacterName>& cast, std::size_t max_line_words = 40) {
  std::string out;
  std::size_t tokens = 0;
  std::uniform_int_distribution<std::size_t> words(1, max_line_words);
  const auto setting_lines = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int i = 0; i < setting_lines; ++i) {
    const auto n = words(rng);
    out += random_utterance(rng, n) + "\n";
    tokens += n + 1;
  }
  while (tokens < target_tokens) {
    const auto roll = std::uniform_int_distribution<int>(0, 19)(rng);
    auto n = words(rng);
    if (roll == 0) n = std::uniform_int_distribution<std::size_t>(200, 320)(rng);  // overlong line
    if (roll == 1) {
      out += "(" + random_utterance(rng, n) + ")\n";
      tokens += n + 1;
      continue;
    }
    const auto& who = cast[std::uniform_int_distribution<std::size_t>(0, cast.size() - 1)(rng)];
    out += who.str() + ": " + random_utterance(rng, n) + "\n";
    tokens += n + 1 + static_cast<std::size_t>(std::count(who.str().begin(), who.str().end(), ' '));
  }
  return out;
}

}  // namespace fixtures
