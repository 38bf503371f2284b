#include "theaitre/lm_backend.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <mutex>
#include <json.hpp>

#include "theaitre/error.hpp"
#include "theaitre/kernels.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

void check_context(std::span<const TokenId> context, std::size_t limit) {
  if (context.empty()) throw Error(ErrorCode::InvalidContext, "next_logits needs a non-empty context");
  if (context.size() > limit) {
    throw Error(ErrorCode::ContextOverflow, "context of " + std::to_string(context.size()) +
                                                " tokens exceeds limit " + std::to_string(limit));
  }
}

// --- WhitespaceVocab ---------------------------------------------------------

WhitespaceVocab::WhitespaceVocab() {
  words_.push_back("\n");
  ids_.emplace("\n", kNewline);
}

WhitespaceVocab::WhitespaceVocab(std::span<const std::string> words) : WhitespaceVocab() {
  for (const auto& w : words) {
    for (auto piece : text::split_words(w)) intern(piece);
  }
}

TokenId WhitespaceVocab::find(std::string_view word) const {
  std::shared_lock lock(mutex_);
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? -1 : it->second;
}

TokenId WhitespaceVocab::intern(std::string_view word) {
  {
    std::shared_lock lock(mutex_);
    auto it = ids_.find(std::string(word));
    if (it != ids_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = ids_.emplace(std::string(word), static_cast<TokenId>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

TokenSeq WhitespaceVocab::encode(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\n') {
      out.push_back(kNewline);
      ++i;
    } else if (text::is_space(c)) {
      ++i;
    } else {
      std::size_t j = i;
      while (j < s.size() && !text::is_space(s[j])) ++j;
      out.push_back(intern(s.substr(i, j - i)));
      i = j;
    }
  }
  return out;
}

std::string WhitespaceVocab::decode(std::span<const TokenId> tokens) const {
  std::shared_lock lock(mutex_);
  std::string out;
  bool line_start = true;
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= words_.size()) {
      throw Error(ErrorCode::InvalidToken, "token id " + std::to_string(t) + " outside vocabulary of " +
                                               std::to_string(words_.size()));
    }
    if (t == kNewline) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += words_[static_cast<std::size_t>(t)];
    line_start = false;
  }
  return out;
}

std::size_t WhitespaceVocab::size() const {
  std::shared_lock lock(mutex_);
  return words_.size();
}

std::vector<std::string> default_mock_lexicon() {
  static const char* const kWords =
      "I you we they he she it the a an and but or not no yes is are was were be been "
      "have has had do does did will would can could shall should may might must "
      "what why how when where who which this that these those here there now then "
      "robot human people person man woman child mother father friend master machine "
      "work love life death heart soul mind body hand eye face voice name world home "
      "house door window room table chair bed light dark night day morning evening "
      "time year moment story dream fear hope truth lie question answer word song "
      "know think feel want need see hear say tell ask understand remember forget "
      "learn teach help try make give take come go stay leave wait stop begin end "
      "live die laugh cry sleep wake speak listen look find lose keep open close "
      "good bad new old young small big little long short true false strange simple "
      "beautiful quiet cold warm sad happy alone together again always never maybe "
      "please sorry thank hello goodbye oh well so very too just only still even "
      "me my your our their his her its them us him myself yourself "
      "in on at to from with without about for of by into over under after before "
      "Yes. No. Why? What? Really? Please. Thank you. Hello. Goodbye. Maybe. "
      "Sorry. Listen. Wait! Stop! Look! Come. Go. Stay. Never. Always. Nothing. "
      "everything nothing something anything everyone someone nobody "
      "again. here. there. now. too. tonight. tomorrow. yesterday. today.";
  std::vector<std::string> out;
  for (auto w : text::split_words(kWords)) out.emplace_back(w);
  return out;
}

// --- HashLm -------------------------------------------------------------------

HashLm::HashLm(std::shared_ptr<WhitespaceVocab> vocab, HashLmConfig config)
    : vocab_(std::move(vocab)), config_(config) {
  if (!vocab_) throw Error(ErrorCode::InvalidConfig, "HashLm requires a vocabulary");
  base_vocab_ = vocab_->size();
  if (config_.window == 0) throw Error(ErrorCode::InvalidConfig, "HashLm window must be >= 1");
}

LogitVector HashLm::next_logits(std::span<const TokenId> context, std::span<const TokenId> want) {
  check_context(context, config_.context_limit);
  const std::size_t n = std::min(config_.window, context.size());
  // FNV-1a over the trailing window, folded to 32 bits for the kernel.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ config_.salt;
  for (auto t : context.last(n)) {
    h ^= static_cast<std::uint32_t>(t);
    h *= 0x100000001b3ULL;
  }
  h ^= n;
  h *= 0x100000001b3ULL;
  const auto seed = static_cast<std::uint32_t>(h ^ (h >> 32));

  LogitVector logits(vocab_->size());
  kernels::active().hash_logits(seed, logits);
  logits[WhitespaceVocab::kNewline] += config_.newline_bias;
  if (logits.size() > base_vocab_) {
    std::vector<std::pair<std::size_t, double>> keep;
    for (auto w : want) {
      const auto i = static_cast<std::size_t>(w);
      if (w >= 0 && i >= base_vocab_ && i < logits.size()) keep.emplace_back(i, logits[i]);
    }
    std::fill(logits.begin() + static_cast<std::ptrdiff_t>(base_vocab_), logits.end(),
              -std::numeric_limits<double>::infinity());
    for (const auto& [i, v] : keep) logits[i] = v;
  }
  return logits;
}

// --- ScriptedLm ---------------------------------------------------------------

ScriptedLm::ScriptedLm(std::shared_ptr<WhitespaceVocab> vocab, std::vector<ScriptedRule> rules,
                       HashLmConfig fallback)
    : vocab_(vocab), fallback_(vocab, fallback) {
  for (const auto& rule : rules) {
    CompiledRule compiled{vocab_->encode(rule.after), vocab_->encode(rule.emit)};
    if (compiled.emit.empty()) throw Error(ErrorCode::InvalidConfig, "scripted rule with empty emit");
    rules_.push_back(std::move(compiled));
  }
}

std::vector<ScriptedRule> ScriptedLm::load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open scripted model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "scripted model file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::InvalidConfig, "scripted model file must hold a JSON array");
  std::vector<ScriptedRule> rules;
  for (const auto& item : doc) {
    rules.push_back({item.value("after", std::string{}), item.at("emit").get<std::string>()});
  }
  return rules;
}

TokenId ScriptedLm::forced_token(std::span<const TokenId> context) const {
  TokenId best = -1;
  std::size_t best_len = 0;
  bool found = false;
  auto ends_with = [&](const TokenSeq& after, std::span<const TokenId> emitted) {
    const std::size_t len = after.size() + emitted.size();
    if (len > context.size()) return false;
    auto tail = context.last(len);
    return std::equal(after.begin(), after.end(), tail.begin()) &&
           std::equal(emitted.begin(), emitted.end(), tail.begin() + static_cast<std::ptrdiff_t>(after.size()));
  };
  for (const auto& rule : rules_) {
    for (std::size_t k = rule.emit.size(); k-- > 0;) {
      const std::span<const TokenId> emitted(rule.emit.data(), k);
      if (!ends_with(rule.after, emitted)) continue;
      const std::size_t len = rule.after.size() + k;
      if (!found || len > best_len) {
        best = rule.emit[k];
        best_len = len;
        found = true;
      }
      break;
    }
  }
  return best;
}

LogitVector ScriptedLm::next_logits(std::span<const TokenId> context, std::span<const TokenId> want) {
  check_context(context, context_limit());
  const TokenId forced = forced_token(context);
  if (forced < 0) return fallback_.next_logits(context, want);
  LogitVector logits(vocab_->size(), kSuppressed);
  logits[static_cast<std::size_t>(forced)] = kForced;
  return logits;
}

}  // namespace theaitre
