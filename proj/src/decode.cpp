#include "theaitre/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "theaitre/error.hpp"
#include "theaitre/kernels.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool has_finite_child(const LogitVector& logits, std::span<const TokenId> children) {
  return std::any_of(children.begin(), children.end(), [&](TokenId t) {
    return static_cast<std::size_t>(t) < logits.size() && std::isfinite(logits[static_cast<std::size_t>(t)]);
  });
}

bool all_children_finite(const LogitVector& logits, std::span<const TokenId> children) {
  return std::all_of(children.begin(), children.end(), [&](TokenId t) {
    return static_cast<std::size_t>(t) < logits.size() && std::isfinite(logits[static_cast<std::size_t>(t)]);
  });
}

}  // namespace

void validate(const SamplerConfig& cfg) {
  if (!cfg.greedy && !(cfg.temperature > 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be > 0");
  if (!(cfg.repetition_penalty >= 1.0)) throw Error(ErrorCode::InvalidConfig, "repetition_penalty must be >= 1");
  if (cfg.max_new_tokens < 1) throw Error(ErrorCode::InvalidConfig, "max_new_tokens must be >= 1");
  if (!(cfg.boost_coefficient >= 0.0)) throw Error(ErrorCode::InvalidConfig, "boost coefficient must be >= 0");
}

SampleRng::SampleRng(std::uint64_t seed, std::uint64_t generation, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(generation >> 32),
                    static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(attempt >> 32)};
  engine_.seed(seq);
}

double SampleRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

// --- CueTrie ------------------------------------------------------------------

CueTrie CueTrie::build(std::span<const CharacterName> characters, LmBackend& backend) {
  if (characters.empty()) throw Error(ErrorCode::NoCharacters, "cue trie needs at least one character");
  CueTrie trie;
  trie.nodes_.emplace_back();
  for (const auto& name : characters) {
    if (std::find(trie.characters_.begin(), trie.characters_.end(), name) != trie.characters_.end()) continue;
    const std::size_t index = trie.characters_.size();
    TokenSeq path = backend.encode(name.str() + ":");
    Node node = kRoot;
    for (TokenId t : path) {
      auto next = trie.child(node, t);
      if (!next) {
        trie.nodes_.emplace_back();
        next = trie.nodes_.size() - 1;
        trie.nodes_[node].edges.emplace_back(t, *next);
      }
      node = *next;
    }
    if (!trie.nodes_[node].character) trie.nodes_[node].character = index;
    trie.characters_.push_back(name);
    trie.paths_.push_back(std::move(path));
  }
  return trie;
}

std::vector<TokenId> CueTrie::children(Node node) const {
  std::vector<TokenId> out;
  for (const auto& [t, _] : nodes_.at(node).edges) out.push_back(t);
  return out;
}

std::optional<CueTrie::Node> CueTrie::child(Node node, TokenId token) const {
  for (const auto& [t, next] : nodes_.at(node).edges) {
    if (t == token) return next;
  }
  return std::nullopt;
}

const CharacterName* CueTrie::terminal(Node node) const {
  const auto& c = nodes_.at(node).character;
  return c ? &characters_[*c] : nullptr;
}

std::size_t CueTrie::max_depth() const noexcept {
  std::size_t depth = 0;
  for (const auto& p : paths_) depth = std::max(depth, p.size());
  return depth;
}

// --- recency ------------------------------------------------------------------

std::size_t SpeakerRecency::get(const CharacterName& name) const {
  auto it = lines_since.find(name);
  return it == lines_since.end() ? 0 : it->second;
}

SpeakerRecency compute_recency(std::span<const ScriptLine> lines, std::span<const CharacterName> characters) {
  SpeakerRecency recency;
  const std::size_t total = lines.size();
  for (const auto& name : characters) recency.lines_since[name] = total + 1;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& line = lines[i];
    if (!line.is_cue()) continue;
    auto it = recency.lines_since.find(*line.speaker);
    if (it != recency.lines_since.end()) it->second = total - 1 - i;
  }
  return recency;
}

// --- logit transforms -----------------------------------------------------------

void apply_repetition_penalty(LogitVector& logits, std::span<const TokenId> context, double penalty) {
  if (penalty == 1.0) return;
  std::vector<std::uint8_t> seen(logits.size(), 0);
  for (TokenId t : context) {
    const auto i = static_cast<std::size_t>(t);
    if (t < 0 || i >= logits.size() || seen[i]) continue;
    seen[i] = 1;
    double& v = logits[i];
    v = v > 0.0 ? v / penalty : v * penalty;
  }
}

void constrain_line_start(LogitVector& logits, const CueTrie& trie, CueTrie::Node node) {
  const auto allowed = trie.children(node);
  if (!has_finite_child(logits, allowed)) {
    throw Error(ErrorCode::ConstraintStarved, "backend returned no finite logit for any allowed cue token");
  }
  std::vector<std::pair<std::size_t, double>> keep;
  for (TokenId t : allowed) {
    const auto i = static_cast<std::size_t>(t);
    if (i < logits.size()) keep.emplace_back(i, logits[i]);
  }
  std::fill(logits.begin(), logits.end(), kNegInf);
  for (const auto& [i, v] : keep) logits[i] = v;
}

void apply_speaker_boost(LogitVector& logits, const CueTrie& trie, const SpeakerRecency& recency, double b) {
  if (b == 0.0) return;
  std::map<TokenId, double> bonus;
  for (std::size_t c = 0; c < trie.characters().size(); ++c) {
    const TokenId first = trie.path(c).front();
    const double value = b * static_cast<double>(recency.get(trie.characters()[c]));
    auto [it, inserted] = bonus.emplace(first, value);
    if (!inserted) it->second = std::max(it->second, value);
  }
  for (const auto& [t, value] : bonus) {
    const auto i = static_cast<std::size_t>(t);
    if (i < logits.size()) logits[i] += value;
  }
}

TokenId sample_token(LogitVector logits, const SamplerConfig& cfg, SampleRng& rng) {
  if (logits.empty()) throw Error(ErrorCode::Protocol, "empty logit vector");
  const auto& k = kernels::active();
  if (cfg.greedy) return static_cast<TokenId>(k.argmax(logits));

  k.scale(logits, 1.0 / cfg.temperature);
  if (cfg.top_k > 0) {
    std::vector<double> finite;
    finite.reserve(logits.size());
    for (double v : logits) {
      if (v != kNegInf) finite.push_back(v);
    }
    if (cfg.top_k < finite.size()) {
      auto nth = finite.begin() + static_cast<std::ptrdiff_t>(cfg.top_k - 1);
      std::nth_element(finite.begin(), nth, finite.end(), std::greater<double>());
      k.mask_below(logits, *nth);
    }
  }
  const double shift = k.max_value(logits);
  if (shift == kNegInf) throw Error(ErrorCode::ConstraintStarved, "every logit is masked");
  std::vector<double> weights(logits.size());
  k.exp_shifted(logits, shift, weights);
  // Index-order sum, matching the scan below.
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

// --- generation loop ------------------------------------------------------------

GeneratedLine generate_line(std::span<const TokenId> context, const CueTrie& trie, const SpeakerRecency& recency,
                            const SamplerConfig& cfg, LmBackend& backend, SampleRng& rng, std::stop_token stop) {
  validate(cfg);
  if (trie.characters().empty()) throw Error(ErrorCode::NoCharacters, "no characters to constrain to");
  if (cfg.max_new_tokens < trie.max_depth()) {
    throw Error(ErrorCode::InvalidConfig, "max_new_tokens is shorter than the longest cue");
  }
  if (context.size() + cfg.max_new_tokens > backend.context_limit()) {
    throw Error(ErrorCode::ContextOverflow, "context of " + std::to_string(context.size()) +
                                                " tokens leaves no room for " + std::to_string(cfg.max_new_tokens) +
                                                " new tokens");
  }

  TokenSeq tokens(context.begin(), context.end());
  GeneratedLine out;
  const CharacterName* speaker = nullptr;
  CueTrie::Node node = CueTrie::kRoot;
  std::size_t utterance_start = 0;
  bool finished = false;
  const TokenId newline = backend.newline_token();

  for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
    if (stop.stop_requested()) throw Error(ErrorCode::Cancelled, "generation cancelled");
    const bool in_cue = speaker == nullptr;
    LogitVector logits = backend.next_logits(tokens);
    apply_repetition_penalty(logits, tokens, cfg.repetition_penalty);
    if (in_cue) {
      const auto allowed = trie.children(node);
      if (!all_children_finite(logits, allowed)) {
        // Truncated remote response: ask again with the cue ids pinned.
        logits = backend.next_logits(tokens, allowed);
        apply_repetition_penalty(logits, tokens, cfg.repetition_penalty);
      }
      constrain_line_start(logits, trie, node);
      if (node == CueTrie::kRoot) apply_speaker_boost(logits, trie, recency, cfg.boost_coefficient);
    }
    const TokenId next = sample_token(std::move(logits), cfg, rng);
    tokens.push_back(next);
    out.tokens.push_back(next);

    if (in_cue) {
      node = *trie.child(node, next);
      if (const auto* name = trie.terminal(node)) {
        speaker = name;
        utterance_start = out.tokens.size();
      }
    } else if (next == newline) {
      finished = true;
      break;
    }
  }

  std::span<const TokenId> utterance(out.tokens);
  utterance = utterance.subspan(utterance_start);
  if (finished) utterance = utterance.first(utterance.size() - 1);
  std::string body(text::trim(backend.decode(utterance)));
  // A multi-line decode can only come from a backend whose tokens embed
  // newlines; keep the first line so the result stays a single cue.
  if (auto nl = body.find('\n'); nl != std::string::npos) body = std::string(text::rtrim(body.substr(0, nl)));
  out.line = ScriptLine::cue(0, *speaker, std::move(body), LineOrigin::Generated);
  out.truncated = !finished;
  return out;
}

GeneratedLine generate_line(std::span<const TokenId> context, std::span<const CharacterName> characters,
                            const SpeakerRecency& recency, const SamplerConfig& cfg, LmBackend& backend,
                            SampleRng& rng) {
  const auto trie = CueTrie::build(characters, backend);
  return generate_line(context, trie, recency, cfg, backend, rng);
}

}  // namespace theaitre
