#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stop_token>
#include <vector>

#include "theaitre/lm_backend.hpp"
#include "theaitre/script.hpp"

namespace theaitre {

struct SamplerConfig {
  double temperature = 0.9;
  std::size_t top_k = 50;  // 0 disables
  double repetition_penalty = 1.01;
  std::size_t max_new_tokens = 100;
  /// Additive logit bonus per line of silence, applied at a cue's first token.
  double boost_coefficient = 0.1;
  /// Argmax instead of sampling; temperature and top_k are then ignored.
  bool greedy = false;

  bool operator==(const SamplerConfig&) const = default;
};

/// Throws Error(InvalidConfig) on out-of-range knobs.
void validate(const SamplerConfig& cfg);

/// Counter-based sampling stream: the same (seed, generation, attempt)
/// triple always yields the same draws.
class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::uint64_t generation, std::uint64_t attempt);
  explicit SampleRng(std::uint64_t seed) : SampleRng(seed, 0, 0) {}

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// Prefix tree over the tokenized `NAME:` cue of every allowed character.
class CueTrie {
 public:
  using Node = std::size_t;
  static constexpr Node kRoot = 0;

  CueTrie() = default;

  /// Throws Error(NoCharacters) for an empty list.
  static CueTrie build(std::span<const CharacterName> characters, LmBackend& backend);

  std::vector<TokenId> children(Node node) const;
  std::optional<Node> child(Node node, TokenId token) const;
  /// Character whose cue ends at `node`, if any.
  const CharacterName* terminal(Node node) const;

  const std::vector<CharacterName>& characters() const noexcept { return characters_; }
  const TokenSeq& path(std::size_t character_index) const { return paths_.at(character_index); }
  std::size_t max_depth() const noexcept;
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct NodeData {
    std::vector<std::pair<TokenId, Node>> edges;
    std::optional<std::size_t> character;
  };

  std::vector<NodeData> nodes_;
  std::vector<CharacterName> characters_;
  std::vector<TokenSeq> paths_;
};

struct SpeakerRecency {
  /// Lines since the character last spoke: 0 when they spoke the latest
  /// line; script length + 1 when they never spoke.
  std::map<CharacterName, std::size_t> lines_since;

  std::size_t get(const CharacterName& name) const;
  bool operator==(const SpeakerRecency&) const = default;
};

SpeakerRecency compute_recency(std::span<const ScriptLine> lines, std::span<const CharacterName> characters);

/// Positive logits of ids present in `context` are divided by `penalty`,
/// the rest multiplied. penalty == 1 leaves the vector untouched.
void apply_repetition_penalty(LogitVector& logits, std::span<const TokenId> context, double penalty);

/// Every id that is not a child of `node` becomes -inf. Throws
/// Error(ConstraintStarved) when no child keeps a finite logit.
void constrain_line_start(LogitVector& logits, const CueTrie& trie, CueTrie::Node node);

/// For each character, the first token of its cue gains b * lines_since;
/// characters sharing a first token contribute the largest bonus.
void apply_speaker_boost(LogitVector& logits, const CueTrie& trie, const SpeakerRecency& recency, double b);

/// Temperature, top-k, softmax and one draw. Greedy mode returns the argmax.
TokenId sample_token(LogitVector logits, const SamplerConfig& cfg, SampleRng& rng);

struct GeneratedLine {
  ScriptLine line;  // cue line, origin Generated, id 0 (assigned by the caller)
  bool truncated = false;
  TokenSeq tokens;  // everything sampled, cue included
};

/// Samples one line starting right after the last token of `context`.
GeneratedLine generate_line(std::span<const TokenId> context, const CueTrie& trie, const SpeakerRecency& recency,
                            const SamplerConfig& cfg, LmBackend& backend, SampleRng& rng,
                            std::stop_token stop = {});

GeneratedLine generate_line(std::span<const TokenId> context, std::span<const CharacterName> characters,
                            const SpeakerRecency& recency, const SamplerConfig& cfg, LmBackend& backend,
                            SampleRng& rng);

}  // namespace theaitre
