#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "theaitre/script.hpp"

namespace theaitre {

struct SummarizerConfig {
  double damping = 0.85;
  /// Bound on the L1 distance of the returned scores from the fixed point.
  double tolerance = 1e-6;
  std::size_t max_iterations = 100;
  /// Cap on distinct content words considered per line.
  std::size_t max_phrases = 100;

  bool operator==(const SummarizerConfig&) const = default;
};

void validate(const SummarizerConfig& cfg);

/// Fixed stop-word list, one lowercase word per line.
class StopWords {
 public:
  /// The list shipped in data/stopwords.txt, compiled in.
  static const StopWords& builtin();
  static StopWords load(const std::string& path);
  static StopWords parse(std::string_view contents);

  bool contains(std::string_view word) const { return words_.count(std::string(word)) != 0; }
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

struct WordFilter {
  const StopWords* stop_words = &StopWords::builtin();
  /// Folded words of cue names; never counted as content.
  std::set<std::string> names;

  void add_name(const CharacterName& name);
};

/// Distinct folded content words of a line, in order of first occurrence,
/// at most `cap` of them.
std::vector<std::string> content_words(const ScriptLine& line, const WordFilter& filter, std::size_t cap);

/// |shared| / (log|A| + log|B|) over content-word sets, falling back to
/// |shared| / (|A| + |B|) when either set has at most one word.
double set_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Excludes both lines' speaker names and the built-in stop words.
double line_similarity(const ScriptLine& a, const ScriptLine& b, std::size_t max_phrases = 100);

/// Dense symmetric weight matrix with zero diagonal.
class LineGraph {
 public:
  explicit LineGraph(std::size_t nodes) : n_(nodes), w_(nodes * nodes, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double weight(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  /// Sets w(i,j) = w(j,i). Self-loops and negative weights are rejected.
  void set_weight(std::size_t i, std::size_t j, double w);

 private:
  std::size_t n_;
  std::vector<double> w_;
};

struct RankResult {
  std::vector<double> scores;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Weighted PageRank, S(i) = (1-d) + d * sum_j w(j,i) / out(j) * S(j),
/// iterated from all ones.
RankResult pagerank(const LineGraph& graph, const SummarizerConfig& cfg);

/// Positions (into `lines`) of the n top-ranked lines, ascending.
std::vector<std::size_t> textrank_indices(const std::vector<ScriptLine>& lines, std::size_t n,
                                          const SummarizerConfig& cfg);

/// The n top-ranked lines in original order; all lines when |lines| <= n.
std::vector<ScriptLine> textrank_select(const std::vector<ScriptLine>& lines, std::size_t n,
                                        const SummarizerConfig& cfg);

}  // namespace theaitre
