#include "theaitre/summarize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stopwords_data.hpp"
#include "theaitre/error.hpp"
#include "theaitre/kernels.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

void validate(const SummarizerConfig& cfg) {
  if (!(cfg.damping > 0.0 && cfg.damping < 1.0)) throw Error(ErrorCode::InvalidConfig, "damping must be in (0,1)");
  if (!(cfg.tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "tolerance must be > 0");
  if (cfg.max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
  if (cfg.max_phrases < 1) throw Error(ErrorCode::InvalidConfig, "max_phrases must be >= 1");
}

// --- stop words -------------------------------------------------------------------

StopWords StopWords::parse(std::string_view contents) {
  StopWords out;
  for (auto line : text::split_lines(contents)) {
    auto word = text::trim(line);
    if (!word.empty() && word.front() != '#') out.words_.insert(text::fold_word(word));
  }
  return out;
}

StopWords StopWords::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open stop-word list " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const StopWords& StopWords::builtin() {
  static const StopWords words = parse(detail::kStopWordsData);
  return words;
}

void WordFilter::add_name(const CharacterName& name) {
  for (auto piece : text::split_words(name.str())) {
    auto folded = text::fold_word(piece);
    if (!folded.empty()) names.insert(std::move(folded));
  }
}

// --- similarity ---------------------------------------------------------------------

std::vector<std::string> content_words(const ScriptLine& line, const WordFilter& filter, std::size_t cap) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto raw : text::split_words(line.text)) {
    if (out.size() >= cap) break;
    auto word = text::fold_word(raw);
    if (word.empty() || filter.stop_words->contains(word) || filter.names.count(word)) continue;
    if (seen.insert(word).second) out.push_back(std::move(word));
  }
  return out;
}

double set_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<std::string> shared;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(shared));
  const auto common = static_cast<double>(shared.size());
  if (common == 0.0) return 0.0;
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  const double denom = (a.size() <= 1 || b.size() <= 1) ? 0.0 : std::log(na) + std::log(nb);
  if (denom <= 0.0) return common / (na + nb);
  return common / denom;
}

double line_similarity(const ScriptLine& a, const ScriptLine& b, std::size_t max_phrases) {
  WordFilter filter;
  if (a.speaker) filter.add_name(*a.speaker);
  if (b.speaker) filter.add_name(*b.speaker);
  return set_similarity(content_words(a, filter, max_phrases), content_words(b, filter, max_phrases));
}

// --- graph ranking -------------------------------------------------------------------

void LineGraph::set_weight(std::size_t i, std::size_t j, double w) {
  if (i >= n_ || j >= n_) throw Error(ErrorCode::InvalidConfig, "graph node out of range");
  if (i == j) throw Error(ErrorCode::InvalidConfig, "self-loops are not allowed");
  if (!(w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "edge weights must be >= 0");
  w_[i * n_ + j] = w;
  w_[j * n_ + i] = w;
}

RankResult pagerank(const LineGraph& graph, const SummarizerConfig& cfg) {
  validate(cfg);
  const std::size_t n = graph.size();
  RankResult result;
  result.scores.assign(n, 1.0);
  if (n == 0) {
    result.converged = true;
    return result;
  }

  // transition(i, j) = w(j,i) / out(j), row-major so each update is a dot.
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) out[j] += graph.weight(j, k);
  }
  std::vector<double> transition(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (out[j] > 0.0) transition[i * n + j] = graph.weight(j, i) / out[j];
    }
  }

  const auto& k = kernels::active();
  const double d = cfg.damping;
  // The update contracts by d in L1, so ||S - S*||_1 <= d/(1-d) * ||step||_1.
  const double step_bound = cfg.tolerance * (1.0 - d) / d;
  std::vector<double> next(n);
  const std::span<const double> rows(transition);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = (1.0 - d) + d * k.dot(rows.subspan(i * n, n), result.scores);
      change += std::abs(next[i] - result.scores[i]);
    }
    result.scores.swap(next);
    result.iterations = it + 1;
    if (change < step_bound) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<std::size_t> textrank_indices(const std::vector<ScriptLine>& lines, std::size_t n,
                                          const SummarizerConfig& cfg) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "summary length must be >= 1");
  std::vector<std::size_t> order(lines.size());
  std::iota(order.begin(), order.end(), 0);
  if (lines.size() <= n) return order;

  WordFilter filter;
  for (const auto& line : lines) {
    if (line.speaker) filter.add_name(*line.speaker);
  }
  std::vector<std::vector<std::string>> words;
  words.reserve(lines.size());
  for (const auto& line : lines) words.push_back(content_words(line, filter, cfg.max_phrases));

  LineGraph graph(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const double w = set_similarity(words[i], words[j]);
      if (w > 0.0) graph.set_weight(i, j, w);
    }
  }
  const auto scores = pagerank(graph, cfg).scores;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<ScriptLine> textrank_select(const std::vector<ScriptLine>& lines, std::size_t n,
                                        const SummarizerConfig& cfg) {
  std::vector<ScriptLine> out;
  for (auto i : textrank_indices(lines, n, cfg)) out.push_back(lines[i]);
  return out;
}

}  // namespace theaitre
