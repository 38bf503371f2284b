#include "theaitre/settings.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "theaitre/error.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

namespace {

double parse_double(std::string_view key, std::string_view v) {
  v = text::trim(v);
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a number: '" + std::string(v) + "'");
  }
  return out;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  v = text::trim(v);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a non-negative integer: '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  v = text::trim(v);
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a boolean: '" + std::string(v) + "'");
}

using Setter = std::function<void(GenerationSettings&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"sampler.temperature", [](auto& s, auto k, auto v) { s.sampler.temperature = parse_double(k, v); }},
      {"sampler.top_k", [](auto& s, auto k, auto v) { s.sampler.top_k = parse_size(k, v); }},
      {"sampler.repetition_penalty",
       [](auto& s, auto k, auto v) { s.sampler.repetition_penalty = parse_double(k, v); }},
      {"sampler.max_new_tokens", [](auto& s, auto k, auto v) { s.sampler.max_new_tokens = parse_size(k, v); }},
      {"sampler.boost_coefficient",
       [](auto& s, auto k, auto v) { s.sampler.boost_coefficient = parse_double(k, v); }},
      {"sampler.greedy", [](auto& s, auto k, auto v) { s.sampler.greedy = parse_bool(k, v); }},
      {"budget.M", [](auto& s, auto k, auto v) { s.budget.max_tokens = parse_size(k, v); }},
      {"budget.R", [](auto& s, auto k, auto v) { s.budget.recent_tokens = parse_size(k, v); }},
      {"budget.N", [](auto& s, auto k, auto v) { s.budget.summary_lines = parse_size(k, v); }},
      {"budget.pin_setting", [](auto& s, auto k, auto v) { s.budget.pin_setting = parse_bool(k, v); }},
      {"summarizer.damping", [](auto& s, auto k, auto v) { s.summarizer.damping = parse_double(k, v); }},
      {"summarizer.tolerance", [](auto& s, auto k, auto v) { s.summarizer.tolerance = parse_double(k, v); }},
      {"summarizer.max_iterations",
       [](auto& s, auto k, auto v) { s.summarizer.max_iterations = parse_size(k, v); }},
      {"summarizer.max_phrases", [](auto& s, auto k, auto v) { s.summarizer.max_phrases = parse_size(k, v); }},
      {"retry.max_retries", [](auto& s, auto k, auto v) { s.retry.max_retries = parse_size(k, v); }},
      {"retry.duplicate_window", [](auto& s, auto k, auto v) { s.retry.duplicate_window = parse_size(k, v); }},
      {"mt.source_lang", [](auto& s, auto, auto v) { s.languages.source = std::string(text::trim(v)); }},
      {"mt.target_lang", [](auto& s, auto, auto v) { s.languages.target = std::string(text::trim(v)); }},
  };
  return table;
}

std::string scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return v.dump();
  throw Error(ErrorCode::InvalidConfig, "setting values must be scalars");
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, out);
    } else {
      out.emplace_back(key, scalar_to_string(v));
    }
  }
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : setters()) out.push_back(k);
    return out;
  }();
  return keys;
}

void apply_setting(GenerationSettings& settings, std::string_view key, std::string_view value) {
  auto it = setters().find(text::trim(key));
  if (it == setters().end()) throw Error(ErrorCode::InvalidConfig, "unknown setting '" + std::string(key) + "'");
  it->second(settings, key, value);
}

void validate(const GenerationSettings& settings, std::size_t context_limit) {
  validate(settings.sampler);
  validate(settings.summarizer);
  validate(settings.budget, settings.sampler.max_new_tokens, context_limit);
  if (settings.retry.max_retries < 1) throw Error(ErrorCode::InvalidConfig, "retry.max_retries must be >= 1");
  if (settings.retry.duplicate_window < 1) throw Error(ErrorCode::InvalidConfig, "retry.duplicate_window must be >= 1");
}

nlohmann::json to_json(const GenerationSettings& s) {
  return {
      {"sampler",
       {{"temperature", s.sampler.temperature},
        {"top_k", s.sampler.top_k},
        {"repetition_penalty", s.sampler.repetition_penalty},
        {"max_new_tokens", s.sampler.max_new_tokens},
        {"boost_coefficient", s.sampler.boost_coefficient},
        {"greedy", s.sampler.greedy}}},
      {"budget",
       {{"M", s.budget.max_tokens},
        {"R", s.budget.recent_tokens},
        {"N", s.budget.summary_lines},
        {"pin_setting", s.budget.pin_setting}}},
      {"summarizer",
       {{"damping", s.summarizer.damping},
        {"tolerance", s.summarizer.tolerance},
        {"max_iterations", s.summarizer.max_iterations},
        {"max_phrases", s.summarizer.max_phrases}}},
      {"retry", {{"max_retries", s.retry.max_retries}, {"duplicate_window", s.retry.duplicate_window}}},
      {"mt", {{"source_lang", s.languages.source}, {"target_lang", s.languages.target}}},
  };
}

GenerationSettings settings_from_json(const nlohmann::json& j, GenerationSettings base) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "settings must be a JSON object");
  std::vector<std::pair<std::string, std::string>> pairs;
  flatten(j, "", pairs);
  for (const auto& [k, v] : pairs) apply_setting(base, k, v);
  return base;
}

}  // namespace theaitre
