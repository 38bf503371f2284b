#include "theaitre/config.hpp"

#include <charconv>
#include <fstream>

#include "theaitre/error.hpp"
#include "theaitre/remote.hpp"
#include "theaitre/text.hpp"

namespace theaitre {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  v = text::trim(v);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": bad value '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace

void apply_config_entry(AppConfig& c, std::string_view key, std::string_view value) {
  key = text::trim(key);
  const std::string v(text::trim(value));
  auto& b = c.backends;
  if (key == "lm.url") {
    b.lm_url = v;
  } else if (key == "lm.mock") {
    b.lm_mock = v;
  } else if (key == "lm.top_k") {
    b.lm_top_k = parse_number<std::size_t>(key, v);
  } else if (key == "lm.timeout_ms") {
    b.lm_timeout_ms = parse_number<long>(key, v);
  } else if (key == "lm.max_attempts") {
    b.lm_max_attempts = parse_number<int>(key, v);
  } else if (key == "lm.context_limit") {
    b.lm_context_limit = parse_number<std::size_t>(key, v);
  } else if (key == "lm.newline_bias") {
    b.lm_newline_bias = parse_number<double>(key, v);
  } else if (key == "mt.url") {
    b.mt_url = v;
  } else if (key == "mt.mock") {
    b.mt_mock = v;
  } else if (key == "mt.timeout_ms") {
    b.mt_timeout_ms = parse_number<long>(key, v);
  } else if (key == "server.bind") {
    c.bind = v;
  } else if (key == "server.storage") {
    c.storage = v;
  } else if (key == "server.seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else {
    apply_setting(c.settings, key, v);
  }
}

void load_config_file(AppConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(n) + ": expected key = value");
    }
    try {
      apply_config_entry(config, t.substr(0, eq), t.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

std::pair<std::string, int> parse_bind(std::string_view bind) {
  bind = text::trim(bind);
  std::string host = "127.0.0.1";
  std::string_view port = bind;
  if (const auto colon = bind.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) host = std::string(bind.substr(0, colon));
    port = bind.substr(colon + 1);
  }
  const int p = parse_number<int>("bind", port);
  if (p < 0 || p > 65535) throw Error(ErrorCode::InvalidConfig, "port out of range");
  return {host, p};
}

SessionServices make_services(const AppConfig& config) {
  const auto& b = config.backends;
  SessionServices s;
  if (!b.lm_url.empty()) {
    RemoteLmConfig rc;
    rc.url = b.lm_url;
    rc.timeout = std::chrono::milliseconds(b.lm_timeout_ms);
    rc.top_k = b.lm_top_k;
    rc.context_limit = b.lm_context_limit;
    rc.max_attempts = b.lm_max_attempts;
    s.lm = std::make_shared<RemoteLm>(rc);
  } else {
    HashLmConfig hc;
    hc.context_limit = b.lm_context_limit;
    hc.newline_bias = b.lm_newline_bias;
    auto lexicon = default_mock_lexicon();
    auto vocab = std::make_shared<WhitespaceVocab>(lexicon);
    if (b.lm_mock == "hash") {
      s.lm = std::make_shared<HashLm>(vocab, hc);
    } else if (b.lm_mock.starts_with("scripted:")) {
      s.lm = std::make_shared<ScriptedLm>(vocab, ScriptedLm::load_rules(b.lm_mock.substr(9)), hc);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown LM mock '" + b.lm_mock + "' (hash | scripted:FILE)");
    }
  }
  if (!b.mt_url.empty()) {
    RemoteMtConfig mc;
    mc.url = b.mt_url;
    mc.timeout = std::chrono::milliseconds(b.mt_timeout_ms);
    s.mt = std::make_shared<RemoteMt>(mc);
  } else if (b.mt_mock == "identity") {
    s.mt = std::make_shared<IdentityMt>();
  } else if (b.mt_mock == "reverse") {
    s.mt = std::make_shared<ReverseMt>();
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown MT mock '" + b.mt_mock + "' (identity | reverse)");
  }
  s.clock = system_clock_ms();
  return s;
}

}  // namespace theaitre
