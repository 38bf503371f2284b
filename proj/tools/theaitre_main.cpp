#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "theaitre/batch.hpp"
#include "theaitre/config.hpp"
#include "theaitre/error.hpp"
#include "theaitre/kernels.hpp"
#include "theaitre/remote.hpp"
#include "theaitre/server.hpp"

namespace {

using namespace theaitre;

struct Flags {
  std::string config_file;
  std::string bind;
  std::string lm_url;
  std::string lm_mock;
  std::string mt_url;
  std::string mt_mock;
  std::string storage;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "key = value file")->envname("THEAITRE_CONFIG");
  cmd->add_option("--lm-url", f.lm_url, "remote logits service")->envname("THEAITRE_LM_URL");
  cmd->add_option("--lm-mock", f.lm_mock, "hash | scripted:FILE")->envname("THEAITRE_LM_MOCK");
  cmd->add_option("--mt-url", f.mt_url, "remote MT service")->envname("THEAITRE_MT_URL");
  cmd->add_option("--mt-mock", f.mt_mock, "identity | reverse")->envname("THEAITRE_MT_MOCK");
  cmd->add_option("--seed", f.seed, "sampling seed")->envname("THEAITRE_SEED");
  cmd->add_option("--set", f.overrides, "key=value override, repeatable");
}

AppConfig resolve(const Flags& f) {
  AppConfig c;
  if (!f.config_file.empty()) load_config_file(c, f.config_file);
  if (!f.bind.empty()) c.bind = f.bind;
  if (!f.lm_url.empty()) c.backends.lm_url = f.lm_url;
  if (!f.lm_mock.empty()) {
    c.backends.lm_mock = f.lm_mock;
    if (f.lm_url.empty()) c.backends.lm_url.clear();
  }
  if (!f.mt_url.empty()) c.backends.mt_url = f.mt_url;
  if (!f.mt_mock.empty()) {
    c.backends.mt_mock = f.mt_mock;
    if (f.mt_url.empty()) c.backends.mt_url.clear();
  }
  if (!f.storage.empty()) c.storage = f.storage;
  if (f.seed) c.seed = f.seed;
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
    apply_config_entry(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HttpServer* g_server = nullptr;
MockHttpService* g_mock = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
  if (g_mock) g_mock->stop();
}

int serve(const Flags& f) {
  const auto config = resolve(f);
  auto manager = std::make_shared<SessionManager>(make_services(config), config.settings, config.seed, config.storage);
  const auto loaded = manager->load_stored();
  const auto [host, port] = parse_bind(config.bind);
  HttpServer server(manager);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "theaitre: serving on " << host << ":" << port << " (kernels " << kernels::active().name << ", "
            << loaded << " stored sessions)\n";
  server.run(host, port);
  return 0;
}

int batch(const Flags& f, const std::string& prompt_file, std::size_t lines, const std::string& out) {
  const auto config = resolve(f);
  const auto prompt = read_file(prompt_file);
  auto services = make_services(config);
  services.clock = logical_clock();
  const auto result = batch_generate(prompt, lines, config.settings, config.seed.value_or(0), services);
  const auto [txt, js] = write_exports(result, out);
  std::cout << txt.string() << "\n" << js.string() << "\n";
  return 0;
}

int mock_lm(const Flags& f, const std::string& bind) {
  auto config = resolve(f);
  config.backends.lm_url.clear();
  auto services = make_services(config);
  MockLmService service(services.lm, config.backends.lm_mock);
  g_mock = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto [host, port] = parse_bind(bind);
  std::cerr << "theaitre: mock LM (" << config.backends.lm_mock << ") on " << host << ":" << port << "\n";
  service.run(host, port);
  return 0;
}

int mock_mt(const Flags& f, const std::string& bind) {
  auto config = resolve(f);
  config.backends.mt_url.clear();
  auto services = make_services(config);
  MockMtService service(services.mt);
  g_mock = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto [host, port] = parse_bind(bind);
  std::cerr << "theaitre: mock MT (" << config.backends.mt_mock << ") on " << host << ":" << port << "\n";
  service.run(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Theatre script generation service"};
  app.require_subcommand(1);
  Flags flags;

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  add_common(serve_cmd, flags);
  serve_cmd->add_option("--bind", flags.bind, "host:port")->envname("THEAITRE_BIND");
  serve_cmd->add_option("--storage", flags.storage, "session storage root")->envname("THEAITRE_STORAGE");

  std::string prompt_file;
  std::size_t n_lines = 10;
  std::string out = "scene";
  auto* batch_cmd = app.add_subcommand("batch", "generate a scene without interaction");
  add_common(batch_cmd, flags);
  batch_cmd->add_option("--prompt", prompt_file, "prompt script file")->required();
  batch_cmd->add_option("--lines", n_lines, "lines to generate");
  batch_cmd->add_option("--out", out, "output prefix; writes PREFIX.txt and PREFIX.json");

  std::string mock_bind = "127.0.0.1:8500";
  auto* lm_cmd = app.add_subcommand("mock-lm", "serve a mock model over the logits protocol");
  add_common(lm_cmd, flags);
  lm_cmd->add_option("--bind", mock_bind, "host:port");

  auto* mt_cmd = app.add_subcommand("mock-mt", "serve a mock translator over the MT protocol");
  add_common(mt_cmd, flags);
  mt_cmd->add_option("--bind", mock_bind, "host:port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve_cmd->parsed()) return serve(flags);
    if (batch_cmd->parsed()) return batch(flags, prompt_file, n_lines, out);
    if (lm_cmd->parsed()) return mock_lm(flags, mock_bind);
    if (mt_cmd->parsed()) return mock_mt(flags, mock_bind);
  } catch (const Error& e) {
    std::cerr << "theaitre: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
