#include "theaitre/server.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <json.hpp>

#include "theaitre/kernels.hpp"

namespace theaitre {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyScript:
    case ErrorCode::InvalidText:
    case ErrorCode::InvalidToken:
    case ErrorCode::InvalidContext:
    case ErrorCode::NoCharacters:
    case ErrorCode::InvalidConfig:
    case ErrorCode::Protocol:
      return 400;
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownLine:
      return 404;
    case ErrorCode::PromptLineImmutable:
    case ErrorCode::Busy:
    case ErrorCode::Cancelled:
      return 409;
    case ErrorCode::DuplicateExhausted:
      return 422;
    case ErrorCode::ConstraintStarved:
      return 502;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::TranslationUnavailable:
      return 503;
    case ErrorCode::ContextOverflow:
    case ErrorCode::Storage:
      return 500;
  }
  return 500;
}

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  json body = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (e.attempts() > 0) body["attempts"] = e.attempts();
  if (auto ra = e.retry_after()) {
    const auto secs = std::max<long long>(1, (ra->count() + 999) / 1000);
    res.set_header("Retry-After", std::to_string(secs));
    body["retry_after_ms"] = ra->count();
  }
  send(res, http_status(e.code()), body);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::Protocol, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("malformed JSON: ") + e.what());
  }
}

template <typename F>
httplib::Server::Handler handler(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::Protocol, e.what()));
    } catch (const std::exception& e) {
      send(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

LineId parse_line_id(const std::string& s) {
  LineId out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorCode::UnknownLine, "no line '" + s + "'");
  return out;
}

json line_json(const ScriptLine& l) {
  return {{"id", l.id},
          {"kind", to_string(l.kind)},
          {"speaker", l.speaker ? json(l.speaker->str()) : json(nullptr)},
          {"text", l.text},
          {"origin", to_string(l.origin)},
          {"rendered", render_line(l)}};
}

json translation_json(const SessionState& s, LineId id) {
  auto it = s.translations.find(id);
  if (it == s.translations.end()) return nullptr;
  return {{"target_cue", it->second.target_cue ? json(*it->second.target_cue) : json(nullptr)},
          {"target_text", it->second.target_text},
          {"rendered", it->second.rendered()},
          {"status", it->second.status == TranslationStatus::Ok ? "ok" : "unavailable"}};
}

json session_view(const Session& session) {
  const auto state = session.snapshot();
  json j = to_json(state);
  j["id"] = state.id;
  j["allowed_characters"] = j["characters"];
  return j;
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<SessionManager> manager)
    : manager_(std::move(manager)), impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  auto* mgr = manager_.get();

  srv.Get("/healthz", handler([mgr](const httplib::Request&, httplib::Response& res) {
            const auto lm = mgr->services().lm->health();
            const bool mt = mgr->services().mt->healthy();
            send(res, lm.reachable ? 200 : 503,
                 {{"status", lm.reachable ? (mt ? "ok" : "degraded") : "unavailable"},
                  {"lm", {{"reachable", lm.reachable}, {"model", lm.model}, {"detail", lm.detail}}},
                  {"mt", {{"reachable", mt}}},
                  {"kernels", kernels::active().name},
                  {"sessions", mgr->ids().size()}});
          }));

  srv.Get("/sessions", handler([mgr](const httplib::Request&, httplib::Response& res) {
            send(res, 200, {{"sessions", mgr->ids()}});
          }));

  srv.Post("/sessions", handler([mgr](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             if (!body.contains("prompt") || !body.at("prompt").is_string()) {
               throw Error(ErrorCode::EmptyScript, "'prompt' must be a string");
             }
             CreateRequest cr;
             cr.prompt = body.at("prompt").get<std::string>();
             cr.config = body.value("config", json::object());
             if (body.contains("seed") && !body.at("seed").is_null()) cr.seed = body.at("seed").get<std::uint64_t>();
             if (body.contains("names")) {
               for (const auto& [k, v] : body.at("names").items()) {
                 auto name = CharacterName::try_make(k);
                 if (!name) throw Error(ErrorCode::InvalidText, "invalid character name '" + k + "'");
                 cr.names[*name] = v.get<std::string>();
               }
             }
             auto session = mgr->create(cr);
             send(res, 201, {{"id", session->id()}});
           }));

  srv.Get(R"(/sessions/([A-Za-z0-9_-]+))", handler([mgr](const httplib::Request& req, httplib::Response& res) {
            send(res, 200, session_view(*mgr->get(req.matches[1])));
          }));

  srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/generate)",
           handler([mgr](const httplib::Request& req, httplib::Response& res) {
             auto session = mgr->get(req.matches[1]);
             const auto line = session->generate_next();
             const auto state = session->snapshot();
             send(res, 200, {{"line", line_json(line)}, {"translation", translation_json(state, line.id)}});
           }));

  srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/cancel)", handler([mgr](const httplib::Request& req, httplib::Response& res) {
             send(res, 200, {{"cancelled", mgr->get(req.matches[1])->cancel()}});
           }));

  srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/lines)", handler([mgr](const httplib::Request& req, httplib::Response& res) {
             auto session = mgr->get(req.matches[1]);
             const auto body = parse_body(req);
             const auto line =
                 session->insert_manual(body.value("speaker", std::string{}), body.value("text", std::string{}));
             const auto state = session->snapshot();
             send(res, 201, {{"line", line_json(line)}, {"translation", translation_json(state, line.id)}});
           }));

  srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/lines/([^/]+)/discard)",
           handler([mgr](const httplib::Request& req, httplib::Response& res) {
             auto session = mgr->get(req.matches[1]);
             session->discard_from(parse_line_id(req.matches[2]));
             send(res, 200, session_view(*session));
           }));

  srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/names)", handler([mgr](const httplib::Request& req, httplib::Response& res) {
             auto session = mgr->get(req.matches[1]);
             const auto body = parse_body(req);
             auto name = CharacterName::try_make(body.value("speaker", std::string{}));
             if (!name) throw Error(ErrorCode::InvalidText, "invalid speaker name");
             session->set_name(*name, body.value("target", std::string{}));
             send(res, 200, session_view(*session));
           }));

  srv.Get(R"(/sessions/([A-Za-z0-9_-]+)/export)", handler([mgr](const httplib::Request& req, httplib::Response& res) {
            auto session = mgr->get(req.matches[1]);
            const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("plain");
            if (format == "plain") {
              res.status = 200;
              res.set_content(session->export_plain(), "text/plain; charset=utf-8");
            } else if (format == "structured") {
              res.status = 200;
              res.set_content(session->export_structured().dump(2), "application/json");
            } else {
              throw Error(ErrorCode::InvalidConfig, "format must be plain or structured");
            }
          }));
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorCode::InvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
}

void HttpServer::start(const std::string& host, int port) {
  bind(host, port);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::run(const std::string& host, int port) {
  bind(host, port);
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace theaitre
