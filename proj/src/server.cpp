#include "poolgt/server.hpp"

#include "httplib.h"
#include "poolgt/errors.hpp"

namespace poolgt {

int http_status(const Error& e) {
  const std::string& c = e.code();
  if (c == "NOT_FOUND") return 404;
  if (c == "SEQUENCING_ERROR" || c == "SESSION_COMPLETE") return 409;
  if (c == "PERSIST_ERROR") return 500;
  return 400;
}

struct Server::Impl {
  std::shared_ptr<SessionStore> store;
  httplib::Server http;
  int port = -1;

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static Json error_body(const std::string& code, const std::string& message) {
    return Json{{"error", Json{{"code", code}, {"message", message}}}};
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f, const std::string& session = {}) {
    try {
      reply(res, 200, f());
    } catch (const SequencingError& e) {
      Json body = error_body(e.code(), e.what());
      if (!session.empty()) {
        try {
          std::shared_ptr<Session> s = store->get(session);
          std::lock_guard lock(s->mutex());
          if (s->outstanding()) body["error"]["outstanding"] = to_json(*s->outstanding());
        } catch (const Error&) {
        }
      }
      reply(res, http_status(e), body);
    } catch (const Error& e) {
      reply(res, http_status(e), error_body(e.code(), e.what()));
    } catch (const Json::exception& e) {
      reply(res, 400, error_body("PARSE_ERROR", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("INTERNAL", e.what()));
    }
  }

  static Json parse_body(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw ParseError("$", e.what());
    }
  }

  void routes() {
    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, Json{{"status", "ok"}});
    });
    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return store->create_json(parse_body(req)); });
    });
    http.Get(R"(/sessions/([0-9a-f]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, [&] { return store->next_json(id); }, id);
    });
    http.Post(R"(/sessions/([0-9a-f]+)/outcome)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, [&] { return store->outcome_json(id, parse_body(req)); }, id);
    });
    http.Get(R"(/sessions/([0-9a-f]+)/statuses)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, [&] { return store->statuses_json(id); });
    });
    http.Get(R"(/sessions/([0-9a-f]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      guarded(res, [&] { return store->history_json(id); });
    });
    http.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      if (req.method == "OPTIONS") {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) reply(res, res.status, error_body("NOT_FOUND", "no such endpoint"));
    });
  }
};

Server::Server(std::shared_ptr<SessionStore> store) : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->routes();
  // No SO_REUSEPORT: a second server on a busy port must fail to bind.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

Server::~Server() { stop(); }

bool Server::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->http.bind_to_any_port(host);
    return impl_->port > 0;
  }
  if (!impl_->http.bind_to_port(host, port)) return false;
  impl_->port = port;
  return true;
}

int Server::port() const { return impl_->port; }
void Server::listen() { impl_->http.listen_after_bind(); }
void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

}  // namespace poolgt
