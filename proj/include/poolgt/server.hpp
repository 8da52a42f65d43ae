#pragma once

#include <functional>
#include <memory>
#include <string>

#include "poolgt/errors.hpp"
#include "poolgt/session.hpp"

namespace poolgt {

// HTTP front end over a SessionStore.
//
//   POST /sessions                 create; body {risk, roster, urgent?, strategy?}
//   GET  /sessions/{id}/next       {"complete":false,"instruction":{...}} or {"complete":true}
//   POST /sessions/{id}/outcome    body {"instruction_id":n,"outcome":"+"|"-"}
//   GET  /sessions/{id}/statuses
//   GET  /sessions/{id}/history
//   GET  /health
//
// Errors answer {"error":{"code":..., "message":...}}.
class Server {
 public:
  explicit Server(std::shared_ptr<SessionStore> store);
  ~Server();

  // Binds host:port (port 0 picks a free one); false when the bind fails.
  bool bind(const std::string& host, int port);
  int port() const;
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int http_status(const Error& e);

}  // namespace poolgt
