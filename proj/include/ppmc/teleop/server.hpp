#pragma once

#include <memory>
#include <string>

#include "ppmc/teleop/session.hpp"

namespace ppmc::teleop {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::size_t threads = 1;
  double heartbeat_seconds = 1.0;
  double map_spacing = 0.25;  // default heightmap grid spacing, m
  // Outgoing state messages are dropped for a client whose send queue is
  // longer than this; events and errors are always delivered.
  std::size_t max_queued_states = 4096;
};

struct HttpReply {
  unsigned status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Plain HTTP routes, independent of the socket layer:
//   GET    /health
//   GET    /maps/{id}[?spacing=s]   heightmap CSV (x,y,h)
//   POST   /sessions                {map, controller, seed} -> {session, ws}
//   GET    /sessions                list of ids
//   GET    /sessions/{id}           latest state snapshot
//   DELETE /sessions/{id}
HttpReply handle_http(SessionRegistry& sessions, const std::string& method, const std::string& target,
                      const std::string& body, const ServerOptions& options);

// HTTP and WebSocket front end. The WebSocket endpoint is /session/{id}.
class TeleopServer {
 public:
  explicit TeleopServer(ServerOptions options = {});
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  // Binds and starts the I/O threads. Throws if the address is unusable.
  void start();
  unsigned short port() const;
  // Closes all sessions and joins the I/O threads.
  void stop();
  // Blocks until stop() is called from another thread or a signal arrives.
  void wait_for_signal();

  SessionRegistry& sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ppmc::teleop
