#pragma once

// WebSocket endpoint for operator clients. Runs its own I/O thread; the
// control loop only touches the TelemetryBuffer and the CommandQueue.

#include "bolting/gateway.hpp"

#include <functional>
#include <memory>
#include <string>

namespace bolting {

class WsServer {
 public:
  /// Binds 127.0.0.1:`port` (0 picks a free port) and starts serving.
  /// `hello` is sent to every client right after the handshake.
  WsServer(unsigned short port, TelemetryBuffer& telemetry, CommandQueue& commands,
           std::string hello, std::function<void(const std::string&)> log = {});
  ~WsServer();

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  unsigned short port() const;
  std::size_t client_count() const;
  /// Closes every session and joins the I/O thread. Idempotent.
  void stop();

  struct Impl;  // defined in ws_server.cpp

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace bolting
