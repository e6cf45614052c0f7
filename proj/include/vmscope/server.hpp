#pragma once

#include <cstdint>
#include <memory>

#include "vmscope/protocol.hpp"

namespace vmscope {

/// WebSocket transport for ProtocolHandler. Each text message is one JSON
/// request; replies go back on the same connection in request order.
class StreamingServer {
 public:
  explicit StreamingServer(ProtocolOptions options = {});
  ~StreamingServer();

  StreamingServer(const StreamingServer&) = delete;
  StreamingServer& operator=(const StreamingServer&) = delete;

  /// Binds 127.0.0.1:port (0 picks a free port) and starts accepting in the
  /// background. Returns the bound port.
  std::uint16_t start(std::uint16_t port, const std::string& address = "127.0.0.1");
  /// Blocks until stop() is called from another thread.
  void wait();
  void stop();

  ProtocolHandler& handler();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vmscope
