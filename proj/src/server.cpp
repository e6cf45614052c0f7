#include "vmscope/server.hpp"

#include <condition_variable>
#include <iostream>
#include <list>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace vmscope {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct StreamingServer::Impl {
  explicit Impl(ProtocolOptions options) : handler(std::move(options)) {}

  ProtocolHandler handler;
  asio::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;

  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool running = false;
  std::list<std::shared_ptr<tcp::socket>> sockets;
  std::list<std::thread> connections;

  void accept_loop() {
    while (true) {
      auto socket = std::make_shared<tcp::socket>(ioc);
      beast::error_code ec;
      acceptor->accept(*socket, ec);
      std::lock_guard lock(mutex);
      if (!running) return;
      if (ec) continue;
      sockets.push_back(socket);
      connections.emplace_back([this, socket] { serve(socket); });
    }
  }

  void serve(const std::shared_ptr<tcp::socket>& socket) {
    try {
      websocket::stream<tcp::socket&> ws(*socket);
      ws.read_message_max(256u << 20);
      ws.accept();
      beast::flat_buffer buffer;
      while (true) {
        buffer.clear();
        ws.read(buffer);
        const std::string reply = handler.handle_text(beast::buffers_to_string(buffer.data()));
        ws.text(true);
        ws.write(asio::buffer(reply));
      }
    } catch (const beast::system_error& e) {
      if (e.code() != websocket::error::closed && e.code() != asio::error::eof) {
        std::lock_guard lock(mutex);
        if (running) std::clog << "vmscope: connection ended: " << e.code().message() << "\n";
      }
    } catch (const std::exception& e) {
      std::clog << "vmscope: connection failed: " << e.what() << "\n";
    }
  }
};

StreamingServer::StreamingServer(ProtocolOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

StreamingServer::~StreamingServer() { stop(); }

ProtocolHandler& StreamingServer::handler() { return impl_->handler; }

std::uint16_t StreamingServer::start(std::uint16_t port, const std::string& address) {
  std::lock_guard lock(impl_->mutex);
  if (impl_->running) throw Error(ErrorCode::InvalidArgument, "server already running");
  try {
    const tcp::endpoint endpoint(asio::ip::make_address(address), port);
    impl_->acceptor = std::make_unique<tcp::acceptor>(impl_->ioc);
    impl_->acceptor->open(endpoint.protocol());
    impl_->acceptor->set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor->bind(endpoint);
    impl_->acceptor->listen();
  } catch (const boost::system::system_error& e) {
    impl_->acceptor.reset();
    throw Error(ErrorCode::IoError, std::string("cannot listen: ") + e.what());
  }
  impl_->running = true;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
  return impl_->acceptor->local_endpoint().port();
}

void StreamingServer::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return !impl_->running; });
}

void StreamingServer::stop() {
  tcp::endpoint local;
  {
    std::lock_guard lock(impl_->mutex);
    if (!impl_->running) return;
    impl_->running = false;
    local = impl_->acceptor->local_endpoint();
  }
  impl_->stopped_cv.notify_all();
  // a blocking accept only returns on a connection, so make one
  {
    beast::error_code ec;
    tcp::socket poke(impl_->ioc);
    poke.connect({local.address().is_unspecified() ? asio::ip::make_address("127.0.0.1") : local.address(), local.port()}, ec);
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  }
  std::list<std::thread> connections;
  {
    std::lock_guard lock(impl_->mutex);
    beast::error_code ec;
    impl_->acceptor->close(ec);
    for (auto& s : impl_->sockets) {
      s->shutdown(tcp::socket::shutdown_both, ec);
      s->close(ec);
    }
    connections.swap(impl_->connections);
  }
  for (auto& t : connections) t.join();
  impl_->sockets.clear();
}

}  // namespace vmscope
