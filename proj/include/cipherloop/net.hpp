#pragma once

// Blocking frame transport over one TCP connection (Boost.Asio), with an
// optional receive deadline.

#include <boost/asio.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "cipherloop/error.hpp"
#include "cipherloop/wire.hpp"

namespace cipherloop::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses "host:port".
inline Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ConfigError("address '" + std::string(text) + "' must look like host:port");
  }
  Endpoint e;
  e.host = std::string(text.substr(0, colon));
  const auto port_text = std::string(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(port_text, &used);
    if (used != port_text.size() || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::logic_error&) {
    throw ConfigError("invalid port in address '" + std::string(text) + "'");
  }
  return e;
}

inline tcp::endpoint resolve(asio::io_context& io, const Endpoint& e) {
  boost::system::error_code ec;
  tcp::resolver resolver(io);
  const auto results = resolver.resolve(e.host, std::to_string(e.port), ec);
  if (ec || results.empty()) throw IoError("cannot resolve " + e.to_string() + ": " + ec.message());
  return *results.begin();
}

/// One connected peer. Owns its socket and I/O context.
class Channel {
 public:
  Channel(std::unique_ptr<asio::io_context> io, tcp::socket socket) : io_(std::move(io)), socket_(std::move(socket)) {
    socket_.set_option(tcp::no_delay(true));
  }

  Channel(Channel&&) = default;
  Channel& operator=(Channel&&) = default;

  void send(const wire::Frame& frame) {
    const auto bytes = wire::encode_frame(frame);
    boost::system::error_code ec;
    asio::write(socket_, asio::buffer(bytes), ec);
    if (ec) throw IoError("send failed: " + ec.message());
  }

  /// Next frame, or nullopt if none completed before the timeout.
  std::optional<wire::Frame> receive(std::optional<std::chrono::microseconds> timeout = std::nullopt) {
    const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout) : std::nullopt;
    for (;;) {
      if (auto frame = assembler_.next()) return frame;
      std::size_t got = 0;
      boost::system::error_code ec;
      if (!deadline) {
        got = socket_.read_some(asio::buffer(chunk_), ec);
      } else {
        if (std::chrono::steady_clock::now() >= *deadline) return std::nullopt;
        bool done = false;
        socket_.async_read_some(asio::buffer(chunk_), [&](const boost::system::error_code& e, std::size_t n) {
          ec = e;
          got = n;
          done = true;
        });
        io_->restart();
        io_->run_until(*deadline);
        if (!done) {
          socket_.cancel();
          io_->restart();
          io_->run();
        }
        if (ec == asio::error::operation_aborted) {
          if (got == 0) return std::nullopt;
          ec.clear();
        }
      }
      if (ec == asio::error::eof) throw IoError("peer closed the connection");
      if (ec) throw IoError("receive failed: " + ec.message());
      assembler_.append(std::span(chunk_.data(), got));
    }
  }

  void close() noexcept {
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

 private:
  std::unique_ptr<asio::io_context> io_;
  tcp::socket socket_;
  wire::FrameAssembler assembler_;
  std::array<std::uint8_t, 64 * 1024> chunk_{};
};

/// Listening socket; port 0 picks an ephemeral port.
class Listener {
 public:
  explicit Listener(const Endpoint& where) : io_(std::make_unique<asio::io_context>()), acceptor_(*io_) {
    const tcp::endpoint ep = resolve(*io_, where);
    boost::system::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(1, ec);
    if (ec) throw IoError("cannot listen on " + where.to_string() + ": " + ec.message());
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  Channel accept() {
    auto io = std::make_unique<asio::io_context>();
    tcp::socket socket(*io);
    boost::system::error_code ec;
    acceptor_.accept(socket, ec);
    if (ec) throw IoError("accept failed: " + ec.message());
    return Channel(std::move(io), std::move(socket));
  }

 private:
  std::unique_ptr<asio::io_context> io_;
  tcp::acceptor acceptor_;
};

/// Connects, retrying until the peer is listening or the timeout passes.
inline Channel connect(const Endpoint& peer, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  auto io = std::make_unique<asio::io_context>();
  const tcp::endpoint ep = resolve(*io, peer);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  boost::system::error_code ec;
  for (;;) {
    tcp::socket socket(*io);
    socket.connect(ep, ec);
    if (!ec) return Channel(std::move(io), std::move(socket));
    if (std::chrono::steady_clock::now() >= deadline) {
      throw IoError("cannot connect to " + peer.to_string() + ": " + ec.message());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace cipherloop::net
