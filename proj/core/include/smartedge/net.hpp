#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "smartedge/protocol.hpp"

namespace smartedge::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const;
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

// "host:port"; throws InvalidConfig.
Endpoint parse_endpoint(std::string_view text);

using Millis = std::chrono::milliseconds;

// Blocking TCP stream carrying protocol frames. Not thread-safe; one
// owner at a time.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd);
  ~Connection();
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Throws ConnectionFailure (refused, unreachable, or timed out).
  static Connection connect(const Endpoint& to, Millis timeout);

  // Sleeps `delay_ms` first: the one-way link delay of this hop.
  void send(const protocol::Message& m, std::string_view secret, double delay_ms = 0.0);
  void send_frame(std::span<const std::uint8_t> frame, double delay_ms = 0.0);

  // Throws Timeout, ConnectionClosed, or the codec's errors.
  protocol::Message receive(std::string_view secret, Millis timeout);
  protocol::Bytes receive_frame(Millis timeout);

  bool is_open() const noexcept { return fd_ >= 0; }
  void close() noexcept;
  std::string peer() const;

  std::uint64_t bytes_sent() const noexcept { return sent_; }
  std::uint64_t bytes_received() const noexcept { return received_; }

 private:
  int fd_ = -1;
  protocol::FrameReader reader_;
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
};

class Listener {
 public:
  Listener() = default;
  ~Listener();
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  // Port 0 picks a free port. Throws BindFailure.
  static Listener bind(const Endpoint& at);

  // Empty on timeout or after close().
  std::optional<Connection> accept(Millis timeout);

  Endpoint local() const { return local_; }
  void close() noexcept;

 private:
  int fd_ = -1;
  Endpoint local_;
};

}  // namespace smartedge::net
