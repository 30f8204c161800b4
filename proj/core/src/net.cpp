#include "smartedge/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "smartedge/error.hpp"

namespace smartedge::net {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  const std::string host = e.host == "localhost" || e.host.empty() ? "127.0.0.1" : e.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &found) != 0 || !found) {
    throw Error(ErrorCode::ConnectionFailure, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(found->ai_addr)->sin_addr;
  ::freeaddrinfo(found);
  return addr;
}

int wait_for(int fd, short events, Clock::time_point deadline) {
  for (;;) {
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    pollfd p{fd, events, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::max<long long>(left, 0)));
    if (rc < 0 && errno == EINTR) continue;
    return rc;
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void sleep_ms(double ms) {
  if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::InvalidConfig, "address '" + std::string(text) + "' is not host:port");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
    throw Error(ErrorCode::InvalidConfig, "bad port in '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Connection::Connection(int fd) : fd_(fd) { set_nodelay(fd_); }

Connection::~Connection() { close(); }

Connection::Connection(Connection&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      reader_(std::move(other.reader_)),
      sent_(other.sent_),
      received_(other.received_) {}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
    reader_ = std::move(other.reader_);
    sent_ = other.sent_;
    received_ = other.received_;
  }
  return *this;
}

Connection Connection::connect(const Endpoint& to, Millis timeout) {
  const sockaddr_in addr = resolve(to);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorCode::ConnectionFailure, "socket: " + errno_text());
  Connection conn(fd);

  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    if (errno != EINPROGRESS) {
      throw Error(ErrorCode::ConnectionFailure, to.to_string() + ": " + errno_text());
    }
    if (wait_for(fd, POLLOUT, Clock::now() + timeout) <= 0) {
      throw Error(ErrorCode::ConnectionFailure, to.to_string() + ": connect timed out");
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw Error(ErrorCode::ConnectionFailure, to.to_string() + ": " + std::strerror(err));
    }
  }
  ::fcntl(fd, F_SETFL, flags);
  return conn;
}

void Connection::send(const protocol::Message& m, std::string_view secret, double delay_ms) {
  send_frame(protocol::encode(m, secret), delay_ms);
}

void Connection::send_frame(std::span<const std::uint8_t> frame, double delay_ms) {
  if (fd_ < 0) throw Error(ErrorCode::ConnectionClosed, "send on a closed connection");
  sleep_ms(delay_ms);
  std::size_t done = 0;
  while (done < frame.size()) {
    const ssize_t n = ::send(fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ConnectionClosed, "send: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
  sent_ += frame.size();
}

protocol::Bytes Connection::receive_frame(Millis timeout) {
  if (fd_ < 0) throw Error(ErrorCode::ConnectionClosed, "receive on a closed connection");
  const auto deadline = Clock::now() + timeout;
  std::uint8_t chunk[64 * 1024];
  for (;;) {
    if (auto frame = reader_.next_frame()) return std::move(*frame);
    const int rc = wait_for(fd_, POLLIN, deadline);
    if (rc < 0) throw Error(ErrorCode::ConnectionClosed, "poll: " + errno_text());
    if (rc == 0) {
      throw Error(ErrorCode::Timeout,
                  "no frame from " + peer() + " within " + std::to_string(timeout.count()) + " ms");
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ConnectionClosed, "recv: " + errno_text());
    }
    if (n == 0) {
      if (reader_.buffered() > 0) {
        throw Error(ErrorCode::TruncatedFrame, "peer closed mid-frame");
      }
      throw Error(ErrorCode::ConnectionClosed, "peer closed the connection");
    }
    received_ += static_cast<std::uint64_t>(n);
    reader_.feed(std::span<const std::uint8_t>(chunk, static_cast<std::size_t>(n)));
  }
}

protocol::Message Connection::receive(std::string_view secret, Millis timeout) {
  return protocol::decode(receive_frame(timeout), secret);
}

void Connection::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::string Connection::peer() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (fd_ < 0 || ::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "?";
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, host, sizeof host);
  return std::string(host) + ":" + std::to_string(ntohs(addr.sin_port));
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), local_(std::move(other.local_)) {}

Listener& Listener::operator=(Listener&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
    local_ = std::move(other.local_);
  }
  return *this;
}

Listener Listener::bind(const Endpoint& at) {
  sockaddr_in addr{};
  try {
    addr = resolve(at);
  } catch (const Error& e) {
    throw Error(ErrorCode::BindFailure, e.detail());
  }
  Listener l;
  l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (l.fd_ < 0) throw Error(ErrorCode::BindFailure, "socket: " + errno_text());
  int one = 1;
  ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(l.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
    throw Error(ErrorCode::BindFailure, at.to_string() + ": " + errno_text());
  }
  if (::listen(l.fd_, 64) < 0) throw Error(ErrorCode::BindFailure, "listen: " + errno_text());
  socklen_t len = sizeof addr;
  ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  l.local_ = {at.host.empty() ? "127.0.0.1" : at.host, ntohs(addr.sin_port)};
  return l;
}

std::optional<Connection> Listener::accept(Millis timeout) {
  if (fd_ < 0) return std::nullopt;
  if (wait_for(fd_, POLLIN, Clock::now() + timeout) <= 0) return std::nullopt;
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  return Connection(fd);
}

void Listener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace smartedge::net
