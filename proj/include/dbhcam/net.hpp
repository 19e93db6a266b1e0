#pragma once

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "dbhcam/error.hpp"

namespace dbhcam::net {

/// Owning file descriptor for a TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(std::exchange(fd_, -1));
  }
  void shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses "host:port".
inline Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= text.size()) {
    throw Error(ErrorCode::ParameterError, "endpoint must be host:port, got '" + std::string(text) + "'");
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  try {
    const int port = std::stoi(std::string(text.substr(colon + 1)));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParameterError, "bad port in endpoint '" + std::string(text) + "'");
  }
  return ep;
}

inline bool wait_fd(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

/// Connects with a timeout. Throws ProviderUnavailable when the peer cannot
/// be reached.
inline Socket connect_tcp(const Endpoint& ep, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::ProviderUnavailable, "cannot resolve " + ep.host);
  }
  std::string last_error = "no address";
  Socket result;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_NONBLOCK | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    int rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      if (wait_fd(s.fd(), POLLOUT, timeout_ms)) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        if (err) errno = err;
      } else {
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      result = std::move(s);
      break;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  if (!result.valid()) {
    throw Error(ErrorCode::ProviderUnavailable,
                "cannot connect to " + ep.host + ":" + port + ": " + last_error);
  }
  return result;
}

/// Binds and listens. Port 0 picks an ephemeral port; see bound_port().
inline Socket listen_tcp(const std::string& address, std::uint16_t port, int backlog = 64) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port);
  if (::getaddrinfo(address.empty() ? nullptr : address.c_str(), port_text.c_str(), &hints, &res) != 0) {
    throw Error(ErrorCode::IoError, "cannot resolve listen address " + address);
  }
  std::string last_error = "no address";
  Socket result;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(s.fd(), backlog) == 0) {
      result = std::move(s);
      break;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  if (!result.valid()) {
    throw Error(ErrorCode::IoError, "cannot listen on " + address + ":" + port_text + ": " + last_error);
  }
  return result;
}

inline std::uint16_t bound_port(const Socket& s) {
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

/// Writes everything or throws IoError.
inline void send_all(const Socket& s, std::string_view data, int timeout_ms = 30000) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(s.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK) && wait_fd(s.fd(), POLLOUT, timeout_ms)) continue;
    throw Error(ErrorCode::IoError, std::string("send failed: ") + std::strerror(errno));
  }
}

/// Buffered reader of newline-terminated frames.
class LineReader {
 public:
  enum class Status { Line, Closed, Timeout, TooLong };

  explicit LineReader(const Socket& s, std::size_t max_line) : socket_(s), max_line_(max_line) {}

  /// Reads the next frame (without the trailing newline) into `line`.
  /// On Closed with a non-empty `line`, the peer sent a truncated frame.
  Status next(std::string& line, int timeout_ms) {
    line.clear();
    for (;;) {
      const auto nl = buffer_.find('\n', scanned_);
      if (nl != std::string::npos) {
        const bool skip = discarding_;
        discarding_ = false;
        if (!skip && nl <= max_line_) line.assign(buffer_, 0, nl);
        buffer_.erase(0, nl + 1);
        scanned_ = 0;
        if (skip) continue;  // tail of a frame already reported as too long
        if (nl > max_line_) return Status::TooLong;
        return Status::Line;
      }
      scanned_ = buffer_.size();
      if (discarding_) {
        buffer_.clear();
        scanned_ = 0;
      } else if (buffer_.size() > max_line_) {
        // Drop the rest of this frame up to its newline.
        buffer_.clear();
        scanned_ = 0;
        discarding_ = true;
        return Status::TooLong;
      }
      if (!wait_fd(socket_.fd(), POLLIN, timeout_ms)) return Status::Timeout;
      char chunk[65536];
      const ssize_t n = ::recv(socket_.fd(), chunk, sizeof(chunk), 0);
      if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
      if (n <= 0) {
        line = std::move(buffer_);
        buffer_.clear();
        scanned_ = 0;
        return Status::Closed;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  const Socket& socket_;
  std::size_t max_line_;
  bool discarding_ = false;
  std::string buffer_;
  std::size_t scanned_ = 0;
};

}  // namespace dbhcam::net
