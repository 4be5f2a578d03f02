// POSIX socket plumbing shared by the server and client.

#ifndef TIA_DETAIL_NET_HPP_
#define TIA_DETAIL_NET_HPP_

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "tia/error.hpp"

namespace tia::detail {

[[noreturn]] inline void throw_errno(const std::string& what, int err = errno) {
  throw Error(Errc::kIo, what + ": " + std::strerror(err));
}

/// Owning file descriptor.
class Fd {
 public:
  Fd() noexcept = default;
  explicit Fd(int fd) noexcept : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  explicit operator bool() const noexcept { return valid(); }

  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Level-triggered wake-up flag usable in poll(); once set it stays set.
class WakeEvent {
 public:
  WakeEvent() : fd_(::eventfd(0, EFD_CLOEXEC | EFD_NONBLOCK)) {
    if (!fd_) throw_errno("eventfd");
  }

  void set() noexcept {
    const std::uint64_t one = 1;
    [[maybe_unused]] const auto n = ::write(fd_.get(), &one, sizeof one);
  }

  int fd() const noexcept { return fd_.get(); }

  bool is_set() const noexcept {
    pollfd p{fd_.get(), POLLIN, 0};
    return ::poll(&p, 1, 0) > 0;
  }

 private:
  Fd fd_;
};

enum class WaitResult { kReady, kWoken, kTimeout };

using Clock = std::chrono::steady_clock;

/// Waits until `fd` has `events`, `wake` fires, or the deadline passes.
inline WaitResult wait_for(int fd, short events, const WakeEvent* wake, std::optional<Clock::time_point> deadline) {
  while (true) {
    pollfd fds[2] = {{fd, events, 0}, {wake != nullptr ? wake->fd() : -1, POLLIN, 0}};
    int timeout_ms = -1;
    if (deadline) {
      const auto left = std::chrono::ceil<std::chrono::milliseconds>(*deadline - Clock::now()).count();
      timeout_ms = left > 0 ? static_cast<int>(std::min<long long>(left, 1 << 30)) : 0;
    }
    const int n = ::poll(fds, 2, timeout_ms);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll");
    }
    if (fds[1].revents != 0) return WaitResult::kWoken;
    if (fds[0].revents != 0) return WaitResult::kReady;
    if (n == 0 && deadline && Clock::now() >= *deadline) return WaitResult::kTimeout;
  }
}

inline std::optional<Clock::time_point> deadline_after(std::optional<std::chrono::milliseconds> timeout) {
  if (!timeout) return std::nullopt;
  return Clock::now() + *timeout;
}

inline sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* result = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &result); rc != 0 || result == nullptr) {
    throw Error(Errc::kIo, "cannot resolve host '" + host + "': " + ::gai_strerror(rc));
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  ::freeaddrinfo(result);
  return addr;
}

inline std::uint16_t local_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw_errno("getsockname");
  return ntohs(addr.sin_port);
}

inline Fd tcp_listen(const std::string& host, std::uint16_t port, int backlog = 16) {
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const sockaddr_in addr = resolve_ipv4(host, port);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd.get(), backlog) != 0) throw_errno("listen");
  return fd;
}

/// Accepts one connection; returns an invalid Fd if woken or timed out first.
inline Fd tcp_accept(const Fd& listener, const WakeEvent* wake,
                     std::optional<Clock::time_point> deadline = std::nullopt) {
  while (true) {
    if (wait_for(listener.get(), POLLIN, wake, deadline) != WaitResult::kReady) return Fd();
    Fd conn(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
    if (conn) {
      const int one = 1;
      ::setsockopt(conn.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return conn;
    }
    if (errno != EINTR && errno != ECONNABORTED && errno != EAGAIN) throw_errno("accept");
  }
}

inline Fd tcp_connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve_ipv4(host, port);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!fd) throw_errno("socket");
  if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) throw_errno("connect " + host + ":" + std::to_string(port));
    if (wait_for(fd.get(), POLLOUT, nullptr, Clock::now() + timeout) != WaitResult::kReady) {
      throw Error(Errc::kTimeout, "connect " + host + ":" + std::to_string(port) + " timed out");
    }
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw_errno("connect " + host + ":" + std::to_string(port), err);
  }
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
  const int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

inline void send_all(int fd, std::span<const std::uint8_t> bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

/// Like send_all, but gives up and returns false once `wake` fires.
inline bool send_all(int fd, std::span<const std::uint8_t> bytes, const WakeEvent& wake) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        if (wait_for(fd, POLLOUT, &wake, std::nullopt) == WaitResult::kWoken) return false;
        continue;
      }
      throw_errno("send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
  return true;
}

inline void send_all(int fd, std::string_view text) {
  send_all(fd, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Reads what is available. Returns 0 at end of stream; nullopt if woken or timed out.
inline std::optional<std::size_t> recv_some(int fd, std::span<std::uint8_t> buf, const WakeEvent* wake,
                                            std::optional<Clock::time_point> deadline) {
  while (true) {
    const WaitResult w = wait_for(fd, POLLIN, wake, deadline);
    if (w == WaitResult::kWoken) return std::nullopt;
    if (w == WaitResult::kTimeout) throw Error(Errc::kTimeout, "receive timed out");
    const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR || errno == EAGAIN) continue;
    if (errno == ECONNRESET) return 0;
    throw_errno("recv");
  }
}

/// Fills `buf` completely. Throws kEndOfStream if the peer closes first.
inline void recv_exact(int fd, std::span<std::uint8_t> buf, const WakeEvent* wake,
                       std::optional<Clock::time_point> deadline) {
  std::size_t got = 0;
  while (got < buf.size()) {
    const auto n = recv_some(fd, buf.subspan(got), wake, deadline);
    if (!n) throw Error(Errc::kIo, "receive interrupted");
    if (*n == 0) {
      throw Error(Errc::kEndOfStream, "stream closed after " + std::to_string(got) + " of " +
                                          std::to_string(buf.size()) + " bytes");
    }
    got += *n;
  }
}

inline Fd udp_socket(const std::string& host, std::uint16_t port) {
  Fd fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
  if (!fd) throw_errno("socket");
  const int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const sockaddr_in addr = resolve_ipv4(host, port);
  if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw_errno("bind udp " + host + ":" + std::to_string(port));
  }
  return fd;
}

inline void udp_send_to(int fd, std::span<const std::uint8_t> bytes, const sockaddr_in& to) {
  while (::sendto(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL, reinterpret_cast<const sockaddr*>(&to), sizeof to) <
         0) {
    if (errno == EINTR) continue;
    throw_errno("sendto");
  }
}

struct Datagram {
  std::size_t size = 0;
  sockaddr_in from{};
};

/// Receives one datagram; nullopt if woken. Throws kTimeout at the deadline.
inline std::optional<Datagram> udp_recv(int fd, std::span<std::uint8_t> buf, const WakeEvent* wake,
                                        std::optional<Clock::time_point> deadline) {
  while (true) {
    const WaitResult w = wait_for(fd, POLLIN, wake, deadline);
    if (w == WaitResult::kWoken) return std::nullopt;
    if (w == WaitResult::kTimeout) throw Error(Errc::kTimeout, "receive timed out");
    Datagram d;
    socklen_t len = sizeof d.from;
    const ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), MSG_TRUNC, reinterpret_cast<sockaddr*>(&d.from), &len);
    if (n >= 0) {
      d.size = static_cast<std::size_t>(n);
      return d;
    }
    if (errno == EINTR || errno == EAGAIN) continue;
    throw_errno("recvfrom");
  }
}

inline std::string peer_name(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getpeername(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "?";
  char buf[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
}

}  // namespace tia::detail

#endif  // TIA_DETAIL_NET_HPP_
