//
// Copyright 2026 The SecGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// TCP loopback transport: submitters open a fresh connection to a relay per
// message, the relay forwards the frame over its single upstream connection
// to the server-side sink. The source address never leaves the relay.

#ifndef SECGD_TCP_TRANSPORT_H_
#define SECGD_TCP_TRANSPORT_H_

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "secgd/errors.h"
#include "secgd/mixnet.h"
#include "secgd/protocol.h"

namespace secgd {

class TransportError : public Error {
 public:
  using Error::Error;
};

namespace net {

inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      Close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { Close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void Close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::string Errno(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

inline Socket ListenLoopback() {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw TransportError(Errno("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TransportError(Errno("bind"));
  }
  if (::listen(s.fd(), 64) != 0) throw TransportError(Errno("listen"));
  return s;
}

inline std::uint16_t LocalPort(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw TransportError(Errno("getsockname"));
  }
  return ntohs(addr.sin_port);
}

inline Socket ConnectLoopback(std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw TransportError(Errno("socket"));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
      0) {
    throw TransportError(Errno("connect"));
  }
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

inline void WriteAll(const Socket& s, std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n =
        ::send(s.fd(), bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw TransportError(Errno("send"));
    done += static_cast<std::size_t>(n);
  }
}

// False on clean EOF before the first byte.
inline bool ReadExact(const Socket& s, std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    const ssize_t n = ::recv(s.fd(), out.data() + done, out.size() - done, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0 && done == 0) return false;
    if (n <= 0) throw TransportError("connection closed mid-frame");
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// One length-prefixed frame, returned including its prefix.
inline std::optional<std::vector<std::uint8_t>> ReadFrame(const Socket& s) {
  std::vector<std::uint8_t> frame(kFrameLengthBytes);
  if (!ReadExact(s, frame)) return std::nullopt;
  const std::uint32_t len = (std::uint32_t{frame[0]} << 24) |
                            (std::uint32_t{frame[1]} << 16) |
                            (std::uint32_t{frame[2]} << 8) | frame[3];
  if (len > kMaxFrameBytes) throw FormatError("frame too large");
  frame.resize(kFrameLengthBytes + len);
  if (len > 0 && !ReadExact(s, std::span(frame).subspan(kFrameLengthBytes))) {
    throw TransportError("connection closed mid-frame");
  }
  return frame;
}

// True if `s` became readable within `timeout_ms`.
inline bool WaitReadable(const Socket& s, int timeout_ms) {
  pollfd p{s.fd(), POLLIN, 0};
  const int r = ::poll(&p, 1, timeout_ms);
  return r > 0;
}

}  // namespace net

// Server-side endpoint: accepts the relay's upstream connection and queues
// every frame body it receives.
class TcpSink {
 public:
  TcpSink() : listener_(net::ListenLoopback()) {
    port_ = net::LocalPort(listener_);
    thread_ = std::thread([this] { Run(); });
  }
  ~TcpSink() {
    stop_ = true;
    thread_.join();
  }
  TcpSink(const TcpSink&) = delete;
  TcpSink& operator=(const TcpSink&) = delete;

  std::uint16_t port() const { return port_; }

  std::optional<std::vector<std::uint8_t>> Pop(std::chrono::milliseconds wait) {
    std::unique_lock<std::mutex> lock(mu_);
    if (!cv_.wait_for(lock, wait, [this] { return !queue_.empty(); })) {
      return std::nullopt;
    }
    auto body = std::move(queue_.front());
    queue_.pop_front();
    return body;
  }

 private:
  void Run() {
    net::Socket upstream;
    while (!stop_) {
      if (!upstream.valid()) {
        if (!net::WaitReadable(listener_, 20)) continue;
        upstream = net::Socket(::accept(listener_.fd(), nullptr, nullptr));
        continue;
      }
      if (!net::WaitReadable(upstream, 20)) continue;
      try {
        auto frame = net::ReadFrame(upstream);
        if (!frame) {
          upstream.Close();
          continue;
        }
        std::lock_guard<std::mutex> lock(mu_);
        queue_.emplace_back(frame->begin() + kFrameLengthBytes, frame->end());
        cv_.notify_all();
      } catch (const Error&) {
        upstream.Close();
      }
    }
  }

  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> queue_;
  std::thread thread_;
};

// Accepts one connection per submitted frame and forwards the frame bytes,
// and nothing else, upstream.
class TcpRelay {
 public:
  explicit TcpRelay(std::uint16_t upstream_port)
      : listener_(net::ListenLoopback()),
        upstream_(net::ConnectLoopback(upstream_port)) {
    port_ = net::LocalPort(listener_);
    thread_ = std::thread([this] { Run(); });
  }
  ~TcpRelay() {
    stop_ = true;
    thread_.join();
  }
  TcpRelay(const TcpRelay&) = delete;
  TcpRelay& operator=(const TcpRelay&) = delete;

  std::uint16_t port() const { return port_; }
  std::uint64_t forwarded() const { return forwarded_; }

 private:
  void Run() {
    while (!stop_) {
      if (!net::WaitReadable(listener_, 20)) continue;
      // accept() with a null address: the peer address is never read.
      net::Socket conn(::accept(listener_.fd(), nullptr, nullptr));
      if (!conn.valid()) continue;
      try {
        while (auto frame = net::ReadFrame(conn)) {
          net::WriteAll(upstream_, *frame);
          ++forwarded_;
        }
      } catch (const Error&) {
        // Malformed or truncated frames are dropped with their connection.
      }
    }
  }

  net::Socket listener_;
  net::Socket upstream_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> forwarded_{0};
  std::thread thread_;
};

class TcpLoopbackTransport : public Transport {
 public:
  explicit TcpLoopbackTransport(
      std::chrono::milliseconds timeout = std::chrono::seconds(5))
      : sink_(), relay_(sink_.port()), timeout_(timeout) {}

  std::vector<std::uint8_t> Carry(
      std::span<const std::uint8_t> frame) override {
    std::lock_guard<std::mutex> lock(mu_);
    {
      net::Socket conn = net::ConnectLoopback(relay_.port());
      net::WriteAll(conn, frame);
    }
    auto body = sink_.Pop(timeout_);
    if (!body) throw TransportError("relay did not deliver within timeout");
    return std::move(*body);
  }

  std::uint16_t relay_port() const { return relay_.port(); }

 private:
  TcpSink sink_;
  TcpRelay relay_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
};

}  // namespace secgd

#endif  // SECGD_TCP_TRANSPORT_H_
