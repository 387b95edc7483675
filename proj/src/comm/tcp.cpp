// Copyright 2026 The hptmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <future>
#include <thread>

#include "hptmt/comm.hpp"

namespace hptmt {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint32_t kHandshakeMagic = 0x43545048;  // "HPTC"
constexpr std::size_t kFrameHeader = 12;               // u32 tag, u64 length

struct Endpoint {
  std::string host;
  std::string port;
};

Endpoint parse_endpoint(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw InvalidArgument("tcp address must be host:port, got '" + address + "'");
  }
  return {address.substr(0, colon), address.substr(colon + 1)};
}

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string errno_text() { return std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const Endpoint& ep, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const int rc = getaddrinfo(ep.host.c_str(), ep.port.c_str(), &hints, &out.head);
  if (rc != 0) throw TransportError("cannot resolve " + ep.host + ":" + ep.port + ": " + gai_strerror(rc));
}

/// Writes all bytes; false on a broken connection.
bool write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

/// Reads exactly n bytes. Returns false on EOF/error. With a deadline, also
/// false on timeout.
bool read_all(int fd, void* data, std::size_t n, std::optional<Clock::time_point> deadline = {}) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    if (deadline) {
      pollfd pfd{fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, remaining_ms(*deadline));
      if (rc == 0) return false;
      if (rc < 0 && errno != EINTR) return false;
      if (rc < 0) continue;
    }
    const ssize_t r = ::recv(fd, p, n, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

struct Handshake {
  std::uint32_t magic;
  std::uint32_t rank;
  std::uint32_t world_size;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(int rank, int world_size, std::size_t capacity)
      : rank_(rank),
        world_size_(world_size),
        inbox_(world_size, capacity),
        peers_(world_size),
        send_locks_(world_size) {}

  ~TcpTransport() override { close(); }

  void connect_mesh(const TransportConfig& config) {
    const auto deadline = Clock::now() + config.connect_timeout.value_or(default_connect_timeout());
    Fd listener = listen_on(parse_endpoint(config.addresses[rank_]));
    int accepted = 0;
    while (accepted < rank_) {
      pollfd pfd{listener.get(), POLLIN, 0};
      const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
      if (rc == 0) {
        throw TransportError("rank " + std::to_string(rank_) + ": connect timeout waiting for " +
                             std::to_string(rank_ - accepted) + " lower rank(s)");
      }
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError("poll failed: " + errno_text());
      }
      Fd conn(::accept(listener.get(), nullptr, nullptr));
      if (!conn) continue;
      Handshake hs{};
      if (!read_all(conn.get(), &hs, sizeof hs, deadline)) continue;
      if (hs.magic != kHandshakeMagic) continue;
      if (static_cast<int>(hs.world_size) != world_size_) {
        throw TransportError("peer reports world_size " + std::to_string(hs.world_size));
      }
      const int peer = static_cast<int>(hs.rank);
      if (peer >= rank_) throw TransportError("unexpected connection from rank " + std::to_string(peer));
      if (peers_[peer]) throw TransportError("duplicate rank " + std::to_string(peer));
      configure(conn.get());
      peers_[peer] = std::move(conn);
      ++accepted;
    }
    listener.reset();
    for (int peer = rank_ + 1; peer < world_size_; ++peer) {
      peers_[peer] = connect_to(parse_endpoint(config.addresses[peer]), peer, deadline);
      Handshake hs{kHandshakeMagic, static_cast<std::uint32_t>(rank_), static_cast<std::uint32_t>(world_size_)};
      if (!write_all(peers_[peer].get(), &hs, sizeof hs)) {
        throw TransportError("handshake with rank " + std::to_string(peer) + " failed");
      }
    }
    for (int peer = 0; peer < world_size_; ++peer) {
      if (peer == rank_) continue;
      readers_.emplace_back([this, peer] { read_loop(peer); });
    }
  }

  void send(int dest, MessageTag tag, Bytes payload) override {
    if (dest == rank_) {
      inbox_.deliver(rank_, tag, payload, /*bounded=*/false, /*wait=*/true);
      return;
    }
    std::uint8_t header[kFrameHeader];
    const std::uint64_t len = payload.size();
    std::memcpy(header, &tag, 4);
    std::memcpy(header + 4, &len, 8);
    std::lock_guard lock(send_locks_[dest]);
    const int fd = peers_[dest].get();
    if (fd < 0 || !write_all(fd, header, kFrameHeader) ||
        (len > 0 && !write_all(fd, payload.data(), payload.size()))) {
      throw TransportError("peer " + std::to_string(dest) + " disconnected");
    }
  }

  // Incoming frames are drained by reader threads regardless of what the
  // application is doing, so a socket write cannot be blocked by the peer's
  // own pending sends.
  bool try_send(int dest, MessageTag tag, Bytes& payload) override {
    send(dest, tag, std::move(payload));
    payload = Bytes();
    return true;
  }

  Mailbox& inbox() override { return inbox_; }

  void close() override {
    if (closed_.exchange(true)) return;
    for (int peer = 0; peer < world_size_; ++peer) {
      if (peers_[peer]) ::shutdown(peers_[peer].get(), SHUT_WR);
    }
    // Wait for every peer to close its side too, bounded by the connect timeout.
    auto all_done = std::async(std::launch::async, [this] {
      for (auto& t : readers_) {
        if (t.joinable()) t.join();
      }
    });
    if (all_done.wait_for(default_connect_timeout()) != std::future_status::ready) {
      for (auto& p : peers_) {
        if (p) ::shutdown(p.get(), SHUT_RDWR);
      }
    }
    all_done.wait();
    for (auto& p : peers_) p.reset();
    inbox_.close_owner();
  }

 private:
  static void configure(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  Fd listen_on(const Endpoint& ep) {
    AddrInfo ai;
    resolve(ep, /*passive=*/true, ai);
    std::string last_error = "no usable address";
    for (addrinfo* a = ai.head; a; a = a->ai_next) {
      Fd fd(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
      if (!fd) continue;
      int one = 1;
      ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
      if (::bind(fd.get(), a->ai_addr, a->ai_addrlen) != 0) {
        last_error = errno_text();
        continue;
      }
      if (::listen(fd.get(), world_size_ + 8) != 0) {
        last_error = errno_text();
        continue;
      }
      return fd;
    }
    throw TransportError("cannot bind " + ep.host + ":" + ep.port + ": " + last_error);
  }

  Fd connect_to(const Endpoint& ep, int peer, Clock::time_point deadline) {
    for (;;) {
      AddrInfo ai;
      resolve(ep, /*passive=*/false, ai);
      for (addrinfo* a = ai.head; a; a = a->ai_next) {
        Fd fd(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
        if (!fd) continue;
        if (::connect(fd.get(), a->ai_addr, a->ai_addrlen) == 0) {
          configure(fd.get());
          return fd;
        }
      }
      if (Clock::now() >= deadline) {
        throw TransportError("rank " + std::to_string(rank_) + ": connect timeout reaching rank " +
                             std::to_string(peer) + " at " + ep.host + ":" + ep.port);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  void read_loop(int peer) {
    const int fd = peers_[peer].get();
    std::string reason = "connection closed";
    for (;;) {
      std::uint8_t header[kFrameHeader];
      if (!read_all(fd, header, kFrameHeader)) break;
      MessageTag tag;
      std::uint64_t len;
      std::memcpy(&tag, header, 4);
      std::memcpy(&len, header + 4, 8);
      Bytes payload;
      try {
        payload.resize(static_cast<std::size_t>(len));
      } catch (const std::bad_alloc&) {
        reason = "frame too large";
        break;
      }
      if (len > 0 && !read_all(fd, payload.data(), payload.size())) {
        reason = "truncated frame";
        break;
      }
      try {
        inbox_.deliver(peer, tag, payload, /*bounded=*/false, /*wait=*/true);
      } catch (const Error&) {
        break;
      }
    }
    inbox_.close_source(peer, reason);
  }

  int rank_;
  int world_size_;
  Mailbox inbox_;
  std::vector<Fd> peers_;
  std::vector<std::mutex> send_locks_;
  std::vector<std::thread> readers_;
  std::atomic<bool> closed_{false};
};

}  // namespace

Communicator bootstrap_tcp(const TransportConfig& config) {
  config.validate();
  if (config.kind != TransportKind::Tcp) throw InvalidArgument("bootstrap_tcp needs a Tcp config");
  auto transport = std::make_unique<TcpTransport>(config.rank, config.world_size, config.channel_capacity);
  transport->connect_mesh(config);
  return Communicator(config.rank, config.world_size, std::move(transport));
}

}  // namespace hptmt
