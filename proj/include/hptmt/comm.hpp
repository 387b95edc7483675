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

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hptmt/error.hpp"

namespace hptmt {

using Bytes = std::vector<std::uint8_t>;
using MessageTag = std::uint32_t;

/// Per-channel buffering bound for blocking sends.
inline constexpr std::size_t kDefaultChannelCapacity = std::size_t{16} << 20;

/// Tags at or above this value are used by the engine itself.
inline constexpr MessageTag kBarrierTagBase = 0x5000'0000;

enum class TransportKind { InProc, Tcp };

struct TransportConfig {
  TransportKind kind = TransportKind::InProc;
  int world_size = 1;
  /// Tcp only: host:port per rank.
  std::vector<std::string> addresses;
  /// Tcp only.
  int rank = 0;
  std::size_t channel_capacity = kDefaultChannelCapacity;
  /// Tcp bootstrap; defaults to HPTMT_CONNECT_TIMEOUT_SECS or 30 s.
  std::optional<std::chrono::milliseconds> connect_timeout;

  /// Throws InvalidArgument when the invariants do not hold.
  void validate() const;
};

std::chrono::milliseconds default_connect_timeout();

/// Incoming messages of one rank, keyed by (source, tag). FIFO per key.
class Mailbox {
 public:
  Mailbox(int world_size, std::size_t channel_capacity);

  /// Appends a message. With `bounded`, waits while the (src -> this) channel
  /// is non-empty and the message would push it over capacity; with
  /// `wait == false` it returns false instead of waiting.
  /// The payload is moved from only when the call returns true.
  bool deliver(int src, MessageTag tag, Bytes& payload, bool bounded, bool wait);

  Bytes take(int src, MessageTag tag);
  std::optional<Bytes> try_take(int src, MessageTag tag);
  /// Next message on `tag` from any source with sources[src] set. Throws if
  /// every flagged source is closed with nothing queued.
  std::optional<std::pair<int, Bytes>> take_any(MessageTag tag, const std::vector<bool>& sources,
                                                bool wait);
  /// Waits until something new is delivered or the timeout passes.
  void wait_for_activity(std::chrono::microseconds timeout);

  /// The source will not send anything else.
  void close_source(int src, const std::string& reason = {});
  /// Fails every pending and future blocking call.
  void abort(const std::string& reason);
  /// The owning rank is gone; senders to it get TransportError.
  void close_owner();

 private:
  static std::uint64_t key(int src, MessageTag tag) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(src)) << 32) | tag;
  }
  void check_source_locked(int src) const;
  std::optional<Bytes> pop_locked(int src, MessageTag tag);

  std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<std::uint64_t, std::deque<Bytes>> queues_;
  std::vector<std::size_t> channel_bytes_;
  std::vector<std::size_t> channel_messages_;
  std::vector<bool> closed_;
  std::vector<std::string> close_reason_;
  std::size_t capacity_;
  std::uint64_t generation_ = 0;
  std::optional<std::string> aborted_;
  bool owner_closed_ = false;
  int next_any_ = 0;
};

/// Moves bytes between ranks; owned by a Communicator.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int dest, MessageTag tag, Bytes payload) = 0;
  /// Sends without blocking; on failure the payload is left untouched.
  virtual bool try_send(int dest, MessageTag tag, Bytes& payload) = 0;
  virtual Mailbox& inbox() = 0;
  virtual void close() = 0;
};

struct CommStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t messages_received = 0;
};

/// A rank's endpoint into a world of world_size ranks: tagged point-to-point
/// messaging with per-(source, destination, tag) FIFO order, plus barrier.
/// Owned by a single worker; not thread-safe.
class Communicator {
 public:
  Communicator(int rank, int world_size, std::unique_ptr<Transport> transport);
  ~Communicator();
  Communicator(const Communicator&) = delete;
  Communicator& operator=(const Communicator&) = delete;
  Communicator(Communicator&&) noexcept;
  Communicator& operator=(Communicator&&) noexcept;

  int rank() const { return rank_; }
  int world_size() const { return world_size_; }

  void send(int dest, MessageTag tag, std::span<const std::uint8_t> payload);
  void send(int dest, MessageTag tag, Bytes&& payload);
  /// Non-blocking send; returns false (payload untouched) if the channel is
  /// full.
  bool try_send(int dest, MessageTag tag, Bytes& payload);

  Bytes recv(int src, MessageTag tag);
  std::optional<Bytes> try_recv(int src, MessageTag tag);
  /// Receives from the first source in `sources` with a message ready.
  std::pair<int, Bytes> recv_any(MessageTag tag, const std::vector<bool>& sources);
  std::optional<std::pair<int, Bytes>> try_recv_any(MessageTag tag, const std::vector<bool>& sources);
  void wait_for_activity(std::chrono::microseconds timeout);

  void barrier();

  /// Closes the transport; later calls raise UsageError. Idempotent.
  void finalize();
  bool finalized() const { return transport_ == nullptr; }

  const CommStats& stats() const { return stats_; }

 private:
  Transport& live(const char* op);
  void check_rank(int r, const char* op) const;
  void count_received(std::size_t n) {
    stats_.bytes_received += n;
    ++stats_.messages_received;
  }

  int rank_;
  int world_size_;
  std::unique_ptr<Transport> transport_;
  CommStats stats_;
};

using WorkerBody = std::function<void(Communicator&)>;

/// Runs `body` once per rank on world_size threads of this process, each with
/// its own Communicator. Joins every worker; if any worker threw, the world
/// is aborted and the first root-cause exception (lowest rank) is rethrown.
void run_inproc(int world_size, const WorkerBody& body,
                std::size_t channel_capacity = kDefaultChannelCapacity);

/// Connects this process as rank `config.rank` of a TCP mesh. Rank r listens
/// on addresses[r], accepts every lower rank, then connects to every higher
/// rank.
Communicator bootstrap_tcp(const TransportConfig& config);

/// InProc: run_inproc. Tcp: bootstrap this process's rank and run body once.
void launch(const TransportConfig& config, const WorkerBody& body);

}  // namespace hptmt
