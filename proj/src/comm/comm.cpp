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

#include "hptmt/comm.hpp"

#include <cstdlib>
#include <exception>
#include <thread>

#include "comm/internal.hpp"

namespace hptmt {

void TransportConfig::validate() const {
  if (world_size < 1) throw InvalidArgument("world_size must be >= 1");
  if (kind == TransportKind::Tcp) {
    if (addresses.size() != static_cast<std::size_t>(world_size)) {
      throw InvalidArgument("tcp address list length must equal world_size");
    }
    if (rank < 0 || rank >= world_size) throw InvalidArgument("rank must be < world_size");
  }
  if (channel_capacity == 0) throw InvalidArgument("channel_capacity must be > 0");
}

std::chrono::milliseconds default_connect_timeout() {
  if (const char* env = std::getenv("HPTMT_CONNECT_TIMEOUT_SECS")) {
    char* end = nullptr;
    const double secs = std::strtod(env, &end);
    if (end != env && secs > 0) return std::chrono::milliseconds(static_cast<long long>(secs * 1000));
  }
  return std::chrono::seconds(30);
}

// ---------------------------------------------------------------------------
// Mailbox

Mailbox::Mailbox(int world_size, std::size_t channel_capacity)
    : channel_bytes_(world_size, 0),
      channel_messages_(world_size, 0),
      closed_(world_size, false),
      close_reason_(world_size),
      capacity_(channel_capacity) {}

bool Mailbox::deliver(int src, MessageTag tag, Bytes& payload, bool bounded, bool wait) {
  std::unique_lock lock(mu_);
  for (;;) {
    if (aborted_) throw detail::WorldAborted(*aborted_);
    if (owner_closed_) throw TransportError("peer disconnected: receiver has finalized");
    if (!bounded || channel_messages_[src] == 0 || channel_bytes_[src] + payload.size() <= capacity_) {
      break;
    }
    if (!wait) return false;
    cv_.wait(lock);
  }
  channel_bytes_[src] += payload.size();
  ++channel_messages_[src];
  queues_[key(src, tag)].push_back(std::move(payload));
  payload = Bytes();
  ++generation_;
  cv_.notify_all();
  return true;
}

void Mailbox::check_source_locked(int src) const {
  if (aborted_) throw detail::WorldAborted(*aborted_);
  if (closed_[src]) {
    std::string msg = "peer " + std::to_string(src) + " disconnected";
    if (!close_reason_[src].empty()) msg += ": " + close_reason_[src];
    throw TransportError(msg);
  }
}

std::optional<Bytes> Mailbox::pop_locked(int src, MessageTag tag) {
  auto it = queues_.find(key(src, tag));
  if (it == queues_.end() || it->second.empty()) return std::nullopt;
  Bytes out = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) queues_.erase(it);
  channel_bytes_[src] -= out.size();
  --channel_messages_[src];
  ++generation_;
  cv_.notify_all();
  return out;
}

Bytes Mailbox::take(int src, MessageTag tag) {
  std::unique_lock lock(mu_);
  for (;;) {
    if (aborted_) throw detail::WorldAborted(*aborted_);
    if (auto m = pop_locked(src, tag)) return std::move(*m);
    check_source_locked(src);
    cv_.wait(lock);
  }
}

std::optional<Bytes> Mailbox::try_take(int src, MessageTag tag) {
  std::lock_guard lock(mu_);
  if (aborted_) throw detail::WorldAborted(*aborted_);
  auto m = pop_locked(src, tag);
  if (!m) check_source_locked(src);
  return m;
}

std::optional<std::pair<int, Bytes>> Mailbox::take_any(MessageTag tag, const std::vector<bool>& sources,
                                                       bool wait) {
  const int n = static_cast<int>(sources.size());
  std::unique_lock lock(mu_);
  for (;;) {
    if (aborted_) throw detail::WorldAborted(*aborted_);
    bool any_source = false;
    for (int k = 0; k < n; ++k) {
      const int src = (next_any_ + k) % n;
      if (!sources[src]) continue;
      any_source = true;
      if (auto m = pop_locked(src, tag)) {
        next_any_ = (src + 1) % n;
        return std::make_pair(src, std::move(*m));
      }
    }
    if (!any_source) throw InvalidArgument("take_any: no sources selected");
    for (int src = 0; src < n; ++src) {
      if (sources[src]) check_source_locked(src);
    }
    if (!wait) return std::nullopt;
    cv_.wait(lock);
  }
}

void Mailbox::wait_for_activity(std::chrono::microseconds timeout) {
  std::unique_lock lock(mu_);
  const auto gen = generation_;
  cv_.wait_for(lock, timeout, [&] { return generation_ != gen || aborted_.has_value(); });
}

void Mailbox::close_source(int src, const std::string& reason) {
  std::lock_guard lock(mu_);
  if (!closed_[src]) {
    closed_[src] = true;
    close_reason_[src] = reason;
  }
  ++generation_;
  cv_.notify_all();
}

void Mailbox::abort(const std::string& reason) {
  std::lock_guard lock(mu_);
  if (!aborted_) aborted_ = reason;
  cv_.notify_all();
}

void Mailbox::close_owner() {
  std::lock_guard lock(mu_);
  owner_closed_ = true;
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Communicator

Communicator::Communicator(int rank, int world_size, std::unique_ptr<Transport> transport)
    : rank_(rank), world_size_(world_size), transport_(std::move(transport)) {
  if (world_size_ < 1 || rank_ < 0 || rank_ >= world_size_) {
    throw InvalidArgument("communicator rank must be in [0, world_size)");
  }
}

Communicator::~Communicator() {
  try {
    finalize();
  } catch (...) {
  }
}

Communicator::Communicator(Communicator&&) noexcept = default;
Communicator& Communicator::operator=(Communicator&&) noexcept = default;

Transport& Communicator::live(const char* op) {
  if (!transport_) throw UsageError(std::string(op) + " on a finalized communicator");
  return *transport_;
}

void Communicator::check_rank(int r, const char* op) const {
  if (r < 0 || r >= world_size_) {
    throw InvalidArgument(std::string(op) + ": rank " + std::to_string(r) + " out of range");
  }
}

void Communicator::send(int dest, MessageTag tag, std::span<const std::uint8_t> payload) {
  send(dest, tag, Bytes(payload.begin(), payload.end()));
}

void Communicator::send(int dest, MessageTag tag, Bytes&& payload) {
  auto& t = live("send");
  check_rank(dest, "send");
  const auto n = payload.size();
  t.send(dest, tag, std::move(payload));
  stats_.bytes_sent += n;
  ++stats_.messages_sent;
}

bool Communicator::try_send(int dest, MessageTag tag, Bytes& payload) {
  auto& t = live("try_send");
  check_rank(dest, "try_send");
  const auto n = payload.size();
  if (!t.try_send(dest, tag, payload)) return false;
  stats_.bytes_sent += n;
  ++stats_.messages_sent;
  return true;
}

Bytes Communicator::recv(int src, MessageTag tag) {
  auto& t = live("recv");
  check_rank(src, "recv");
  Bytes b = t.inbox().take(src, tag);
  count_received(b.size());
  return b;
}

std::optional<Bytes> Communicator::try_recv(int src, MessageTag tag) {
  auto& t = live("try_recv");
  check_rank(src, "try_recv");
  auto b = t.inbox().try_take(src, tag);
  if (b) count_received(b->size());
  return b;
}

std::pair<int, Bytes> Communicator::recv_any(MessageTag tag, const std::vector<bool>& sources) {
  auto& t = live("recv_any");
  auto m = t.inbox().take_any(tag, sources, /*wait=*/true);
  count_received(m->second.size());
  return std::move(*m);
}

std::optional<std::pair<int, Bytes>> Communicator::try_recv_any(MessageTag tag,
                                                                const std::vector<bool>& sources) {
  auto& t = live("try_recv_any");
  auto m = t.inbox().take_any(tag, sources, /*wait=*/false);
  if (m) count_received(m->second.size());
  return m;
}

void Communicator::wait_for_activity(std::chrono::microseconds timeout) {
  live("wait_for_activity").inbox().wait_for_activity(timeout);
}

void Communicator::barrier() {
  live("barrier");
  // Dissemination barrier: ceil(log2 W) rounds, one tag per round.
  MessageTag level = 0;
  for (int dist = 1; dist < world_size_; dist <<= 1, ++level) {
    send((rank_ + dist) % world_size_, kBarrierTagBase + level, Bytes{});
    recv((rank_ - dist + world_size_) % world_size_, kBarrierTagBase + level);
  }
}

void Communicator::finalize() {
  if (!transport_) return;
  auto t = std::move(transport_);
  t->close();
}

// ---------------------------------------------------------------------------
// InProc world

namespace {

struct InProcWorld {
  InProcWorld(int n, std::size_t capacity) {
    boxes.reserve(n);
    for (int i = 0; i < n; ++i) boxes.push_back(std::make_unique<Mailbox>(n, capacity));
  }
  void abort(const std::string& why) {
    for (auto& b : boxes) b->abort(why);
  }
  std::vector<std::unique_ptr<Mailbox>> boxes;
};

class InProcTransport final : public Transport {
 public:
  InProcTransport(int rank, std::shared_ptr<InProcWorld> world) : rank_(rank), world_(std::move(world)) {}

  void send(int dest, MessageTag tag, Bytes payload) override {
    world_->boxes[dest]->deliver(rank_, tag, payload, /*bounded=*/dest != rank_, /*wait=*/true);
  }

  bool try_send(int dest, MessageTag tag, Bytes& payload) override {
    return world_->boxes[dest]->deliver(rank_, tag, payload, dest != rank_, /*wait=*/false);
  }

  Mailbox& inbox() override { return *world_->boxes[rank_]; }

  void close() override {
    for (std::size_t i = 0; i < world_->boxes.size(); ++i) {
      if (static_cast<int>(i) != rank_) world_->boxes[i]->close_source(rank_, "rank finalized");
    }
    world_->boxes[rank_]->close_owner();
  }

 private:
  int rank_;
  std::shared_ptr<InProcWorld> world_;
};

}  // namespace

void run_inproc(int world_size, const WorkerBody& body, std::size_t channel_capacity) {
  if (world_size < 1) throw InvalidArgument("world_size must be >= 1");
  auto world = std::make_shared<InProcWorld>(world_size, channel_capacity);
  std::vector<std::exception_ptr> errors(world_size);
  std::vector<bool> secondary(world_size, false);
  auto worker = [&](int rank) {
    Communicator comm(rank, world_size, std::make_unique<InProcTransport>(rank, world));
    try {
      body(comm);
      comm.finalize();
    } catch (const detail::WorldAborted&) {
      errors[rank] = std::current_exception();
      secondary[rank] = true;
    } catch (const std::exception& e) {
      errors[rank] = std::current_exception();
      world->abort("rank " + std::to_string(rank) + " failed: " + e.what());
    } catch (...) {
      errors[rank] = std::current_exception();
      world->abort("rank " + std::to_string(rank) + " failed");
    }
  };
  if (world_size == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(world_size);
    for (int r = 0; r < world_size; ++r) threads.emplace_back(worker, r);
    for (auto& t : threads) t.join();
  }
  for (int r = 0; r < world_size; ++r) {
    if (errors[r] && !secondary[r]) std::rethrow_exception(errors[r]);
  }
  for (int r = 0; r < world_size; ++r) {
    if (errors[r]) std::rethrow_exception(errors[r]);
  }
}

void launch(const TransportConfig& config, const WorkerBody& body) {
  config.validate();
  if (config.kind == TransportKind::InProc) {
    run_inproc(config.world_size, body, config.channel_capacity);
    return;
  }
  Communicator comm = bootstrap_tcp(config);
  body(comm);
  comm.finalize();
}

}  // namespace hptmt
