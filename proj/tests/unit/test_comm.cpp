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

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "hptmt/comm.hpp"
#include "test_util.hpp"

namespace hptmt {
namespace {

using namespace std::chrono_literals;

Bytes pattern(std::size_t n, std::uint8_t salt) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i * 31 + salt);
  return b;
}

TEST(InProc, SingleRank) {
  int seen = -1;
  run_inproc(1, [&](Communicator& comm) {
    seen = comm.rank();
    EXPECT_EQ(comm.world_size(), 1);
    comm.barrier();
  });
  EXPECT_EQ(seen, 0);
}

TEST(InProc, DistinctRanks) {
  std::mutex mu;
  std::vector<int> ranks;
  run_inproc(4, [&](Communicator& comm) {
    std::lock_guard lock(mu);
    ranks.push_back(comm.rank());
  });
  std::sort(ranks.begin(), ranks.end());
  EXPECT_EQ(ranks, (std::vector<int>{0, 1, 2, 3}));
}

TEST(InProc, LoopbackFifoAndEmptyMessages) {
  run_inproc(1, [](Communicator& comm) {
    comm.send(0, 7, pattern(5, 1));
    comm.send(0, 7, pattern(3, 2));
    comm.send(0, 8, Bytes{});
    EXPECT_EQ(comm.recv(0, 8).size(), 0u);
    EXPECT_EQ(comm.recv(0, 7), pattern(5, 1));
    EXPECT_EQ(comm.recv(0, 7), pattern(3, 2));
    EXPECT_FALSE(comm.try_recv(0, 7).has_value());
  });
}

// Every rank derives the same random plan of (src, dst, tag) messages;
// receivers drain channels in a random order and check sequence numbers.
TEST(InProc, FifoUnderRandomSchedules) {
  constexpr int kWorld = 4;
  constexpr int kMessages = 400;
  struct Msg {
    int src, dst;
    MessageTag tag;
  };
  std::mt19937_64 plan_rng(5);
  std::vector<Msg> plan;
  for (int i = 0; i < kMessages; ++i) {
    plan.push_back({static_cast<int>(plan_rng() % kWorld), static_cast<int>(plan_rng() % kWorld),
                    static_cast<MessageTag>(plan_rng() % 3)});
  }
  run_inproc(kWorld, [&](Communicator& comm) {
    std::mt19937_64 rng(100 + comm.rank());
    std::map<std::pair<int, MessageTag>, std::uint32_t> next_seq;
    for (const auto& m : plan) {
      if (m.src != comm.rank()) continue;
      const std::uint32_t seq = next_seq[{m.dst, m.tag}]++;
      Bytes payload(4 + rng() % 64);
      std::memcpy(payload.data(), &seq, 4);
      comm.send(m.dst, m.tag, std::move(payload));
      if (rng() % 4 == 0) std::this_thread::yield();
    }
    std::map<std::pair<int, MessageTag>, std::uint32_t> expected;
    for (const auto& m : plan) {
      if (m.dst == comm.rank()) ++expected[{m.src, m.tag}];
    }
    std::vector<std::pair<int, MessageTag>> channels;
    for (const auto& [ch, n] : expected) channels.push_back(ch);
    std::shuffle(channels.begin(), channels.end(), rng);
    for (const auto& ch : channels) {
      for (std::uint32_t seq = 0; seq < expected[ch]; ++seq) {
        const Bytes b = comm.recv(ch.first, ch.second);
        std::uint32_t got;
        std::memcpy(&got, b.data(), 4);
        EXPECT_EQ(got, seq);
      }
    }
  });
}

TEST(InProc, PayloadIntegrity) {
  const std::vector<std::size_t> sizes{0, 1, 8, 4096, std::size_t{1} << 20};
  run_inproc(3, [&](Communicator& comm) {
    const int next = (comm.rank() + 1) % 3;
    const int prev = (comm.rank() + 2) % 3;
    for (std::size_t s : sizes) comm.send(next, 1, pattern(s, static_cast<std::uint8_t>(comm.rank())));
    for (std::size_t s : sizes) EXPECT_EQ(comm.recv(prev, 1), pattern(s, static_cast<std::uint8_t>(prev)));
  });
}

TEST(InProc, RecvAnyTakesEveryFlaggedSource) {
  run_inproc(3, [](Communicator& comm) {
    if (comm.rank() != 0) {
      comm.send(0, 4, pattern(comm.rank(), 0));
      return;
    }
    std::vector<bool> sources{false, true, true};
    std::vector<int> from;
    for (int i = 0; i < 2; ++i) {
      auto [src, bytes] = comm.recv_any(4, sources);
      EXPECT_EQ(bytes.size(), static_cast<std::size_t>(src));
      sources[src] = false;
      from.push_back(src);
    }
    std::sort(from.begin(), from.end());
    EXPECT_EQ(from, (std::vector<int>{1, 2}));
  });
}

TEST(InProc, BarrierWaitsForLastEntry) {
  constexpr int kWorld = 4;
  std::vector<std::chrono::steady_clock::time_point> entered(kWorld), left(kWorld);
  run_inproc(kWorld, [&](Communicator& comm) {
    std::this_thread::sleep_for(std::chrono::milliseconds(15 * comm.rank()));
    entered[comm.rank()] = std::chrono::steady_clock::now();
    comm.barrier();
    left[comm.rank()] = std::chrono::steady_clock::now();
  });
  const auto last = *std::max_element(entered.begin(), entered.end());
  for (const auto& t : left) EXPECT_GE(t, last);
}

TEST(InProc, FinalizeThenSendIsUsageError) {
  run_inproc(1, [](Communicator& comm) {
    comm.finalize();
    comm.finalize();
    EXPECT_TRUE(comm.finalized());
    EXPECT_THROW(comm.send(0, 1, Bytes{1}), UsageError);
    EXPECT_THROW(comm.recv(0, 1), UsageError);
  });
}

TEST(InProc, WorkerFailureAbortsTheWorld) {
  EXPECT_THROW(run_inproc(3,
                          [](Communicator& comm) {
                            if (comm.rank() == 2) throw InvalidArgument("boom");
                            comm.recv(2, 1);
                          }),
               InvalidArgument);
}

TEST(InProc, BadRankIsRejected) {
  run_inproc(2, [](Communicator& comm) {
    EXPECT_THROW(comm.send(2, 1, Bytes{}), InvalidArgument);
    EXPECT_THROW(comm.recv(-1, 1), InvalidArgument);
  });
}

TEST(Mailbox, BoundedChannelAdmitsIntoEmptyChannelOnly) {
  Mailbox box(2, 100);
  Bytes big(200, 1);
  EXPECT_TRUE(box.deliver(0, 1, big, true, false));
  EXPECT_TRUE(big.empty());
  Bytes next(10, 2);
  EXPECT_FALSE(box.deliver(0, 1, next, true, false));
  EXPECT_EQ(next.size(), 10u);
  Bytes other(10, 3);
  EXPECT_TRUE(box.deliver(1, 1, other, true, false)) << "channels are per source";
  EXPECT_EQ(box.take(0, 1).size(), 200u);
  EXPECT_TRUE(box.deliver(0, 1, next, true, false));
}

TEST(Mailbox, ClosedSourceFailsWaitingReceivers) {
  Mailbox box(2, 100);
  Bytes b(3, 1);
  box.deliver(1, 5, b, false, true);
  box.close_source(1, "gone");
  EXPECT_EQ(box.take(1, 5).size(), 3u) << "queued data is still delivered";
  EXPECT_THROW(box.take(1, 5), TransportError);
}

TEST(TransportConfig, Validation) {
  TransportConfig c;
  c.world_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.world_size = 2;
  c.kind = TransportKind::Tcp;
  c.addresses = {"127.0.0.1:1"};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.addresses.push_back("127.0.0.1:2");
  c.rank = 2;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

// Runs one TCP rank per thread.
void tcp_world(int world, const std::function<void(Communicator&)>& body) {
  const auto addresses = testing::localhost_addresses(world);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(world);
  for (int r = 0; r < world; ++r) {
    threads.emplace_back([&, r] {
      try {
        TransportConfig c;
        c.kind = TransportKind::Tcp;
        c.world_size = world;
        c.addresses = addresses;
        c.rank = r;
        c.connect_timeout = 10s;
        Communicator comm = bootstrap_tcp(c);
        body(comm);
        comm.finalize();
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TEST(Tcp, RingPayloadIntegrity) {
  const std::vector<std::size_t> sizes{0, 1, 8, 4096, std::size_t{1} << 20};
  tcp_world(3, [&](Communicator& comm) {
    const int next = (comm.rank() + 1) % 3;
    const int prev = (comm.rank() + 2) % 3;
    for (std::size_t s : sizes) comm.send(next, 9, pattern(s, static_cast<std::uint8_t>(comm.rank())));
    for (std::size_t s : sizes) EXPECT_EQ(comm.recv(prev, 9), pattern(s, static_cast<std::uint8_t>(prev)));
    comm.send(comm.rank(), 3, pattern(4, 0));
    EXPECT_EQ(comm.recv(comm.rank(), 3), pattern(4, 0));
    comm.barrier();
  });
}

TEST(Tcp, FifoPerTag) {
  tcp_world(2, [](Communicator& comm) {
    const int other = 1 - comm.rank();
    for (std::uint32_t i = 0; i < 200; ++i) {
      Bytes b(4);
      std::memcpy(b.data(), &i, 4);
      comm.send(other, i % 2, std::move(b));
    }
    for (MessageTag tag : {1u, 0u}) {
      for (std::uint32_t i = tag; i < 200; i += 2) {
        const Bytes b = comm.recv(other, tag);
        std::uint32_t got;
        std::memcpy(&got, b.data(), 4);
        EXPECT_EQ(got, i);
      }
    }
  });
}

TEST(Tcp, UnreachablePeerTimesOut) {
  TransportConfig c;
  c.kind = TransportKind::Tcp;
  c.world_size = 2;
  c.addresses = testing::localhost_addresses(2);
  c.rank = 0;
  c.connect_timeout = 300ms;
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(bootstrap_tcp(c), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(Tcp, PeerDisconnectFailsReceiver) {
  std::atomic<bool> failed{false};
  tcp_world(2, [&](Communicator& comm) {
    if (comm.rank() == 1) {
      comm.finalize();
      return;
    }
    try {
      comm.recv(1, 1);
    } catch (const TransportError&) {
      failed = true;
    }
  });
  EXPECT_TRUE(failed);
}

}  // namespace
}  // namespace hptmt
