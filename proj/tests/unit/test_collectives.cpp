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

#include <atomic>
#include <bit>
#include <cmath>
#include <limits>

#include "hptmt/app.hpp"
#include "hptmt/collectives.hpp"
#include "hptmt/oracle.hpp"
#include "test_util.hpp"

namespace hptmt::coll {
namespace {

NumericArray I(std::vector<std::int64_t> v) { return NumericArray(std::move(v)); }
NumericArray F(std::vector<double> v) { return NumericArray(std::move(v)); }

TEST(Collectives, SingleRankIsIdentity) {
  run_inproc(1, [](Communicator& comm) {
    const auto x = I({4, 5});
    EXPECT_EQ(broadcast(comm, x, 0), x);
    EXPECT_EQ(allgather(comm, x), x);
    EXPECT_EQ(*gather(comm, x, 0), x);
    EXPECT_EQ(allreduce(comm, x, ReduceOp::Prod), x);
    const std::vector<NumericArray> parts{x};
    EXPECT_EQ(alltoall(comm, parts)[0], x);
    EXPECT_EQ(scatter(comm, parts, DataType::Int64, 0), x);
  });
}

TEST(Collectives, BroadcastFromRoot2) {
  run_inproc(4, [](Communicator& comm) {
    const auto mine = comm.rank() == 2 ? I({5, 6}) : I({0, 0});
    EXPECT_EQ(broadcast(comm, mine, 2), I({5, 6}));
  });
}

TEST(Collectives, GatherConcatenatesInRankOrder) {
  run_inproc(3, [](Communicator& comm) {
    const auto got = gather(comm, I({comm.rank()}), 0);
    if (comm.rank() == 0) {
      EXPECT_EQ(*got, I({0, 1, 2}));
    } else {
      EXPECT_FALSE(got.has_value());
    }
  });
  run_inproc(3, [](Communicator& comm) {
    const auto mine = comm.rank() == 1 ? I({}) : I({comm.rank(), comm.rank()});
    const auto got = gather(comm, mine, 1);
    if (comm.rank() == 1) {
      EXPECT_EQ(*got, I({0, 0, 2, 2}));
    }
  });
}

TEST(Collectives, AllgatherOfRanks) {
  run_inproc(4, [](Communicator& comm) { EXPECT_EQ(allgather(comm, I({comm.rank()})), I({0, 1, 2, 3})); });
}

TEST(Collectives, ScatterAndInverseGather) {
  run_inproc(2, [](Communicator& comm) {
    const std::vector<NumericArray> parts{I({1}), I({2, 3})};
    const auto mine = scatter(comm, parts, DataType::Int64, 0);
    EXPECT_EQ(mine, comm.rank() == 0 ? I({1}) : I({2, 3}));
    const auto back = gather(comm, mine, 0);
    if (comm.rank() == 0) {
      EXPECT_EQ(*back, I({1, 2, 3}));
    }
  });
  run_inproc(3, [](Communicator& comm) {
    const std::vector<NumericArray> parts{F({1.0}), F({}), F({2.0})};
    const auto mine = scatter(comm, parts, DataType::Float64, 2);
    if (comm.rank() == 1) {
      EXPECT_EQ(mine.size(), 0u);
    }
  });
}

TEST(Collectives, AlltoallTransposes) {
  run_inproc(2, [](Communicator& comm) {
    // a=1, b=2, c=3, d=4.
    const std::vector<NumericArray> parts =
        comm.rank() == 0 ? std::vector<NumericArray>{I({1}), I({2})} : std::vector<NumericArray>{I({3}), I({4})};
    const auto got = alltoall(comm, parts);
    if (comm.rank() == 0) {
      EXPECT_EQ(got[0], I({1}));
      EXPECT_EQ(got[1], I({3}));
    } else {
      EXPECT_EQ(got[0], I({2}));
      EXPECT_EQ(got[1], I({4}));
    }
  });
  run_inproc(3, [](Communicator& comm) {
    const std::vector<NumericArray> parts(3, I({}));
    for (const auto& p : alltoall(comm, parts)) EXPECT_EQ(p.size(), 0u);
  });
}

TEST(Collectives, AlltoallBytesTransposesPayloads) {
  run_inproc(3, [](Communicator& comm) {
    std::vector<Bytes> parts;
    for (int d = 0; d < 3; ++d) parts.push_back(Bytes(static_cast<std::size_t>(comm.rank() * 3 + d), static_cast<std::uint8_t>(d)));
    const auto got = alltoall_bytes(comm, parts);
    for (int s = 0; s < 3; ++s) {
      EXPECT_EQ(got[s], Bytes(static_cast<std::size_t>(s * 3 + comm.rank()), static_cast<std::uint8_t>(comm.rank())));
    }
  });
}

TEST(Collectives, ReduceExamples) {
  run_inproc(4, [](Communicator& comm) {
    const auto sum = reduce(comm, I({comm.rank()}), ReduceOp::Sum, 0);
    if (comm.rank() == 0) {
      EXPECT_EQ(*sum, I({6}));
    }
    EXPECT_EQ(allreduce(comm, I({comm.rank()}), ReduceOp::Prod), I({0}));
  });
  run_inproc(3, [](Communicator& comm) {
    const std::vector<NumericArray> in{I({1, 5}), I({2, 4}), I({3, 3})};
    const auto max = reduce(comm, in[comm.rank()], ReduceOp::Max, 0);
    if (comm.rank() == 0) {
      EXPECT_EQ(*max, I({3, 5}));
    }
  });
}

TEST(Collectives, FloatMinMaxOrderNanHighest) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  run_inproc(2, [&](Communicator& comm) {
    const std::vector<NumericArray> in{F({nan, 1.0, -nan, -0.0}), F({1.0, nan, nan, 0.0})};
    const auto mn = allreduce(comm, in[comm.rank()], ReduceOp::Min);
    const auto mx = allreduce(comm, in[comm.rank()], ReduceOp::Max);
    EXPECT_EQ(mn.float64()[0], 1.0);
    EXPECT_EQ(mn.float64()[1], 1.0);
    EXPECT_TRUE(std::isnan(mx.float64()[0]));
    EXPECT_TRUE(std::isnan(mx.float64()[1]));
    // Ties keep the accumulator, so rank 0's payload and sign survive.
    EXPECT_EQ(std::bit_cast<std::uint64_t>(mx.float64()[2]), std::bit_cast<std::uint64_t>(-nan));
    EXPECT_TRUE(std::signbit(mn.float64()[3]));
    EXPECT_TRUE(std::signbit(mx.float64()[3]));
  });
}

TEST(Collectives, FloatSumIsTheRankOrderFold) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int world : {2, 3, 5, 8}) {
    std::vector<NumericArray> in;
    for (int r = 0; r < world; ++r) {
      std::vector<double> v(33);
      for (auto& x : v) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
      in.push_back(F(v));
    }
    const auto want = oracle::fold_arrays(in, ReduceOp::Sum);
    run_inproc(world, [&](Communicator& comm) {
      EXPECT_EQ(allreduce(comm, in[comm.rank()], ReduceOp::Sum), want);
      const auto r = reduce(comm, in[comm.rank()], ReduceOp::Sum, world - 1);
      if (comm.rank() == world - 1) {
        EXPECT_EQ(*r, want);
      }
    });
  }
}

TEST(Collectives, AllgatherEqualsGatherThenBroadcast) {
  std::mt19937_64 rng(4);
  for (int world : {2, 3, 4}) {
    std::vector<NumericArray> in;
    for (int r = 0; r < world; ++r) {
      std::vector<std::int64_t> v(rng() % 9);
      for (auto& x : v) x = static_cast<std::int64_t>(rng());
      in.push_back(I(v));
    }
    run_inproc(world, [&](Communicator& comm) {
      const auto all = allgather(comm, in[comm.rank()]);
      const auto g = gather(comm, in[comm.rank()], 0);
      const std::size_t total = comm.rank() == 0 ? g->size() : 0;
      const auto n = broadcast(comm, I({static_cast<std::int64_t>(total)}), 0).int64()[0];
      const auto b = broadcast(comm, comm.rank() == 0 ? *g : I(std::vector<std::int64_t>(n, 0)), 0);
      EXPECT_EQ(all, b);
    });
  }
}

// Runs body on every rank and counts the ranks on which it threw E.
template <typename E>
int ranks_raising(int world, const std::function<void(Communicator&)>& body) {
  std::atomic<int> raised{0};
  run_inproc(world, [&](Communicator& comm) {
    try {
      body(comm);
    } catch (const E&) {
      ++raised;
    }
  });
  return raised.load();
}

TEST(CollectiveMismatches, ReportedOnEveryRank) {
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(3,
                                              [](Communicator& comm) {
                                                if (comm.rank() == 1) {
                                                  broadcast(comm, F({1.0}), 0);
                                                } else {
                                                  broadcast(comm, I({1}), 0);
                                                }
                                              }),
            3);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(
                3, [](Communicator& comm) { broadcast(comm, I({1}), comm.rank() == 2 ? 1 : 0); }),
            3);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(
                3,
                [](Communicator& comm) {
                  reduce(comm, I(std::vector<std::int64_t>(comm.rank() == 0 ? 2 : 3, 1)), ReduceOp::Sum, 0);
                }),
            3);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(3,
                                              [](Communicator& comm) {
                                                allreduce(comm, I({1}),
                                                          comm.rank() == 0 ? ReduceOp::Min : ReduceOp::Max);
                                              }),
            3);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(3,
                                              [](Communicator& comm) {
                                                const std::vector<NumericArray> parts(2, I({1}));
                                                scatter(comm, parts, DataType::Int64, 0);
                                              }),
            3);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(3,
                                              [](Communicator& comm) {
                                                const std::vector<NumericArray> parts(
                                                    comm.rank() == 1 ? 2 : 3, I({1}));
                                                alltoall(comm, parts);
                                              }),
            3);
}

TEST(CollectiveMismatches, RootOutOfRange) {
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(2, [](Communicator& comm) { broadcast(comm, I({1}), 2); }), 2);
  EXPECT_EQ(ranks_raising<CollectiveMismatch>(2, [](Communicator& comm) { gather(comm, I({1}), -1); }), 2);
}

TEST(CollectivesProperty, OracleSuiteSmallWorlds) {
  app::SuiteOptions options;
  options.collective_lengths = {0, 1, 7, 64};
  for (int world : {1, 2, 3, 5}) {
    testing::in_world(world, [&](WorkerContext& ctx) {
      const auto r = app::suite_collectives(ctx, options);
      EXPECT_TRUE(r.passed) << "W=" << world << ": " << r.detail;
    });
  }
}

}  // namespace
}  // namespace hptmt::coll
