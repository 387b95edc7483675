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
#include <mutex>
#include <random>
#include <set>

#include "hptmt/app.hpp"
#include "hptmt/dist_table.hpp"
#include "hptmt/oracle.hpp"
#include "test_util.hpp"

namespace hptmt {
namespace {

using testing::floats;
using testing::in_world;
using testing::ints;
using testing::make_table;
using testing::share;
using testing::strs;

/// Runs body on every rank and returns the per-rank results in rank order.
std::vector<Table> per_rank(int world, const std::function<Table(WorkerContext&)>& body) {
  std::vector<Table> out(static_cast<std::size_t>(world));
  in_world(world, [&](WorkerContext& ctx) { out[static_cast<std::size_t>(ctx.rank())] = body(ctx); });
  return out;
}

TEST(PartitionOf, MatchesReferenceHash) {
  std::mt19937_64 rng(21);
  const Schema schema({{"i", DataType::Int64}, {"s", DataType::Utf8}, {"f", DataType::Float64}});
  const auto t = oracle::random_table(rng, schema, 300);
  const auto rows = oracle::rows_of(t);
  const std::vector<std::size_t> cols{0, 1, 2};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto want = oracle::fnv1a_reference(oracle::encode_key_reference(rows[i], cols));
    for (int w : {1, 2, 3, 8}) {
      ASSERT_EQ(partition_of(encode_row_key(t, i, cols).bytes, w), static_cast<int>(want % static_cast<std::uint64_t>(w)));
    }
  }
}

TEST(Shuffle, ColocatesKeysOnTheirOwner) {
  std::mt19937_64 rng(22);
  const Schema schema({{"k", DataType::Int64}, {"v", DataType::Utf8}});
  const auto input = oracle::random_table(rng, schema, 500);
  const int world = 4;
  const std::vector<std::string> keys{"k"};
  const auto out = per_rank(world, [&](WorkerContext& ctx) { return shuffle(ctx, share(input, world, ctx.rank()), keys); });
  EXPECT_TRUE(oracle::equal_unordered(concat_tables(out), input));
  const std::vector<std::size_t> kcol{0};
  for (int r = 0; r < world; ++r) {
    for (std::size_t i = 0; i < out[r].num_rows(); ++i) {
      ASSERT_EQ(partition_of(encode_row_key(out[r], i, kcol).bytes, world), r);
    }
  }
}

TEST(Shuffle, NullKeysCanStayLocal) {
  const int world = 3;
  const auto input = make_table({{"k", ints({std::nullopt, 1, std::nullopt, 2, std::nullopt, 3})}});
  const std::vector<std::string> keys{"k"};
  const auto out = per_rank(world, [&](WorkerContext& ctx) {
    return shuffle(ctx, share(input, world, ctx.rank()), keys, {.keep_null_keys_local = true});
  });
  for (int r = 0; r < world; ++r) {
    EXPECT_EQ(out[r].column(0).null_count(), 1u) << r;
  }
}

TEST(Shuffle, MoreRanksThanRows) {
  const auto input = make_table({{"k", ints({5})}});
  const std::vector<std::string> keys{"k"};
  const auto out = per_rank(8, [&](WorkerContext& ctx) { return shuffle(ctx, share(input, 8, ctx.rank()), keys); });
  EXPECT_TRUE(oracle::equal_unordered(concat_tables(out), input));
}

TEST(DistAggregate, SumOfRanks) {
  in_world(4, [](WorkerContext& ctx) {
    const auto t = make_table({{"v", ints({ctx.rank()})}});
    const std::vector<rel::Aggregate> aggs{{"v", rel::AggFn::Sum, "s"}};
    const auto got = dist_aggregate(ctx, t, aggs);
    ASSERT_EQ(got.num_rows(), 1u);
    EXPECT_EQ(got.column(0).int64_at(0), 6);
  });
}

TEST(DistAggregate, EmptyGlobalInput) {
  in_world(3, [](WorkerContext& ctx) {
    const auto t = make_table({{"v", floats({})}});
    const std::vector<rel::Aggregate> aggs{
        {"v", rel::AggFn::Min, "mn"}, {"v", rel::AggFn::Count, "c"}, {"v", rel::AggFn::Sum, "s"}};
    const auto got = dist_aggregate(ctx, t, aggs);
    EXPECT_TRUE(got.column(0).is_null(0));
    EXPECT_EQ(got.column(1).int64_at(0), 0);
    EXPECT_TRUE(got.column(2).is_null(0));
  });
}

TEST(DistAggregate, FloatSumIsRankOrderFoldOfLocalSums) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int world : {2, 3, 4, 8}) {
    std::vector<std::vector<double>> parts(world);
    for (auto& p : parts) {
      p.resize(rng() % 200);
      for (auto& x : p) x = u(rng) * std::pow(2.0, static_cast<int>(rng() % 60) - 30);
    }
    double want = 0;
    for (const auto& p : parts) {
      double local = 0;
      for (double x : p) local += x;
      want += local;
    }
    in_world(world, [&](WorkerContext& ctx) {
      ColumnBuilder b(DataType::Float64);
      for (double x : parts[ctx.rank()]) b.append_float64(x);
      const auto t = make_table({{"v", b.finish()}});
      const std::vector<rel::Aggregate> aggs{{"v", rel::AggFn::Sum, "s"}};
      const auto got = dist_aggregate(ctx, t, aggs).column(0).float64_at(0);
      EXPECT_EQ(std::bit_cast<std::uint64_t>(got), std::bit_cast<std::uint64_t>(want)) << "W=" << world;
    });
  }
}

TEST(DistAggregate, RejectsNonNumeric) {
  std::atomic<int> raised{0};
  in_world(2, [&](WorkerContext& ctx) {
    const auto t = make_table({{"s", strs({"a"})}});
    const std::vector<rel::Aggregate> aggs{{"s", rel::AggFn::Sum, "x"}};
    try {
      dist_aggregate(ctx, t, aggs);
    } catch (const InvalidArgument&) {
      ++raised;
    }
  });
  EXPECT_EQ(raised.load(), 2);
}

TEST(DistGroupBy, DistinctKeysCountOne) {
  const int world = 4;
  ColumnBuilder k(DataType::Int64);
  for (int i = 0; i < 100; ++i) k.append_int64(i * 7);
  const auto input = make_table({{"k", k.finish()}});
  const rel::AggSpec spec{{"k"}, {{"k", rel::AggFn::Count, "n"}}};
  const auto out = concat_tables(per_rank(world, [&](WorkerContext& ctx) {
    return dist_groupby_aggregate(ctx, share(input, world, ctx.rank()), spec);
  }));
  EXPECT_EQ(out.num_rows(), 100u);
  for (std::size_t i = 0; i < out.num_rows(); ++i) ASSERT_EQ(out.column(1).int64_at(i), 1);
}

TEST(DistSetOps, DifferenceWithSelfIsEmpty) {
  std::mt19937_64 rng(24);
  const Schema schema({{"a", DataType::Int64}, {"b", DataType::Float64}});
  const auto t = oracle::random_table(rng, schema, 200);
  const int world = 4;
  const auto out = per_rank(world, [&](WorkerContext& ctx) {
    // Different partitionings of the same rows.
    return dist_difference(ctx, share(t, world, ctx.rank()), share(t, world, world - 1 - ctx.rank()));
  });
  for (const auto& part : out) EXPECT_EQ(part.num_rows(), 0u);
}

TEST(DistSetOps, SchemaMismatchRaisesEverywhere) {
  std::atomic<int> raised{0};
  in_world(3, [&](WorkerContext& ctx) {
    try {
      dist_union(ctx, make_table({{"x", ints({1})}}), make_table({{"x", floats({1.0})}}));
    } catch (const InvalidArgument&) {
      ++raised;
    }
  });
  EXPECT_EQ(raised.load(), 3);
}

TEST(DistSort, GlobalOrderAcrossRanks) {
  std::mt19937_64 rng(25);
  const Schema schema({{"f", DataType::Float64}, {"i", DataType::Int64}});
  for (int world : {1, 2, 3, 5}) {
    const auto input = oracle::random_table(rng, schema, 400);
    const rel::SortSpec spec{{{"f", rel::SortOrder::Desc}, {"i"}}};
    const auto out = per_rank(world, [&](WorkerContext& ctx) { return dist_sort(ctx, share(input, world, ctx.rank()), spec); });
    const rel::RowComparator cmp(schema, spec);
    for (int r = 0; r < world; ++r) {
      for (std::size_t i = 1; i < out[r].num_rows(); ++i) ASSERT_LE(cmp.compare(out[r], i - 1, out[r], i), 0);
    }
    const auto all = concat_tables(out);
    EXPECT_TRUE(oracle::equal_unordered(all, input));
    for (std::size_t i = 1; i < all.num_rows(); ++i) ASSERT_LE(cmp.compare(all, i - 1, all, i), 0) << "W=" << world;
  }
}

TEST(DistProperty, ShuffleAndOperatorSuites) {
  app::SuiteOptions options;
  options.seed = 9;
  options.dist_instances = 3;
  options.dist_max_rows = 3000;
  options.shuffle_instances = 10;
  for (int world : {1, 2, 4}) {
    in_world(world, [&](WorkerContext& ctx) {
      for (const auto& r : {app::suite_shuffle(ctx, options), app::suite_dist_ops(ctx, options),
                            app::suite_aggregate_bytes(ctx, options)}) {
        EXPECT_TRUE(r.passed) << r.name << " W=" << world << ": " << r.detail;
      }
    });
  }
}

TEST(WorkerContext, RejectsZeroBudget) {
  run_inproc(1, [](Communicator& comm) {
    ContextOptions options;
    options.memory_budget = 0;
    EXPECT_THROW(WorkerContext(comm, options), InvalidArgument);
  });
}

}  // namespace
}  // namespace hptmt
