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

#include <bit>
#include <cmath>
#include <mutex>
#include <random>

#include "hptmt/kernels.hpp"
#include "hptmt/mds.hpp"
#include "test_util.hpp"

namespace hptmt::mds {
namespace {

using testing::floats;
using testing::in_world;
using testing::ints;
using testing::make_table;
using testing::share;

const std::vector<std::string> kXY{"x", "y"};

Table random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  ColumnBuilder x(DataType::Float64), y(DataType::Float64);
  for (std::size_t i = 0; i < n; ++i) {
    x.append_float64(u(rng));
    y.append_float64(u(rng));
  }
  return make_table({{"x", x.finish()}, {"y", y.finish()}});
}

std::vector<std::uint64_t> bits(const std::vector<double>& v) {
  std::vector<std::uint64_t> out;
  for (double d : v) out.push_back(std::bit_cast<std::uint64_t>(d));
  return out;
}

// Straight transcription of the uniform-weight Guttman transform over the full
// distance matrix.
std::vector<double> guttman_reference(const std::vector<std::vector<double>>& delta, const Embedding& x) {
  const std::size_t n = x.n, d = x.dims;
  auto coord = [&](std::size_t i, std::size_t k) { return x.coords[i * d + k]; };
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += (coord(i, k) - coord(j, k)) * (coord(i, k) - coord(j, k));
    return std::sqrt(s);
  };
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> b(n, 0.0);
    double bii = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dij = dist(i, j);
      if (dij > 0.0) b[j] = -delta[i][j] / dij;
      bii -= b[j];
    }
    b[i] = bii;
    for (std::size_t k = 0; k < d; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += b[j] * coord(j, k);
      out[i * d + k] = s / static_cast<double>(n);
    }
  }
  return out;
}

TEST(OwnedRows, TileWithoutOverlap) {
  for (std::size_t n : {0, 1, 5, 17, 64}) {
    for (int w : {1, 2, 3, 8}) {
      std::size_t next = 0;
      for (int r = 0; r < w; ++r) {
        const auto range = owned_rows(n, w, r);
        EXPECT_EQ(range.lo, next);
        EXPECT_LE(range.size(), n / w + 1);
        next = range.hi;
      }
      EXPECT_EQ(next, n);
    }
  }
}

TEST(InitialEmbedding, SplitMix64Stream) {
  // First SplitMix64 outputs for seed 0.
  const std::uint64_t expected[] = {0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL, 0x06c45d188009454fULL};
  const auto x = initial_embedding(3, 1, 0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(x.coords[i], 2.0 * (static_cast<double>(expected[i] >> 11) * 0x1.0p-53) - 1.0);
  }
  EXPECT_EQ(bits(initial_embedding(4, 3, 9).coords), bits(initial_embedding(4, 3, 9).coords));
  EXPECT_NE(bits(initial_embedding(4, 3, 9).coords), bits(initial_embedding(4, 3, 10).coords));
}

TEST(DistanceBlock, ThreeFourFive) {
  in_world(1, [](WorkerContext& ctx) {
    const auto t = make_table({{"x", floats({0.0, 3.0})}, {"y", ints({0, 4})}});
    const auto b = compute_distance_block(ctx, t, kXY);
    EXPECT_EQ(b.values, (std::vector<double>{0.0, 5.0, 5.0, 0.0}));
  });
}

TEST(DistanceBlock, IdenticalPointsAreAllZero) {
  in_world(2, [](WorkerContext& ctx) {
    const auto t = make_table({{"x", floats({1.5, 1.5})}, {"y", floats({-2.0, -2.0})}});
    const auto b = compute_distance_block(ctx, t, kXY);
    EXPECT_EQ(b.n, 4u);
    for (double v : b.values) EXPECT_EQ(v, 0.0);
  });
}

TEST(DistanceBlock, StackedBlocksMatchSingleRank) {
  std::mt19937_64 rng(41);
  const auto points = random_points(rng, 23);
  std::vector<double> whole;
  in_world(1, [&](WorkerContext& ctx) { whole = compute_distance_block(ctx, points, kXY).values; });
  for (int w : {2, 4, 8}) {
    std::vector<std::vector<double>> blocks(w);
    in_world(w, [&](WorkerContext& ctx) {
      const auto b = compute_distance_block(ctx, share(points, w, ctx.rank()), kXY);
      EXPECT_EQ(b.range.lo, owned_rows(23, w, ctx.rank()).lo);
      blocks[ctx.rank()] = b.values;
    });
    std::vector<double> stacked;
    for (const auto& b : blocks) stacked.insert(stacked.end(), b.begin(), b.end());
    EXPECT_EQ(bits(stacked), bits(whole)) << "W=" << w;
  }
}

TEST(DistanceBlock, RejectsBadFeatures) {
  in_world(1, [](WorkerContext& ctx) {
    const auto t = make_table({{"x", floats({1.0, std::nullopt})}, {"s", testing::strs({"a", "b"})}});
    const std::vector<std::string> x{"x"}, s{"s"}, none{};
    EXPECT_THROW(compute_distance_block(ctx, t, x), InvalidArgument);
    EXPECT_THROW(compute_distance_block(ctx, t, s), InvalidArgument);
    EXPECT_THROW(compute_distance_block(ctx, t, none), InvalidArgument);
  });
}

TEST(SmacofStep, PerfectEmbeddingIsAFixedPoint) {
  // Centred, so the transform maps it to itself.
  const auto t = make_table({{"x", floats({-1.0, 1.0, 0.0, 0.0})}, {"y", floats({0.0, 0.0, 2.0, -2.0})}});
  in_world(2, [&](WorkerContext& ctx) {
    const auto block = compute_distance_block(ctx, share(t, 2, ctx.rank()), kXY);
    const Embedding x{4, 2, {-1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, -2.0}};
    const auto rows = smacof_step(ctx, block, x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_NEAR(rows[i], x.coords[block.range.lo * 2 + i], 1e-12);
    }
  });
}

TEST(SmacofStep, CoincidentPointsContributeNothing) {
  const auto t = make_table({{"x", floats({0.0, 1.0, 2.0})}, {"y", floats({0.0, 0.0, 0.0})}});
  in_world(1, [&](WorkerContext& ctx) {
    const auto block = compute_distance_block(ctx, t, kXY);
    const Embedding x{3, 2, {0.5, 0.5, 0.5, 0.5, -1.0, 0.0}};
    const auto rows = smacof_step(ctx, block, x);
    for (double v : rows) EXPECT_TRUE(std::isfinite(v));
    std::vector<std::vector<double>> delta(3, std::vector<double>(3));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) delta[i][j] = block.at(i, j);
    }
    EXPECT_EQ(bits(rows), bits(guttman_reference(delta, x)));
  });
}

TEST(SmacofStep, MatchesSerialReferenceBitForBit) {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 5; ++round) {
    const auto points = random_points(rng, 5);
    const auto x = initial_embedding(5, 2, rng());
    std::vector<std::vector<double>> delta(5, std::vector<double>(5));
    in_world(1, [&](WorkerContext& ctx) {
      const auto b = compute_distance_block(ctx, points, kXY);
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) delta[i][j] = b.at(i, j);
      }
    });
    const auto want = guttman_reference(delta, x);
    for (int w : {1, 2, 4}) {
      std::vector<std::vector<double>> rows(w);
      in_world(w, [&](WorkerContext& ctx) {
        const auto b = compute_distance_block(ctx, share(points, w, ctx.rank()), kXY);
        rows[ctx.rank()] = smacof_step(ctx, b, x);
      });
      std::vector<double> all;
      for (const auto& r : rows) all.insert(all.end(), r.begin(), r.end());
      EXPECT_EQ(bits(all), bits(want)) << "W=" << w;
    }
  }
}

TEST(RunMds, CollinearPointsRecoverUnitGaps) {
  const auto t = make_table({{"p", floats({0.0, 1.0, 2.0})}});
  const std::vector<std::string> p{"p"};
  in_world(1, [&](WorkerContext& ctx) {
    const auto r = run_mds(ctx, t, p, {.dims = 1, .max_iters = 200, .tolerance = 0.0});
    EXPECT_LT(r.stress_history.back(), 1e-6);
    auto c = r.embedding.coords;
    std::sort(c.begin(), c.end());
    EXPECT_NEAR(c[1] - c[0], 1.0, 1e-3);
    EXPECT_NEAR(c[2] - c[1], 1.0, 1e-3);
  }, {.seed = 0});
}

TEST(RunMds, SingleIteration) {
  std::mt19937_64 rng(43);
  const auto points = random_points(rng, 8);
  in_world(2, [&](WorkerContext& ctx) {
    const auto r = run_mds(ctx, share(points, 2, ctx.rank()), kXY, {.dims = 2, .max_iters = 1});
    EXPECT_EQ(r.stress_history.size(), 1u);
  });
}

TEST(RunMds, BitIdenticalAcrossWorldSizesAndMonotone) {
  std::mt19937_64 rng(44);
  const auto points = random_points(rng, 30);
  const MdsOptions options{.dims = 2, .max_iters = 40, .tolerance = 0.0};
  std::vector<std::uint64_t> history, coords;
  for (int w : {1, 2, 4, 8}) {
    std::mutex mu;
    in_world(w, [&](WorkerContext& ctx) {
      const auto r = run_mds(ctx, share(points, w, ctx.rank()), kXY, options);
      std::lock_guard lock(mu);
      if (history.empty()) {
        history = bits(r.stress_history);
        coords = bits(r.embedding.coords);
        for (std::size_t i = 1; i < r.stress_history.size(); ++i) {
          const double prev = r.stress_history[i - 1];
          EXPECT_LE(r.stress_history[i], prev + 1e-9 * std::max(prev, 1.0));
        }
      } else {
        EXPECT_EQ(bits(r.stress_history), history) << "W=" << w << " rank " << ctx.rank();
        EXPECT_EQ(bits(r.embedding.coords), coords) << "W=" << w << " rank " << ctx.rank();
      }
    }, {.seed = 5});
  }
}

TEST(RunMds, Errors) {
  const auto huge = make_table({{"x", floats({1e200, -1e200})}, {"y", floats({0.0, 0.0})}});
  in_world(1, [&](WorkerContext& ctx) {
    EXPECT_THROW(run_mds(ctx, huge, kXY, {}), NumericError);
    EXPECT_THROW(run_mds(ctx, huge, kXY, {.dims = 0}), InvalidArgument);
    EXPECT_THROW(run_mds(ctx, huge, kXY, {.max_iters = 0}), InvalidArgument);
  });
}

TEST(Kernels, OpenMpMatchesSerial) {
  std::mt19937_64 rng(45);
  const std::size_t n = 97, d = 3;
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> pts(n * d), x(n * d);
  for (auto& v : pts) v = u(rng);
  for (auto& v : x) v = u(rng);
  const kernels::MatrixView pv{pts, n, d}, xv{x, n, d};
  const std::size_t lo = 11, hi = 80;
  std::vector<double> delta((hi - lo) * n);
  kernels::serial::distance_rows(pv, lo, hi, delta);
  for (int threads : {1, 2, 3, 8}) {
    std::vector<double> dist((hi - lo) * n), g1((hi - lo) * d), g2((hi - lo) * d), s1(hi - lo), s2(hi - lo);
    kernels::distance_rows(pv, lo, hi, dist, threads);
    EXPECT_EQ(bits(dist), bits(delta));
    EXPECT_TRUE(kernels::serial::guttman_rows(delta, xv, lo, hi, g1));
    EXPECT_TRUE(kernels::guttman_rows(delta, xv, lo, hi, g2, threads));
    EXPECT_EQ(bits(g1), bits(g2));
    kernels::serial::row_stress(delta, xv, lo, hi, s1);
    kernels::row_stress(delta, xv, lo, hi, s2, threads);
    EXPECT_EQ(bits(s1), bits(s2));
  }
  const auto keys = encode_keys(make_table({{"k", ints({1, 2, 3, std::nullopt, 5})}}), std::vector<std::size_t>{0});
  std::vector<std::uint64_t> h1(5), h2(5);
  std::vector<std::uint32_t> p1(5), p2(5);
  kernels::serial::key_hashes(keys, h1);
  kernels::key_hashes(keys, h2, 4);
  kernels::serial::partition_destinations(keys, 7, p1);
  kernels::partition_destinations(keys, 7, p2, 4);
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(p1, p2);
  std::vector<double> wrong(3);
  EXPECT_THROW(kernels::row_stress(delta, xv, lo, hi, wrong, 2), InvalidArgument);
}

}  // namespace
}  // namespace hptmt::mds
