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

// Multidimensional scaling over a row-partitioned distance matrix. Table
// operators produce the point set, array collectives drive a SMACOF loop.
// Every numeric result is bit-identical for any world size.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hptmt/context.hpp"
#include "hptmt/columnar.hpp"

namespace hptmt::mds {

struct RowRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const { return hi - lo; }
};

/// Balanced split of n rows: the first n mod W ranks get one extra row.
RowRange owned_rows(std::size_t n, int world_size, int rank);

/// Rows [range.lo, range.hi) of the n x n Euclidean distance matrix.
struct DistanceBlock {
  int owner = 0;
  std::size_t n = 0;
  RowRange range;
  std::vector<double> values;

  double at(std::size_t local_row, std::size_t col) const { return values[local_row * n + col]; }
};

/// Global point indexing is the rank-order concatenation of the partitions.
/// Feature columns must be Int64 or Float64 with no nulls.
DistanceBlock compute_distance_block(WorkerContext& ctx, const Table& points,
                                     std::span<const std::string> feature_columns);

/// Row-major n x dims coordinates, replicated on every rank.
struct Embedding {
  std::size_t n = 0;
  std::size_t dims = 0;
  std::vector<double> coords;
};

/// Starting embedding: coordinate c (row-major index) is the (c+1)-th
/// SplitMix64 output for `seed`, mapped to [-1, 1).
Embedding initial_embedding(std::size_t n, std::size_t dims, std::uint64_t seed);

/// One Guttman transform. Returns this rank's rows of the next embedding.
std::vector<double> smacof_step(WorkerContext& ctx, const DistanceBlock& block, const Embedding& x);

/// Sum over pairs i < j of (delta_ij - d_ij(x))^2.
double stress(WorkerContext& ctx, const DistanceBlock& block, const Embedding& x);

struct MdsOptions {
  std::size_t dims = 2;
  int max_iters = 100;
  /// Stop when (previous - current) / previous falls below this.
  double tolerance = 1e-9;
};

struct MdsResult {
  Embedding embedding;
  /// Stress after each step.
  std::vector<double> stress_history;
};

MdsResult run_mds(WorkerContext& ctx, const Table& points, std::span<const std::string> feature_columns,
                  const MdsOptions& options);

}  // namespace hptmt::mds
