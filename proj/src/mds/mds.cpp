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

#include "hptmt/mds.hpp"

#include <cmath>

#include "hptmt/collectives.hpp"
#include "hptmt/kernels.hpp"

namespace hptmt::mds {

RowRange owned_rows(std::size_t n, int world_size, int rank) {
  const auto w = static_cast<std::size_t>(world_size);
  const auto r = static_cast<std::size_t>(rank);
  const std::size_t base = n / w;
  const std::size_t extra = n % w;
  const std::size_t lo = r * base + std::min(r, extra);
  return {lo, lo + base + (r < extra ? 1 : 0)};
}

DistanceBlock compute_distance_block(WorkerContext& ctx, const Table& points,
                                     std::span<const std::string> feature_columns) {
  if (feature_columns.empty()) throw InvalidArgument("need at least one feature column");
  const auto cols = resolve_columns(points.schema(), feature_columns);
  const std::size_t f = cols.size();
  const std::size_t local_n = points.num_rows();
  std::vector<double> local(local_n * f);
  for (std::size_t k = 0; k < f; ++k) {
    const ColumnArray& col = points.column(cols[k]);
    if (!is_numeric(col.type())) {
      throw InvalidArgument("feature column '" + feature_columns[k] + "' is " + to_string(col.type()));
    }
    if (col.null_count() > 0) throw InvalidArgument("feature column '" + feature_columns[k] + "' has nulls");
    for (std::size_t i = 0; i < local_n; ++i) {
      local[i * f + k] = col.type() == DataType::Int64 ? static_cast<double>(col.int64_at(i)) : col.float64_at(i);
    }
  }
  const auto all = coll::allgather(ctx.comm(), coll::NumericArray(std::move(local)));
  const auto& features = all.float64();
  const std::size_t n = features.size() / f;

  DistanceBlock block;
  block.owner = ctx.rank();
  block.n = n;
  block.range = owned_rows(n, ctx.world_size(), ctx.rank());
  block.values.resize(block.range.size() * n);
  kernels::distance_rows({features, n, f}, block.range.lo, block.range.hi, block.values, ctx.threads());
  return block;
}

Embedding initial_embedding(std::size_t n, std::size_t dims, std::uint64_t seed) {
  Embedding x{n, dims, std::vector<double>(n * dims)};
  for (std::size_t c = 0; c < x.coords.size(); ++c) {
    std::uint64_t z = seed + (static_cast<std::uint64_t>(c) + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const double unit = static_cast<double>(z >> 11) * 0x1.0p-53;
    x.coords[c] = 2.0 * unit - 1.0;
  }
  return x;
}

namespace {

void check_shapes(const DistanceBlock& block, const Embedding& x) {
  if (x.n != block.n || x.coords.size() != x.n * x.dims) {
    throw InvalidArgument("embedding does not match the distance block");
  }
}

}  // namespace

std::vector<double> smacof_step(WorkerContext& ctx, const DistanceBlock& block, const Embedding& x) {
  check_shapes(block, x);
  std::vector<double> rows(block.range.size() * x.dims);
  const bool finite = kernels::guttman_rows(block.values, {x.coords, x.n, x.dims}, block.range.lo, block.range.hi,
                                            rows, ctx.threads());
  // Every rank must agree on failure, otherwise the others hang in the next
  // collective.
  const auto bad = coll::allreduce(ctx.comm(), coll::NumericArray(std::vector<std::int64_t>{finite ? 0 : 1}),
                                   coll::ReduceOp::Max);
  if (bad.int64()[0] != 0) throw NumericError("non-finite coordinate in the Guttman transform");
  return rows;
}

double stress(WorkerContext& ctx, const DistanceBlock& block, const Embedding& x) {
  check_shapes(block, x);
  std::vector<double> per_row(x.n, 0.0);
  kernels::row_stress(block.values, {x.coords, x.n, x.dims}, block.range.lo, block.range.hi,
                      std::span<double>(per_row).subspan(block.range.lo, block.range.size()), ctx.threads());
  // Each slot is non-zero on exactly one rank, so the reduction is exact and
  // the final sum runs in the same order for every world size.
  const auto all = coll::allreduce(ctx.comm(), coll::NumericArray(std::move(per_row)), coll::ReduceOp::Sum);
  double total = 0.0;
  for (double s : all.float64()) total += s;
  if (!std::isfinite(total)) throw NumericError("non-finite stress");
  return total;
}

MdsResult run_mds(WorkerContext& ctx, const Table& points, std::span<const std::string> feature_columns,
                  const MdsOptions& options) {
  if (options.dims < 1) throw InvalidArgument("dims must be at least 1");
  if (options.max_iters < 1) throw InvalidArgument("iterations must be at least 1");
  const DistanceBlock block = compute_distance_block(ctx, points, feature_columns);

  MdsResult result;
  result.embedding = initial_embedding(block.n, options.dims, ctx.seed());
  double previous = stress(ctx, block, result.embedding);
  for (int it = 0; it < options.max_iters; ++it) {
    const auto rows = smacof_step(ctx, block, result.embedding);
    const auto all = coll::allgather(ctx.comm(), coll::NumericArray(rows));
    result.embedding.coords = all.float64();
    const double current = stress(ctx, block, result.embedding);
    result.stress_history.push_back(current);
    if (current == 0.0 || previous == 0.0) break;
    if ((previous - current) / previous < options.tolerance) break;
    previous = current;
  }
  return result;
}

}  // namespace hptmt::mds
