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

#include "hptmt/dist_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <thread>

#include "dist_table/internal.hpp"
#include "hptmt/collectives.hpp"
#include "hptmt/kernels.hpp"
#include "hptmt/wire.hpp"

namespace hptmt {

WorkerContext::WorkerContext(Communicator& comm, ContextOptions options)
    : comm_(comm), options_(std::move(options)) {
  if (options_.memory_budget == 0) throw InvalidArgument("memory_budget must be positive");
  if (options_.threads > 0) {
    threads_ = options_.threads;
  } else {
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads_ = std::max(1, hw / comm.world_size());
  }
}

int partition_of(std::string_view row_key, int world_size) {
  return static_cast<int>(fnv1a64(row_key) % static_cast<std::uint64_t>(world_size));
}

namespace detail {

void check_schema_agreement(WorkerContext& ctx, const Schema& schema, std::span<const std::size_t> key_columns,
                            const char* op) {
  std::uint64_t mine = schema_fingerprint(schema);
  for (auto c : key_columns) mine = (mine ^ (c + 1)) * 0x100000001b3ULL;
  Bytes payload(8);
  std::memcpy(payload.data(), &mine, 8);
  const auto all = coll::allgather_bytes(ctx.comm(), payload);
  for (std::size_t r = 0; r < all.size(); ++r) {
    if (all[r] != payload) {
      throw InvalidArgument(std::string(op) + ": rank " + std::to_string(r) +
                            " passed a different schema or key list than rank " + std::to_string(ctx.rank()));
    }
  }
}

std::vector<std::vector<RowIndex>> bucket_rows(WorkerContext& ctx, const Table& table,
                                               std::span<const std::size_t> key_columns, bool keep_null_keys_local) {
  const int w = ctx.world_size();
  std::vector<std::vector<RowIndex>> buckets(w);
  const std::size_t n = table.num_rows();
  if (w == 1) {
    buckets[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) buckets[0][i] = static_cast<RowIndex>(i);
    return buckets;
  }
  const EncodedKeys keys = encode_keys(table, key_columns);
  std::vector<std::uint32_t> dest(n);
  kernels::partition_destinations(keys, w, dest, ctx.threads());
  for (std::size_t i = 0; i < n; ++i) {
    const int d = keep_null_keys_local && keys.has_null[i] ? ctx.rank() : static_cast<int>(dest[i]);
    buckets[d].push_back(static_cast<RowIndex>(i));
  }
  return buckets;
}

Table exchange_parts(WorkerContext& ctx, std::vector<Table> parts, const Schema& schema) {
  const int w = ctx.world_size();
  const int me = ctx.rank();
  std::vector<Bytes> outgoing(w);
  {
    PhaseTimer t(ctx.phase_times().partition_ms);
    for (int d = 0; d < w; ++d) {
      if (d != me && parts[d].num_rows() > 0) outgoing[d] = serialize_table(parts[d]);
    }
  }
  std::vector<Table> received(w);
  {
    PhaseTimer t(ctx.phase_times().exchange_ms);
    auto incoming = coll::alltoall_bytes(ctx.comm(), std::move(outgoing));
    for (int s = 0; s < w; ++s) {
      if (s == me) {
        received[s] = std::move(parts[s]);
      } else if (incoming[s].empty()) {
        received[s] = Table::empty(schema);
      } else {
        received[s] = deserialize_table(incoming[s]);
        if (received[s].schema() != schema) {
          throw InvalidArgument("shuffle: rank " + std::to_string(s) + " sent schema " +
                                received[s].schema().to_string());
        }
      }
    }
  }
  return concat_tables(received, &schema);
}

Table shuffle_columns(WorkerContext& ctx, const Table& table, std::span<const std::size_t> key_columns,
                      bool keep_null_keys_local) {
  check_schema_agreement(ctx, table.schema(), key_columns, "shuffle");
  if (ctx.world_size() == 1) return table;
  std::vector<Table> parts(ctx.world_size());
  {
    PhaseTimer t(ctx.phase_times().partition_ms);
    auto buckets = bucket_rows(ctx, table, key_columns, keep_null_keys_local);
    for (int d = 0; d < ctx.world_size(); ++d) parts[d] = take(table, buckets[d]);
  }
  return exchange_parts(ctx, std::move(parts), table.schema());
}

}  // namespace detail

Table shuffle(WorkerContext& ctx, const Table& table, std::span<const std::string> key_columns,
              ShuffleOptions options) {
  const auto cols = resolve_columns(table.schema(), key_columns);
  return detail::shuffle_columns(ctx, table, cols, options.keep_null_keys_local);
}

namespace {

std::vector<std::size_t> every_column(const Table& t) {
  std::vector<std::size_t> cols(t.num_columns());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  return cols;
}

template <typename LocalOp>
Table dist_set_op(WorkerContext& ctx, const Table& a, const Table& b, const char* name, LocalOp op) {
  if (a.schema() != b.schema()) {
    throw InvalidArgument(std::string(name) + ": schema mismatch (" + a.schema().to_string() + " vs " +
                          b.schema().to_string() + ")");
  }
  const Table sa = detail::shuffle_columns(ctx, a, every_column(a), false);
  const Table sb = detail::shuffle_columns(ctx, b, every_column(b), false);
  PhaseTimer t(ctx.phase_times().local_ms);
  return op(sa, sb);
}

}  // namespace

Table dist_union(WorkerContext& ctx, const Table& a, const Table& b) {
  return dist_set_op(ctx, a, b, "union", rel::set_union);
}

Table dist_difference(WorkerContext& ctx, const Table& a, const Table& b) {
  return dist_set_op(ctx, a, b, "difference", rel::set_difference);
}

Table dist_intersect(WorkerContext& ctx, const Table& a, const Table& b) {
  return dist_set_op(ctx, a, b, "intersect", rel::set_intersect);
}

Table dist_join(WorkerContext& ctx, const Table& a, const Table& b, const rel::JoinSpec& spec) {
  rel::join_schema(a.schema(), b.schema(), spec);  // validates keys before any exchange
  const auto left = resolve_columns(a.schema(), spec.left_keys);
  const auto right = resolve_columns(b.schema(), spec.right_keys);
  const Table sa = detail::shuffle_columns(ctx, a, left, true);
  const Table sb = detail::shuffle_columns(ctx, b, right, true);
  PhaseTimer t(ctx.phase_times().local_ms);
  return rel::join(sa, sb, spec);
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

coll::ReduceOp reduce_op_for(rel::AggFn fn) {
  switch (fn) {
    case rel::AggFn::Sum: return coll::ReduceOp::Sum;
    case rel::AggFn::Prod: return coll::ReduceOp::Prod;
    case rel::AggFn::Min: return coll::ReduceOp::Min;
    case rel::AggFn::Max: return coll::ReduceOp::Max;
    case rel::AggFn::Count: return coll::ReduceOp::Sum;
  }
  return coll::ReduceOp::Sum;
}

double float_identity(coll::ReduceOp op) {
  switch (op) {
    case coll::ReduceOp::Sum: return 0.0;
    case coll::ReduceOp::Prod: return 1.0;
    case coll::ReduceOp::Min: return std::numeric_limits<double>::quiet_NaN();
    case coll::ReduceOp::Max: return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

std::int64_t int_identity(coll::ReduceOp op) {
  switch (op) {
    case coll::ReduceOp::Sum: return 0;
    case coll::ReduceOp::Prod: return 1;
    case coll::ReduceOp::Min: return std::numeric_limits<std::int64_t>::max();
    case coll::ReduceOp::Max: return std::numeric_limits<std::int64_t>::min();
  }
  return 0;
}

rel::AggFn combine_fn(rel::AggFn fn) { return fn == rel::AggFn::Count ? rel::AggFn::Sum : fn; }

}  // namespace

Table dist_aggregate(WorkerContext& ctx, const Table& table, std::span<const rel::Aggregate> aggregates) {
  const rel::AggSpec spec{{}, {aggregates.begin(), aggregates.end()}};
  const Schema out_schema = rel::aggregate_schema(table.schema(), spec);
  for (const auto& agg : aggregates) {
    const auto type = table.schema().field(table.schema().require_index(agg.column)).type;
    if (agg.fn != rel::AggFn::Count && !is_numeric(type)) {
      throw InvalidArgument(std::string("dist_aggregate: ") + rel::to_string(agg.fn) + " of non-numeric column '" +
                            agg.column + "'");
    }
  }

  Table partial;
  {
    PhaseTimer t(ctx.phase_times().local_ms);
    partial = rel::groupby_aggregate(table, spec);
  }

  // One allreduce per (op, dtype); non-null counts ride along with Int64 SUM.
  struct Slot {
    coll::ReduceOp op;
    DataType type;
    std::size_t index;
  };
  std::map<std::pair<int, int>, std::vector<std::int64_t>> int_groups;
  std::map<std::pair<int, int>, std::vector<double>> float_groups;
  std::vector<Slot> slots;
  const auto count_key = std::make_pair(static_cast<int>(coll::ReduceOp::Sum), static_cast<int>(DataType::Int64));
  std::vector<std::size_t> count_slot;
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const auto op = reduce_op_for(aggregates[i].fn);
    const ColumnArray& col = partial.column(i);
    const auto key = std::make_pair(static_cast<int>(op), static_cast<int>(col.type()));
    if (col.type() == DataType::Int64) {
      auto& g = int_groups[key];
      slots.push_back({op, col.type(), g.size()});
      g.push_back(col.is_null(0) ? int_identity(op) : col.int64_at(0));
    } else {
      auto& g = float_groups[key];
      slots.push_back({op, col.type(), g.size()});
      g.push_back(col.is_null(0) ? float_identity(op) : col.float64_at(0));
    }
    const ColumnArray& in = table.column(aggregates[i].column);
    auto& counts = int_groups[count_key];
    count_slot.push_back(counts.size());
    counts.push_back(static_cast<std::int64_t>(in.length() - in.null_count()));
  }

  std::map<std::pair<int, int>, coll::NumericArray> reduced;
  {
    PhaseTimer t(ctx.phase_times().exchange_ms);
    for (auto& [key, values] : int_groups) {
      reduced.emplace(key, coll::allreduce(ctx.comm(), coll::NumericArray(values),
                                           static_cast<coll::ReduceOp>(key.first)));
    }
    for (auto& [key, values] : float_groups) {
      reduced.emplace(key, coll::allreduce(ctx.comm(), coll::NumericArray(values),
                                           static_cast<coll::ReduceOp>(key.first)));
    }
  }

  const auto& counts = reduced.at(count_key).int64();
  std::vector<ColumnArray> cols;
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const Slot& s = slots[i];
    const std::int64_t global_count = counts[count_slot[i]];
    const auto& values = reduced.at({static_cast<int>(s.op), static_cast<int>(s.type)});
    ColumnBuilder b(s.type, 1);
    if (aggregates[i].fn == rel::AggFn::Count) {
      b.append_int64(values.int64()[s.index]);
    } else if (global_count == 0) {
      b.append_null();
    } else if (s.type == DataType::Int64) {
      b.append_int64(values.int64()[s.index]);
    } else {
      b.append_float64(values.float64()[s.index]);
    }
    cols.push_back(b.finish());
  }
  return Table(out_schema, std::move(cols));
}

Table dist_groupby_aggregate(WorkerContext& ctx, const Table& table, const rel::AggSpec& spec) {
  if (spec.group_keys.empty()) throw InvalidArgument("dist_groupby_aggregate needs group keys");
  rel::aggregate_schema(table.schema(), spec);

  rel::AggSpec combine{spec.group_keys, {}};
  for (const auto& agg : spec.aggregates) {
    combine.aggregates.push_back({agg.output_name, combine_fn(agg.fn), agg.output_name});
  }
  Table partial;
  {
    PhaseTimer t(ctx.phase_times().local_ms);
    partial = rel::groupby_aggregate(table, spec);
  }
  const auto keys = resolve_columns(partial.schema(), spec.group_keys);
  const Table shuffled = detail::shuffle_columns(ctx, partial, keys, false);
  PhaseTimer t(ctx.phase_times().local_ms);
  return rel::groupby_aggregate(shuffled, combine);
}

// ---------------------------------------------------------------------------
// Sample sort

Table dist_sort(WorkerContext& ctx, const Table& table, const rel::SortSpec& spec) {
  rel::RowComparator cmp(table.schema(), spec);
  detail::check_schema_agreement(ctx, table.schema(), cmp.columns(), "sort");
  const int w = ctx.world_size();
  Table local;
  {
    PhaseTimer t(ctx.phase_times().local_ms);
    local = rel::sort(table, spec);
  }
  if (w == 1) return local;

  std::vector<Table> parts(w);
  {
    PhaseTimer t(ctx.phase_times().partition_ms);
    const std::size_t n = local.num_rows();
    const std::size_t samples = std::min<std::size_t>(n, std::size_t{16} * w);
    std::vector<RowIndex> picks(samples);
    for (std::size_t k = 0; k < samples; ++k) picks[k] = static_cast<RowIndex>(k * n / samples);
    const Table my_samples = rel::sort_key_table(take(local, picks), spec);
    const auto gathered = coll::allgather_bytes(ctx.comm(), serialize_table(my_samples));
    std::vector<Table> pools;
    pools.reserve(gathered.size());
    for (const auto& g : gathered) pools.push_back(deserialize_table(g));
    const Table pool = rel::sort(concat_tables(pools), spec);
    const std::size_t p = pool.num_rows();
    std::vector<RowIndex> splitter_rows;
    if (p > 0) {
      for (int i = 0; i + 1 < w; ++i) splitter_rows.push_back(static_cast<RowIndex>((i + 1) * p / w));
    }
    const Table splitters = take(pool, splitter_rows);

    // Rows are sorted, so bucket boundaries only move forward. A row goes to
    // the first bucket whose splitter is >= its key.
    std::size_t begin = 0;
    for (int b = 0; b < w; ++b) {
      std::size_t end = n;
      if (b + 1 < w && splitters.num_rows() > 0) {
        end = begin;
        while (end < n && cmp.compare_to_keys(local, end, splitters, b) <= 0) ++end;
      }
      parts[b] = slice(local, begin, end - begin);
      begin = end;
    }
  }

  const int me = ctx.rank();
  std::vector<Bytes> outgoing(w);
  {
    PhaseTimer t(ctx.phase_times().partition_ms);
    for (int d = 0; d < w; ++d) {
      if (d != me && parts[d].num_rows() > 0) outgoing[d] = serialize_table(parts[d]);
    }
  }
  std::vector<Table> runs(w);
  {
    PhaseTimer t(ctx.phase_times().exchange_ms);
    auto incoming = coll::alltoall_bytes(ctx.comm(), std::move(outgoing));
    for (int s = 0; s < w; ++s) {
      if (s == me) {
        runs[s] = std::move(parts[s]);
      } else {
        runs[s] = incoming[s].empty() ? Table::empty(local.schema()) : deserialize_table(incoming[s]);
      }
    }
  }
  PhaseTimer t(ctx.phase_times().local_ms);
  return rel::merge_sorted(runs, spec);
}

}  // namespace hptmt
