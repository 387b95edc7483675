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

// Distributed operators on row-partitioned tables. Every rank passes its own
// partition and all ranks make the same calls in the same order. The global
// result is the concatenation of the per-rank results in rank order.

#include <span>
#include <string>
#include <vector>

#include "hptmt/context.hpp"
#include "hptmt/relational.hpp"

namespace hptmt {

/// Rank that owns a row: FNV-1a of its RowKey, modulo world_size.
int partition_of(std::string_view row_key, int world_size);

struct ShuffleOptions {
  /// Rows with a null in any key column stay on their current rank.
  bool keep_null_keys_local = false;
};

/// Hash shuffle on key_columns. Received partitions are concatenated in
/// source-rank order.
Table shuffle(WorkerContext& ctx, const Table& table, std::span<const std::string> key_columns,
              ShuffleOptions options = {});

Table dist_union(WorkerContext& ctx, const Table& a, const Table& b);
Table dist_difference(WorkerContext& ctx, const Table& a, const Table& b);
Table dist_intersect(WorkerContext& ctx, const Table& a, const Table& b);
Table dist_join(WorkerContext& ctx, const Table& a, const Table& b, const rel::JoinSpec& spec);

/// Whole-table aggregates combined with allreduce; every rank returns the same
/// single row. No table data is exchanged.
Table dist_aggregate(WorkerContext& ctx, const Table& table, std::span<const rel::Aggregate> aggregates);

/// Local pre-aggregation, shuffle of the partials on the group keys, then a
/// local combine.
Table dist_groupby_aggregate(WorkerContext& ctx, const Table& table, const rel::AggSpec& spec);

/// Sample sort. Afterwards each rank is sorted and every key on rank r orders
/// at or before every key on rank r + 1.
Table dist_sort(WorkerContext& ctx, const Table& table, const rel::SortSpec& spec);

}  // namespace hptmt
