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

// Brute-force reference implementations and random inputs for verification.
// Nothing here shares code with the operators it checks: rows are plain
// vectors of scalars, equality and ordering are written out per type, and
// every operator is a nested loop or a linear scan.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hptmt/collectives.hpp"
#include "hptmt/relational.hpp"

namespace hptmt::oracle {

using Row = std::vector<OptScalar>;
using Rows = std::vector<Row>;

Rows rows_of(const Table& table);
Table table_of(const Schema& schema, const Rows& rows);

/// Set-operator equality: null == null, NaN == NaN, -0.0 == +0.0.
bool same_value(const OptScalar& a, const OptScalar& b);
bool same_row(const Row& a, const Row& b);
/// Ascending total order: numbers, then NaN, then null. Desc flips numbers only.
int order_values(const OptScalar& a, const OptScalar& b, bool descending = false);
/// Any order that is total over same_value classes; used to compare multisets.
bool row_less(const Row& a, const Row& b);

// --- Relational references -------------------------------------------------

Table select(const Table& table, const rel::Predicate& predicate);
Table distinct(const Table& table);
Table set_union(const Table& a, const Table& b);
Table set_difference(const Table& a, const Table& b);
Table set_intersect(const Table& a, const Table& b);
Table cartesian_product(const Table& a, const Table& b);
Table join(const Table& a, const Table& b, const rel::JoinSpec& spec);
Table sort(const Table& table, const rel::SortSpec& spec);
Table groupby_aggregate(const Table& table, const rel::AggSpec& spec);

// --- Comparison ------------------------------------------------------------

/// Same schema and the same rows in the same order (floats compared after
/// canonicalization).
bool equal_ordered(const Table& a, const Table& b);
/// Same schema and the same multiset of rows.
bool equal_unordered(const Table& a, const Table& b);
/// Multiset equality where Float64 values in `tolerant_columns` may differ by
/// rel_tol relative. Rows are matched on the remaining columns, which must
/// identify a row uniquely (group keys).
bool equal_unordered_tolerant(const Table& a, const Table& b, std::span<const std::size_t> tolerant_columns,
                              double rel_tol);

// --- Collective references ---------------------------------------------------

double fold_float(double acc, double next, coll::ReduceOp op);
std::int64_t fold_int(std::int64_t acc, std::int64_t next, coll::ReduceOp op);
/// Element-wise fold of inputs[0], inputs[1], ... in that order.
coll::NumericArray fold_arrays(std::span<const coll::NumericArray> inputs, coll::ReduceOp op);
coll::NumericArray concat_arrays(std::span<const coll::NumericArray> inputs);

// --- Partitioning reference ------------------------------------------------

/// Key bytes of `row` restricted to `columns`, written out byte by byte.
std::string encode_key_reference(const Row& row, std::span<const std::size_t> columns);
std::uint64_t fnv1a_reference(std::string_view bytes);

// --- Random inputs ---------------------------------------------------------

struct GenOptions {
  double null_rate = 0.05;
  double nan_rate = 0.02;
  /// Int64 values are drawn from [0, int_range).
  std::int64_t int_range = 20;
  std::size_t max_string = 3;
  /// When false, non-NaN floats are uniform in [0.5, 100) instead of a small
  /// pool with signed zeros; sums then have no cancellation.
  bool float_pool = true;
};

Table random_table(std::mt19937_64& rng, const Schema& schema, std::size_t rows, const GenOptions& options = {});
/// A schema of 1..max_columns columns with random types and names c0, c1, ...
Schema random_schema(std::mt19937_64& rng, std::size_t max_columns);
/// Splits rows into `parts` contiguous pieces of random (possibly zero) size.
std::vector<Table> random_partition(std::mt19937_64& rng, const Table& table, int parts);
/// A random literal of `type` drawn like the table values.
Scalar random_literal(std::mt19937_64& rng, DataType type, const GenOptions& options = {});

}  // namespace hptmt::oracle
