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

// Local (single-partition) table operators.
//
// Value semantics shared by every operator here:
//  * Set operators and grouping compare rows by RowKey, so null equals null,
//    NaN equals NaN and -0.0 equals +0.0.
//  * Join keys containing a null never match anything.
//  * Ordering: numbers in natural order, then NaN, then null. Nulls are last
//    for both directions; Desc only reverses the non-null, non-NaN values.
//    Predicates use the same ordering, except that any comparison with a null
//    is false.

#include <span>
#include <string>
#include <vector>

#include "hptmt/columnar.hpp"

namespace hptmt::rel {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

struct Comparison {
  std::string column;
  CmpOp op;
  Scalar literal;
};

/// Conjunction of comparisons; empty means "true".
struct Predicate {
  std::vector<Comparison> conjuncts;

  Predicate() = default;
  Predicate(std::string column, CmpOp op, Scalar literal) {
    conjuncts.push_back({std::move(column), op, std::move(literal)});
  }
  Predicate operator&&(const Predicate& other) const {
    Predicate p = *this;
    p.conjuncts.insert(p.conjuncts.end(), other.conjuncts.begin(), other.conjuncts.end());
    return p;
  }
};

enum class JoinType { Inner, Left, Right, FullOuter };

const char* to_string(JoinType type);

struct JoinSpec {
  JoinType type = JoinType::Inner;
  std::vector<std::string> left_keys;
  std::vector<std::string> right_keys;
};

enum class SortOrder { Asc, Desc };

struct SortKey {
  std::string column;
  SortOrder order = SortOrder::Asc;
};

struct SortSpec {
  std::vector<SortKey> keys;
};

enum class AggFn { Sum, Min, Max, Count, Prod };

const char* to_string(AggFn fn);

struct Aggregate {
  std::string column;
  AggFn fn;
  std::string output_name;
};

struct AggSpec {
  std::vector<std::string> group_keys;
  std::vector<Aggregate> aggregates;
};

/// Rows satisfying every conjunct, in input order.
Table select(const Table& table, const Predicate& predicate);
Table project(const Table& table, std::span<const std::string> columns);
/// First occurrence of each distinct row.
Table distinct(const Table& table);
Table set_union(const Table& a, const Table& b);
Table set_difference(const Table& a, const Table& b);
Table set_intersect(const Table& a, const Table& b);
/// Row (i, j) = a.row(i) ++ b.row(j), i-major. Clashing names in b get "_r".
Table cartesian_product(const Table& a, const Table& b);
/// Hash join. Output: a's columns, then b's non-key columns. Rows follow a's
/// order, then b-match order; unmatched b rows (Right/FullOuter) come last in
/// b order with a's key columns carrying b's key values.
Table join(const Table& a, const Table& b, const JoinSpec& spec);
/// Stable sort under the total order described above.
Table sort(const Table& table, const SortSpec& spec);
/// One row per distinct group key in first-occurrence order; with no group
/// keys, exactly one row.
Table groupby_aggregate(const Table& table, const AggSpec& spec);

/// Output schema of join(a, b, spec).
Schema join_schema(const Schema& a, const Schema& b, const JoinSpec& spec);
/// Output schema of groupby_aggregate.
Schema aggregate_schema(const Schema& input, const AggSpec& spec);

/// Total-order comparison of a[row_a] and b[row_b] (same dtype), ascending:
/// numbers < NaN < null.
int compare_values(const ColumnArray& a, std::size_t row_a, const ColumnArray& b, std::size_t row_b);

/// Compiled row comparator for a SortSpec over one schema.
class RowComparator {
 public:
  RowComparator(const Schema& schema, const SortSpec& spec);

  /// <0, 0, >0; both tables must have the schema given at construction.
  int compare(const Table& a, std::size_t row_a, const Table& b, std::size_t row_b) const;
  /// Compares a row of `a` (full schema) with a row of a key-only table whose
  /// columns are the sort keys in order.
  int compare_to_keys(const Table& a, std::size_t row_a, const Table& keys, std::size_t row_k) const;

  const std::vector<std::size_t>& columns() const { return columns_; }

 private:
  std::vector<std::size_t> columns_;
  std::vector<bool> descending_;
};

/// The sort key columns of `table`, in SortSpec order.
Table sort_key_table(const Table& table, const SortSpec& spec);

/// Stable k-way merge of individually sorted runs sharing one schema. Ties
/// are taken from the lower-indexed run first.
Table merge_sorted(std::span<const Table> runs, const SortSpec& spec);

}  // namespace hptmt::rel
