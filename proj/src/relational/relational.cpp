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

#include "hptmt/relational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace hptmt::rel {

const char* to_string(JoinType type) {
  switch (type) {
    case JoinType::Inner: return "inner";
    case JoinType::Left: return "left";
    case JoinType::Right: return "right";
    case JoinType::FullOuter: return "full_outer";
  }
  return "?";
}

const char* to_string(AggFn fn) {
  switch (fn) {
    case AggFn::Sum: return "sum";
    case AggFn::Min: return "min";
    case AggFn::Max: return "max";
    case AggFn::Count: return "count";
    case AggFn::Prod: return "prod";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Ordering

namespace {

// 0 = ordinary value, 1 = NaN, 2 = null.
inline int category(const ColumnArray& c, std::size_t row) {
  if (c.is_null(row)) return 2;
  if (c.type() == DataType::Float64 && std::isnan(c.float64_at(row))) return 1;
  return 0;
}

template <typename T>
inline int three_way(const T& x, const T& y) {
  return x < y ? -1 : (y < x ? 1 : 0);
}

inline int compare_ordinary(const ColumnArray& a, std::size_t i, const ColumnArray& b, std::size_t j) {
  switch (a.type()) {
    case DataType::Int64: return three_way(a.int64_at(i), b.int64_at(j));
    case DataType::Float64: return three_way(a.float64_at(i), b.float64_at(j));
    case DataType::Bool: return three_way(a.bool_at(i), b.bool_at(j));
    case DataType::Utf8: {
      const int c = a.utf8_at(i).compare(b.utf8_at(j));
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
  }
  return 0;
}

inline int compare_directed(const ColumnArray& a, std::size_t i, const ColumnArray& b, std::size_t j,
                            bool descending) {
  const int ca = category(a, i);
  const int cb = category(b, j);
  if (ca != cb) return ca < cb ? -1 : 1;
  if (ca != 0) return 0;
  const int c = compare_ordinary(a, i, b, j);
  return descending ? -c : c;
}

}  // namespace

int compare_values(const ColumnArray& a, std::size_t row_a, const ColumnArray& b, std::size_t row_b) {
  if (a.type() != b.type()) throw InvalidArgument("compare_values: dtype mismatch");
  return compare_directed(a, row_a, b, row_b, false);
}

RowComparator::RowComparator(const Schema& schema, const SortSpec& spec) {
  if (spec.keys.empty()) throw InvalidArgument("sort spec needs at least one key");
  for (const auto& k : spec.keys) {
    columns_.push_back(schema.require_index(k.column));
    descending_.push_back(k.order == SortOrder::Desc);
  }
}

int RowComparator::compare(const Table& a, std::size_t row_a, const Table& b, std::size_t row_b) const {
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const auto c = columns_[k];
    const int r = compare_directed(a.column(c), row_a, b.column(c), row_b, descending_[k]);
    if (r != 0) return r;
  }
  return 0;
}

int RowComparator::compare_to_keys(const Table& a, std::size_t row_a, const Table& keys, std::size_t row_k) const {
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const int r = compare_directed(a.column(columns_[k]), row_a, keys.column(k), row_k, descending_[k]);
    if (r != 0) return r;
  }
  return 0;
}

Table sort_key_table(const Table& table, const SortSpec& spec) {
  std::vector<std::string> names;
  for (const auto& k : spec.keys) names.push_back(k.column);
  return project(table, names);
}

Table sort(const Table& table, const SortSpec& spec) {
  RowComparator cmp(table.schema(), spec);
  std::vector<RowIndex> order(table.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](RowIndex x, RowIndex y) { return cmp.compare(table, x, table, y) < 0; });
  return take(table, order);
}

Table merge_sorted(std::span<const Table> runs, const SortSpec& spec) {
  if (runs.empty()) throw InvalidArgument("merge_sorted: no runs");
  if (runs.size() == 1) return runs[0];
  const Schema& schema = runs[0].schema();
  std::size_t total = 0;
  for (const auto& r : runs) {
    if (r.schema() != schema) throw InvalidArgument("merge_sorted: schema mismatch");
    total += r.num_rows();
  }
  RowComparator cmp(schema, spec);
  std::vector<std::size_t> pos(runs.size(), 0);
  auto later = [&](std::size_t x, std::size_t y) {
    const int c = cmp.compare(runs[x], pos[x], runs[y], pos[y]);
    return c != 0 ? c > 0 : x > y;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> heap(later);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].num_rows() > 0) heap.push(r);
  }
  TableBuilder out(schema, total);
  while (!heap.empty()) {
    const std::size_t r = heap.top();
    heap.pop();
    out.append_row(runs[r], pos[r]);
    if (++pos[r] < runs[r].num_rows()) heap.push(r);
  }
  return out.finish();
}

// ---------------------------------------------------------------------------
// select / project

namespace {

ColumnArray literal_column(DataType column_type, const Scalar& literal, const std::string& column) {
  DataType lt = scalar_type(literal);
  if (lt == column_type) return make_array(column_type, std::vector<OptScalar>{literal});
  if (column_type == DataType::Float64 && lt == DataType::Int64) {
    return make_array(column_type, std::vector<OptScalar>{Scalar{static_cast<double>(std::get<std::int64_t>(literal))}});
  }
  throw InvalidArgument("cannot compare column '" + column + "' of type " + hptmt::to_string(column_type) +
                        " with a " + hptmt::to_string(lt) + " literal");
}

bool holds(CmpOp op, int c) {
  switch (op) {
    case CmpOp::Eq: return c == 0;
    case CmpOp::Ne: return c != 0;
    case CmpOp::Lt: return c < 0;
    case CmpOp::Le: return c <= 0;
    case CmpOp::Gt: return c > 0;
    case CmpOp::Ge: return c >= 0;
  }
  return false;
}

}  // namespace

Table select(const Table& table, const Predicate& predicate) {
  struct Bound {
    std::size_t column;
    CmpOp op;
    ColumnArray literal;
  };
  std::vector<Bound> bound;
  for (const auto& c : predicate.conjuncts) {
    const auto idx = table.schema().require_index(c.column);
    bound.push_back({idx, c.op, literal_column(table.schema().field(idx).type, c.literal, c.column)});
  }
  std::vector<RowIndex> keep;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    bool ok = true;
    for (const auto& b : bound) {
      const auto& col = table.column(b.column);
      if (col.is_null(r) || !holds(b.op, compare_values(col, r, b.literal, 0))) {
        ok = false;
        break;
      }
    }
    if (ok) keep.push_back(static_cast<RowIndex>(r));
  }
  if (keep.size() == table.num_rows()) return table;
  return take(table, keep);
}

Table project(const Table& table, std::span<const std::string> columns) {
  std::vector<Field> fields;
  std::vector<ColumnPtr> cols;
  std::unordered_set<std::string_view> seen;
  for (const auto& name : columns) {
    if (!seen.insert(name).second) throw InvalidArgument("project: duplicate column '" + name + "'");
    const auto idx = table.schema().require_index(name);
    fields.push_back(table.schema().field(idx));
    cols.push_back(table.column_ptr(idx));
  }
  return Table(Schema(std::move(fields)), std::move(cols));
}

// ---------------------------------------------------------------------------
// Set operators

namespace {

using KeySet = std::unordered_set<std::string_view, Fnv1aHash, std::equal_to<>>;

std::vector<std::size_t> all_columns(const Table& t) {
  std::vector<std::size_t> cols(t.num_columns());
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

void require_same_schema(const Table& a, const Table& b, const char* op) {
  if (a.schema() != b.schema()) {
    throw InvalidArgument(std::string(op) + ": schema mismatch (" + a.schema().to_string() + " vs " +
                          b.schema().to_string() + ")");
  }
}

}  // namespace

Table distinct(const Table& table) {
  const auto keys = encode_keys(table, all_columns(table));
  KeySet seen;
  seen.reserve(table.num_rows());
  std::vector<RowIndex> keep;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (seen.insert(keys.key(r)).second) keep.push_back(static_cast<RowIndex>(r));
  }
  if (keep.size() == table.num_rows()) return table;
  return take(table, keep);
}

Table set_union(const Table& a, const Table& b) {
  require_same_schema(a, b, "union");
  const Table both = concat_tables(std::vector<Table>{a, b});
  return distinct(both);
}

Table set_difference(const Table& a, const Table& b) {
  require_same_schema(a, b, "difference");
  const auto cols = all_columns(a);
  const auto ka = encode_keys(a, cols);
  const auto kb = encode_keys(b, cols);
  KeySet excluded;
  excluded.reserve(b.num_rows() + a.num_rows());
  for (std::size_t r = 0; r < b.num_rows(); ++r) excluded.insert(kb.key(r));
  std::vector<RowIndex> keep;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    if (excluded.insert(ka.key(r)).second) keep.push_back(static_cast<RowIndex>(r));
  }
  return take(a, keep);
}

Table set_intersect(const Table& a, const Table& b) {
  require_same_schema(a, b, "intersect");
  const auto cols = all_columns(a);
  const auto ka = encode_keys(a, cols);
  const auto kb = encode_keys(b, cols);
  KeySet in_b;
  in_b.reserve(b.num_rows());
  for (std::size_t r = 0; r < b.num_rows(); ++r) in_b.insert(kb.key(r));
  KeySet emitted;
  std::vector<RowIndex> keep;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    const auto k = ka.key(r);
    if (in_b.contains(k) && emitted.insert(k).second) keep.push_back(static_cast<RowIndex>(r));
  }
  return take(a, keep);
}

// ---------------------------------------------------------------------------
// Cartesian product / join

namespace {

std::string unique_name(std::string name, const std::unordered_set<std::string>& taken) {
  if (!taken.contains(name)) return name;
  do {
    name += "_r";
  } while (taken.contains(name));
  return name;
}

/// a's fields followed by b's fields not in `skip`, renaming clashes.
Schema combined_schema(const Schema& a, const Schema& b, const std::vector<bool>& skip) {
  std::vector<Field> fields = a.fields();
  std::unordered_set<std::string> taken;
  for (const auto& f : a.fields()) taken.insert(f.name);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    Field f = b.field(i);
    f.name = unique_name(f.name, taken);
    taken.insert(f.name);
    fields.push_back(std::move(f));
  }
  return Schema(std::move(fields));
}

ColumnArray gather_nullable(const ColumnArray& col, const std::vector<std::int64_t>& idx) {
  const bool any_missing = std::any_of(idx.begin(), idx.end(), [](std::int64_t i) { return i < 0; });
  if (!any_missing) {
    std::vector<RowIndex> plain(idx.begin(), idx.end());
    return take_column(col, plain);
  }
  return take_column_nullable(col, idx);
}

struct ResolvedJoin {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

ResolvedJoin resolve_join(const Schema& a, const Schema& b, const JoinSpec& spec) {
  if (spec.left_keys.empty() || spec.left_keys.size() != spec.right_keys.size()) {
    throw InvalidArgument("join: key lists must be non-empty and of equal length");
  }
  ResolvedJoin r{resolve_columns(a, spec.left_keys), resolve_columns(b, spec.right_keys)};
  for (std::size_t k = 0; k < r.left.size(); ++k) {
    if (a.field(r.left[k]).type != b.field(r.right[k]).type) {
      throw InvalidArgument("join: key '" + spec.left_keys[k] + "' and '" + spec.right_keys[k] +
                            "' have different dtypes");
    }
  }
  return r;
}

/// Chained hash index over encoded keys. Chains list rows in ascending order.
class HashIndex {
 public:
  explicit HashIndex(const EncodedKeys& keys) : keys_(keys) {
    const std::size_t n = keys.size();
    std::size_t buckets = 16;
    while (buckets < 2 * n) buckets <<= 1;
    mask_ = buckets - 1;
    head_.assign(buckets, kEnd);
    next_.assign(n, kEnd);
    hashes_.resize(n);
    for (std::size_t i = n; i-- > 0;) {
      if (keys.has_null[i]) continue;
      const auto h = fnv1a64(keys.key(i));
      hashes_[i] = h;
      auto& slot = head_[h & mask_];
      next_[i] = slot;
      slot = static_cast<std::uint32_t>(i);
    }
  }

  template <typename F>
  void for_each_match(std::string_view key, F&& f) const {
    const auto h = fnv1a64(key);
    for (auto i = head_[h & mask_]; i != kEnd; i = next_[i]) {
      if (hashes_[i] == h && keys_.key(i) == key) f(i);
    }
  }

 private:
  static constexpr std::uint32_t kEnd = 0xFFFFFFFFu;
  const EncodedKeys& keys_;
  std::size_t mask_ = 0;
  std::vector<std::uint32_t> head_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint64_t> hashes_;
};

}  // namespace

Table cartesian_product(const Table& a, const Table& b) {
  const Schema schema = combined_schema(a.schema(), b.schema(), {});
  const std::size_t n = a.num_rows() * b.num_rows();
  std::vector<RowIndex> ia(n), ib(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.num_rows(); ++i) {
    for (std::size_t j = 0; j < b.num_rows(); ++j, ++k) {
      ia[k] = static_cast<RowIndex>(i);
      ib[k] = static_cast<RowIndex>(j);
    }
  }
  std::vector<ColumnArray> cols;
  for (std::size_t c = 0; c < a.num_columns(); ++c) cols.push_back(take_column(a.column(c), ia));
  for (std::size_t c = 0; c < b.num_columns(); ++c) cols.push_back(take_column(b.column(c), ib));
  return Table(schema, std::move(cols));
}

Schema join_schema(const Schema& a, const Schema& b, const JoinSpec& spec) {
  const auto r = resolve_join(a, b, spec);
  std::vector<bool> skip(b.size(), false);
  for (auto c : r.right) skip[c] = true;
  return combined_schema(a, b, skip);
}

Table join(const Table& a, const Table& b, const JoinSpec& spec) {
  const auto keys = resolve_join(a.schema(), b.schema(), spec);
  const Schema schema = join_schema(a.schema(), b.schema(), spec);
  const bool keep_left = spec.type == JoinType::Left || spec.type == JoinType::FullOuter;
  const bool keep_right = spec.type == JoinType::Right || spec.type == JoinType::FullOuter;

  const EncodedKeys ka = encode_keys(a, keys.left);
  const EncodedKeys kb = encode_keys(b, keys.right);
  std::vector<std::int64_t> out_a;
  std::vector<std::int64_t> out_b;
  std::vector<std::uint8_t> b_matched(b.num_rows(), 0);

  if (b.num_rows() <= a.num_rows()) {
    // Build on b, probe with a in order.
    HashIndex index(kb);
    out_a.reserve(a.num_rows());
    out_b.reserve(a.num_rows());
    for (std::size_t i = 0; i < a.num_rows(); ++i) {
      bool matched = false;
      if (!ka.has_null[i]) {
        index.for_each_match(ka.key(i), [&](std::uint32_t j) {
          out_a.push_back(static_cast<std::int64_t>(i));
          out_b.push_back(j);
          b_matched[j] = 1;
          matched = true;
        });
      }
      if (!matched && keep_left) {
        out_a.push_back(static_cast<std::int64_t>(i));
        out_b.push_back(-1);
      }
    }
  } else {
    // Build on a, probe with b, then regroup by a's row.
    HashIndex index(ka);
    std::vector<std::uint32_t> count(a.num_rows() + 1, 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::size_t j = 0; j < b.num_rows(); ++j) {
      if (kb.has_null[j]) continue;
      index.for_each_match(kb.key(j), [&](std::uint32_t i) {
        pairs.emplace_back(i, static_cast<std::uint32_t>(j));
        ++count[i + 1];
        b_matched[j] = 1;
      });
    }
    std::partial_sum(count.begin(), count.end(), count.begin());
    std::vector<std::uint32_t> grouped(pairs.size());
    std::vector<std::uint32_t> fill(count.begin(), count.end() - 1);
    for (const auto& [i, j] : pairs) grouped[fill[i]++] = j;
    for (std::size_t i = 0; i < a.num_rows(); ++i) {
      const auto begin = count[i];
      const auto end = count[i + 1];
      if (begin == end) {
        if (keep_left) {
          out_a.push_back(static_cast<std::int64_t>(i));
          out_b.push_back(-1);
        }
        continue;
      }
      for (auto p = begin; p < end; ++p) {
        out_a.push_back(static_cast<std::int64_t>(i));
        out_b.push_back(grouped[p]);
      }
    }
  }
  const std::size_t matched_rows = out_a.size();
  if (keep_right) {
    for (std::size_t j = 0; j < b.num_rows(); ++j) {
      if (!b_matched[j]) {
        out_a.push_back(-1);
        out_b.push_back(static_cast<std::int64_t>(j));
      }
    }
  }
  const bool has_right_only = out_a.size() > matched_rows;

  std::vector<ColumnArray> cols;
  cols.reserve(schema.size());
  for (std::size_t c = 0; c < a.num_columns(); ++c) {
    const auto key_pos = std::find(keys.left.begin(), keys.left.end(), c);
    if (!has_right_only || key_pos == keys.left.end()) {
      cols.push_back(gather_nullable(a.column(c), out_a));
      continue;
    }
    // Right-only rows take the key value from b.
    const ColumnArray& from_b = b.column(keys.right[key_pos - keys.left.begin()]);
    ColumnBuilder builder(a.column(c).type(), out_a.size());
    for (std::size_t r = 0; r < out_a.size(); ++r) {
      if (out_a[r] >= 0) {
        builder.append_from(a.column(c), static_cast<std::size_t>(out_a[r]));
      } else {
        builder.append_from(from_b, static_cast<std::size_t>(out_b[r]));
      }
    }
    cols.push_back(builder.finish());
  }
  for (std::size_t c = 0; c < b.num_columns(); ++c) {
    if (std::find(keys.right.begin(), keys.right.end(), c) != keys.right.end()) continue;
    cols.push_back(gather_nullable(b.column(c), out_b));
  }
  return Table(schema, std::move(cols));
}

// ---------------------------------------------------------------------------
// Group-by aggregation

Schema aggregate_schema(const Schema& input, const AggSpec& spec) {
  std::vector<Field> fields;
  for (const auto& k : spec.group_keys) fields.push_back(input.field(input.require_index(k)));
  for (const auto& agg : spec.aggregates) {
    const auto& in = input.field(input.require_index(agg.column));
    if ((agg.fn == AggFn::Sum || agg.fn == AggFn::Prod) && !is_numeric(in.type)) {
      throw InvalidArgument(std::string(to_string(agg.fn)) + " needs a numeric column, '" + in.name + "' is " +
                            hptmt::to_string(in.type));
    }
    fields.push_back(Field{agg.output_name, agg.fn == AggFn::Count ? DataType::Int64 : in.type});
  }
  return Schema(std::move(fields));
}

Table groupby_aggregate(const Table& table, const AggSpec& spec) {
  const Schema schema = aggregate_schema(table.schema(), spec);
  const auto key_cols = resolve_columns(table.schema(), spec.group_keys);
  const std::size_t n = table.num_rows();

  std::vector<std::uint32_t> group_of(n, 0);
  std::vector<RowIndex> first_row;
  std::size_t groups = 1;
  if (!key_cols.empty()) {
    const auto keys = encode_keys(table, key_cols);
    std::unordered_map<std::string_view, std::uint32_t, Fnv1aHash, std::equal_to<>> ids;
    ids.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      auto [it, inserted] = ids.try_emplace(keys.key(r), static_cast<std::uint32_t>(first_row.size()));
      if (inserted) first_row.push_back(static_cast<RowIndex>(r));
      group_of[r] = it->second;
    }
    groups = first_row.size();
  }

  std::vector<ColumnArray> cols;
  for (auto c : key_cols) cols.push_back(take_column(table.column(c), first_row));

  for (const auto& agg : spec.aggregates) {
    const ColumnArray& col = table.column(agg.column);
    std::vector<std::int64_t> count(groups, 0);
    for (std::size_t r = 0; r < n; ++r) {
      if (col.is_valid(r)) ++count[group_of[r]];
    }
    switch (agg.fn) {
      case AggFn::Count: {
        ColumnBuilder b(DataType::Int64, groups);
        for (auto c : count) b.append_int64(c);
        cols.push_back(b.finish());
        break;
      }
      case AggFn::Sum:
      case AggFn::Prod: {
        const bool sum = agg.fn == AggFn::Sum;
        ColumnBuilder b(col.type(), groups);
        if (col.type() == DataType::Int64) {
          std::vector<std::uint64_t> acc(groups, sum ? 0 : 1);
          for (std::size_t r = 0; r < n; ++r) {
            if (col.is_null(r)) continue;
            const auto v = static_cast<std::uint64_t>(col.int64_at(r));
            auto& x = acc[group_of[r]];
            x = sum ? x + v : x * v;
          }
          for (std::size_t g = 0; g < groups; ++g) {
            if (count[g] == 0) {
              b.append_null();
            } else {
              b.append_int64(static_cast<std::int64_t>(acc[g]));
            }
          }
        } else {
          std::vector<double> acc(groups, sum ? 0.0 : 1.0);
          for (std::size_t r = 0; r < n; ++r) {
            if (col.is_null(r)) continue;
            const double v = col.float64_at(r);
            auto& x = acc[group_of[r]];
            x = sum ? x + v : x * v;
          }
          for (std::size_t g = 0; g < groups; ++g) {
            if (count[g] == 0) {
              b.append_null();
            } else {
              b.append_float64(acc[g]);
            }
          }
        }
        cols.push_back(b.finish());
        break;
      }
      case AggFn::Min:
      case AggFn::Max: {
        const int want = agg.fn == AggFn::Min ? -1 : 1;
        std::vector<std::int64_t> best(groups, -1);
        for (std::size_t r = 0; r < n; ++r) {
          if (col.is_null(r)) continue;
          auto& b = best[group_of[r]];
          if (b < 0 || compare_values(col, r, col, static_cast<std::size_t>(b)) == want) {
            b = static_cast<std::int64_t>(r);
          }
        }
        cols.push_back(take_column_nullable(col, best));
        break;
      }
    }
  }
  return Table(schema, std::move(cols));
}

}  // namespace hptmt::rel
