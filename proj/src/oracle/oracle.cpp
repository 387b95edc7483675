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

#include "hptmt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

namespace hptmt::oracle {

Rows rows_of(const Table& table) {
  Rows rows(table.num_rows(), Row(table.num_columns()));
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    for (std::size_t r = 0; r < table.num_rows(); ++r) rows[r][c] = table.column(c).scalar_at(r);
  }
  return rows;
}

Table table_of(const Schema& schema, const Rows& rows) {
  TableBuilder b(schema, rows.size());
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) b.column(c).append(row[c]);
    b.commit_rows(1);
  }
  return b.finish();
}

namespace {

int category(const OptScalar& v) {
  if (!v) return 2;
  if (const double* d = std::get_if<double>(&*v); d && std::isnan(*d)) return 1;
  return 0;
}

template <typename T>
int cmp3(const T& a, const T& b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

}  // namespace

bool same_value(const OptScalar& a, const OptScalar& b) {
  if (!a || !b) return !a && !b;
  if (a->index() != b->index()) return false;
  if (const double* x = std::get_if<double>(&*a)) {
    const double y = std::get<double>(*b);
    if (std::isnan(*x) || std::isnan(y)) return std::isnan(*x) && std::isnan(y);
    return *x == y;
  }
  return *a == *b;
}

bool same_row(const Row& a, const Row& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_value(a[i], b[i])) return false;
  }
  return true;
}

int order_values(const OptScalar& a, const OptScalar& b, bool descending) {
  const int ca = category(a);
  const int cb = category(b);
  if (ca != cb) return ca < cb ? -1 : 1;
  if (ca != 0) return 0;
  if (a->index() != b->index()) return cmp3(a->index(), b->index());
  int c = 0;
  if (const auto* x = std::get_if<std::int64_t>(&*a)) c = cmp3(*x, std::get<std::int64_t>(*b));
  if (const auto* x = std::get_if<double>(&*a)) c = cmp3(*x, std::get<double>(*b));
  if (const auto* x = std::get_if<bool>(&*a)) c = cmp3(*x, std::get<bool>(*b));
  if (const auto* x = std::get_if<std::string>(&*a)) c = cmp3(*x, std::get<std::string>(*b));
  return descending ? -c : c;
}

bool row_less(const Row& a, const Row& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    const int c = order_values(a[i], b[i]);
    if (c != 0) return c < 0;
  }
  return a.size() < b.size();
}

namespace {

struct RowLess {
  bool operator()(const Row& a, const Row& b) const { return row_less(a, b); }
};

void require_same_schema(const Table& a, const Table& b) {
  if (a.schema() != b.schema()) throw InvalidArgument("schema mismatch");
}

Table distinct_rows(const Schema& schema, const Rows& rows) {
  std::set<Row, RowLess> seen;
  Rows out;
  for (const auto& r : rows) {
    if (seen.insert(r).second) out.push_back(r);
  }
  return table_of(schema, out);
}

bool holds(rel::CmpOp op, int c) {
  switch (op) {
    case rel::CmpOp::Eq: return c == 0;
    case rel::CmpOp::Ne: return c != 0;
    case rel::CmpOp::Lt: return c < 0;
    case rel::CmpOp::Le: return c <= 0;
    case rel::CmpOp::Gt: return c > 0;
    case rel::CmpOp::Ge: return c >= 0;
  }
  return false;
}

std::string fresh_name(std::string name, const std::vector<Field>& taken) {
  auto used = [&](const std::string& n) {
    return std::any_of(taken.begin(), taken.end(), [&](const Field& f) { return f.name == n; });
  };
  while (used(name)) name += "_r";
  return name;
}

}  // namespace

Table select(const Table& table, const rel::Predicate& predicate) {
  const Rows rows = rows_of(table);
  std::vector<std::pair<std::size_t, OptScalar>> atoms;
  for (const auto& c : predicate.conjuncts) {
    const auto idx = table.schema().require_index(c.column);
    const DataType col = table.schema().field(idx).type;
    Scalar lit = c.literal;
    if (col == DataType::Float64 && std::holds_alternative<std::int64_t>(lit)) {
      lit = static_cast<double>(std::get<std::int64_t>(lit));
    }
    if (scalar_type(lit) != col) throw InvalidArgument("incomparable literal");
    atoms.emplace_back(idx, lit);
  }
  Rows out;
  for (const auto& row : rows) {
    bool keep = true;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const auto& v = row[atoms[k].first];
      if (!v || !holds(predicate.conjuncts[k].op, order_values(v, atoms[k].second))) {
        keep = false;
        break;
      }
    }
    if (keep) out.push_back(row);
  }
  return table_of(table.schema(), out);
}

Table distinct(const Table& table) { return distinct_rows(table.schema(), rows_of(table)); }

Table set_union(const Table& a, const Table& b) {
  require_same_schema(a, b);
  Rows all = rows_of(a);
  for (auto& r : rows_of(b)) all.push_back(std::move(r));
  return distinct_rows(a.schema(), all);
}

Table set_difference(const Table& a, const Table& b) {
  require_same_schema(a, b);
  std::set<Row, RowLess> in_b;
  for (auto& r : rows_of(b)) in_b.insert(std::move(r));
  Rows keep;
  for (auto& r : rows_of(a)) {
    if (!in_b.contains(r)) keep.push_back(std::move(r));
  }
  return distinct_rows(a.schema(), keep);
}

Table set_intersect(const Table& a, const Table& b) {
  require_same_schema(a, b);
  std::set<Row, RowLess> in_b;
  for (auto& r : rows_of(b)) in_b.insert(std::move(r));
  Rows keep;
  for (auto& r : rows_of(a)) {
    if (in_b.contains(r)) keep.push_back(std::move(r));
  }
  return distinct_rows(a.schema(), keep);
}

Table cartesian_product(const Table& a, const Table& b) {
  std::vector<Field> fields = a.schema().fields();
  for (const auto& f : b.schema().fields()) fields.push_back({fresh_name(f.name, fields), f.type});
  Rows out;
  for (const auto& ra : rows_of(a)) {
    for (const auto& rb : rows_of(b)) {
      Row r = ra;
      r.insert(r.end(), rb.begin(), rb.end());
      out.push_back(std::move(r));
    }
  }
  return table_of(Schema(fields), out);
}

Table join(const Table& a, const Table& b, const rel::JoinSpec& spec) {
  const auto lk = resolve_columns(a.schema(), spec.left_keys);
  const auto rk = resolve_columns(b.schema(), spec.right_keys);
  if (lk.empty() || lk.size() != rk.size()) throw InvalidArgument("bad join keys");
  std::vector<bool> is_right_key(b.num_columns(), false);
  for (std::size_t k = 0; k < lk.size(); ++k) {
    if (a.schema().field(lk[k]).type != b.schema().field(rk[k]).type) throw InvalidArgument("key dtypes differ");
    is_right_key[rk[k]] = true;
  }
  std::vector<Field> fields = a.schema().fields();
  for (std::size_t c = 0; c < b.num_columns(); ++c) {
    if (!is_right_key[c]) fields.push_back({fresh_name(b.schema().field(c).name, fields), b.schema().field(c).type});
  }
  const bool keep_left = spec.type == rel::JoinType::Left || spec.type == rel::JoinType::FullOuter;
  const bool keep_right = spec.type == rel::JoinType::Right || spec.type == rel::JoinType::FullOuter;

  const Rows ra = rows_of(a);
  const Rows rb = rows_of(b);
  auto matches = [&](const Row& x, const Row& y) {
    for (std::size_t k = 0; k < lk.size(); ++k) {
      if (!x[lk[k]] || !y[rk[k]] || !same_value(x[lk[k]], y[rk[k]])) return false;
    }
    return true;
  };
  auto emit = [&](Rows& out, const Row* x, const Row* y) {
    Row r;
    for (std::size_t c = 0; c < a.num_columns(); ++c) {
      if (x) {
        r.push_back((*x)[c]);
        continue;
      }
      const auto pos = std::find(lk.begin(), lk.end(), c);
      r.push_back(pos == lk.end() ? OptScalar{} : (*y)[rk[pos - lk.begin()]]);
    }
    for (std::size_t c = 0; c < b.num_columns(); ++c) {
      if (!is_right_key[c]) r.push_back(y ? (*y)[c] : OptScalar{});
    }
    out.push_back(std::move(r));
  };
  Rows out;
  std::vector<bool> b_used(rb.size(), false);
  for (const auto& x : ra) {
    bool any = false;
    for (std::size_t j = 0; j < rb.size(); ++j) {
      if (matches(x, rb[j])) {
        emit(out, &x, &rb[j]);
        b_used[j] = true;
        any = true;
      }
    }
    if (!any && keep_left) emit(out, &x, nullptr);
  }
  if (keep_right) {
    for (std::size_t j = 0; j < rb.size(); ++j) {
      if (!b_used[j]) emit(out, nullptr, &rb[j]);
    }
  }
  return table_of(Schema(fields), out);
}

Table sort(const Table& table, const rel::SortSpec& spec) {
  std::vector<std::pair<std::size_t, bool>> keys;
  for (const auto& k : spec.keys) keys.emplace_back(table.schema().require_index(k.column), k.order == rel::SortOrder::Desc);
  Rows rows = rows_of(table);
  std::stable_sort(rows.begin(), rows.end(), [&](const Row& x, const Row& y) {
    for (const auto& [c, desc] : keys) {
      const int o = order_values(x[c], y[c], desc);
      if (o != 0) return o < 0;
    }
    return false;
  });
  return table_of(table.schema(), rows);
}

Table groupby_aggregate(const Table& table, const rel::AggSpec& spec) {
  std::vector<std::size_t> key_cols;
  std::vector<Field> fields;
  for (const auto& k : spec.group_keys) {
    key_cols.push_back(table.schema().require_index(k));
    fields.push_back(table.schema().field(key_cols.back()));
  }
  std::vector<std::size_t> agg_cols;
  for (const auto& agg : spec.aggregates) {
    agg_cols.push_back(table.schema().require_index(agg.column));
    const DataType t = table.schema().field(agg_cols.back()).type;
    if ((agg.fn == rel::AggFn::Sum || agg.fn == rel::AggFn::Prod) && t != DataType::Int64 && t != DataType::Float64) {
      throw InvalidArgument("sum/prod of a non-numeric column");
    }
    fields.push_back({agg.output_name, agg.fn == rel::AggFn::Count ? DataType::Int64 : t});
  }

  const Rows rows = rows_of(table);
  std::map<Row, std::size_t, RowLess> index;
  std::vector<Row> group_keys;
  std::vector<std::vector<std::size_t>> members;
  if (key_cols.empty()) {
    group_keys.emplace_back();
    members.emplace_back();
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Row key;
    for (auto c : key_cols) key.push_back(rows[r][c]);
    std::size_t g = 0;
    if (!key_cols.empty()) {
      auto [it, inserted] = index.emplace(key, group_keys.size());
      if (inserted) {
        group_keys.push_back(key);
        members.emplace_back();
      }
      g = it->second;
    }
    members[g].push_back(r);
  }

  Rows out;
  for (std::size_t g = 0; g < group_keys.size(); ++g) {
    Row row = group_keys[g];
    for (std::size_t k = 0; k < spec.aggregates.size(); ++k) {
      const auto fn = spec.aggregates[k].fn;
      std::vector<Scalar> values;
      for (auto r : members[g]) {
        if (rows[r][agg_cols[k]]) values.push_back(*rows[r][agg_cols[k]]);
      }
      if (fn == rel::AggFn::Count) {
        row.emplace_back(static_cast<std::int64_t>(values.size()));
        continue;
      }
      if (values.empty()) {
        row.emplace_back();
        continue;
      }
      if (fn == rel::AggFn::Min || fn == rel::AggFn::Max) {
        Scalar best = values[0];
        for (std::size_t i = 1; i < values.size(); ++i) {
          const int o = order_values(values[i], best);
          if ((fn == rel::AggFn::Min && o < 0) || (fn == rel::AggFn::Max && o > 0)) best = values[i];
        }
        row.emplace_back(best);
        continue;
      }
      const bool sum = fn == rel::AggFn::Sum;
      if (std::holds_alternative<std::int64_t>(values[0])) {
        std::uint64_t acc = sum ? 0 : 1;
        for (const auto& v : values) {
          const auto x = static_cast<std::uint64_t>(std::get<std::int64_t>(v));
          acc = sum ? acc + x : acc * x;
        }
        row.emplace_back(static_cast<std::int64_t>(acc));
      } else {
        double acc = sum ? 0.0 : 1.0;
        for (const auto& v : values) acc = sum ? acc + std::get<double>(v) : acc * std::get<double>(v);
        row.emplace_back(acc);
      }
    }
    out.push_back(std::move(row));
  }
  return table_of(Schema(fields), out);
}

// ---------------------------------------------------------------------------
// Comparison

bool equal_ordered(const Table& a, const Table& b) {
  if (a.schema() != b.schema() || a.num_rows() != b.num_rows()) return false;
  const Rows ra = rows_of(a);
  const Rows rb = rows_of(b);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (!same_row(ra[i], rb[i])) return false;
  }
  return true;
}

bool equal_unordered(const Table& a, const Table& b) {
  if (a.schema() != b.schema() || a.num_rows() != b.num_rows()) return false;
  Rows ra = rows_of(a);
  Rows rb = rows_of(b);
  std::sort(ra.begin(), ra.end(), row_less);
  std::sort(rb.begin(), rb.end(), row_less);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (!same_row(ra[i], rb[i])) return false;
  }
  return true;
}

bool equal_unordered_tolerant(const Table& a, const Table& b, std::span<const std::size_t> tolerant_columns,
                              double rel_tol) {
  if (a.schema() != b.schema() || a.num_rows() != b.num_rows()) return false;
  std::vector<bool> tolerant(a.num_columns(), false);
  for (auto c : tolerant_columns) tolerant[c] = true;
  auto exact_less = [&](const Row& x, const Row& y) {
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (tolerant[c]) continue;
      const int o = order_values(x[c], y[c]);
      if (o != 0) return o < 0;
    }
    return false;
  };
  Rows ra = rows_of(a);
  Rows rb = rows_of(b);
  std::sort(ra.begin(), ra.end(), exact_less);
  std::sort(rb.begin(), rb.end(), exact_less);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (std::size_t c = 0; c < a.num_columns(); ++c) {
      const auto& x = ra[i][c];
      const auto& y = rb[i][c];
      if (same_value(x, y)) continue;
      if (!tolerant[c] || !x || !y || !std::holds_alternative<double>(*x)) return false;
      const double u = std::get<double>(*x);
      const double v = std::get<double>(*y);
      if (!std::isfinite(u) || !std::isfinite(v)) return false;
      if (std::fabs(u - v) > rel_tol * std::max(std::fabs(u), std::fabs(v))) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Collectives

double fold_float(double acc, double next, coll::ReduceOp op) {
  switch (op) {
    case coll::ReduceOp::Sum: return acc + next;
    case coll::ReduceOp::Prod: return acc * next;
    case coll::ReduceOp::Min: {
      const bool smaller = !std::isnan(next) && (std::isnan(acc) || next < acc);
      return smaller ? next : acc;
    }
    case coll::ReduceOp::Max: {
      const bool larger = std::isnan(next) ? !std::isnan(acc) : (!std::isnan(acc) && next > acc);
      return larger ? next : acc;
    }
  }
  return acc;
}

std::int64_t fold_int(std::int64_t acc, std::int64_t next, coll::ReduceOp op) {
  switch (op) {
    case coll::ReduceOp::Sum:
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(acc) + static_cast<std::uint64_t>(next));
    case coll::ReduceOp::Prod:
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(acc) * static_cast<std::uint64_t>(next));
    case coll::ReduceOp::Min: return std::min(acc, next);
    case coll::ReduceOp::Max: return std::max(acc, next);
  }
  return acc;
}

coll::NumericArray fold_arrays(std::span<const coll::NumericArray> inputs, coll::ReduceOp op) {
  if (inputs.empty()) throw InvalidArgument("fold of nothing");
  coll::NumericArray acc = inputs[0];
  for (std::size_t r = 1; r < inputs.size(); ++r) {
    if (acc.type() == DataType::Int64) {
      for (std::size_t i = 0; i < acc.size(); ++i) acc.int64()[i] = fold_int(acc.int64()[i], inputs[r].int64()[i], op);
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc.float64()[i] = fold_float(acc.float64()[i], inputs[r].float64()[i], op);
      }
    }
  }
  return acc;
}

coll::NumericArray concat_arrays(std::span<const coll::NumericArray> inputs) {
  if (inputs.empty()) return {};
  if (inputs[0].type() == DataType::Int64) {
    std::vector<std::int64_t> all;
    for (const auto& p : inputs) all.insert(all.end(), p.int64().begin(), p.int64().end());
    return coll::NumericArray(std::move(all));
  }
  std::vector<double> all;
  for (const auto& p : inputs) all.insert(all.end(), p.float64().begin(), p.float64().end());
  return coll::NumericArray(std::move(all));
}

// ---------------------------------------------------------------------------
// Partitioning reference

namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::string encode_key_reference(const Row& row, std::span<const std::size_t> columns) {
  std::string out;
  for (auto c : columns) {
    const OptScalar& v = row[c];
    if (!v) {
      out.push_back('\x00');
      continue;
    }
    out.push_back('\x01');
    if (const auto* i = std::get_if<std::int64_t>(&*v)) {
      put_le(out, static_cast<std::uint64_t>(*i), 8);
    } else if (const auto* d = std::get_if<double>(&*v)) {
      std::uint64_t bits;
      if (std::isnan(*d)) {
        bits = 0x7FF8000000000000ULL;
      } else if (*d == 0.0) {
        bits = 0;
      } else {
        std::memcpy(&bits, d, 8);
      }
      put_le(out, bits, 8);
    } else if (const auto* b = std::get_if<bool>(&*v)) {
      out.push_back(*b ? '\x01' : '\x00');
    } else {
      const auto& s = std::get<std::string>(*v);
      put_le(out, s.size(), 4);
      out += s;
    }
  }
  return out;
}

std::uint64_t fnv1a_reference(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Random inputs

namespace {

double random_float(std::mt19937_64& rng, const GenOptions& o) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < o.nan_rate) return std::numeric_limits<double>::quiet_NaN();
  if (!o.float_pool) return std::uniform_real_distribution<double>(0.5, 100.0)(rng);
  // Small domain with signed zeros so that duplicates and canonicalization
  // both get exercised.
  static constexpr double kPool[] = {-0.0, 0.0, 0.5, -1.25, 3.0, 1e-300, -7.5, 1e10, 2.0, 0.1};
  std::uniform_int_distribution<int> pick(0, std::size(kPool) - 1);
  if (unit(rng) < 0.7) return kPool[pick(rng)];
  return std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
}

std::string random_string(std::mt19937_64& rng, const GenOptions& o) {
  std::uniform_int_distribution<std::size_t> len(0, o.max_string);
  std::uniform_int_distribution<int> ch(0, 3);
  static constexpr char kAlphabet[] = {'a', 'b', ',', '"'};
  std::string s(len(rng), 'a');
  for (auto& c : s) c = kAlphabet[ch(rng)];
  return s;
}

}  // namespace

Scalar random_literal(std::mt19937_64& rng, DataType type, const GenOptions& options) {
  switch (type) {
    case DataType::Int64: return std::uniform_int_distribution<std::int64_t>(0, options.int_range - 1)(rng);
    case DataType::Float64: return random_float(rng, options);
    case DataType::Bool: return std::bernoulli_distribution(0.5)(rng);
    case DataType::Utf8: return random_string(rng, options);
  }
  return std::int64_t{0};
}

Table random_table(std::mt19937_64& rng, const Schema& schema, std::size_t rows, const GenOptions& options) {
  std::bernoulli_distribution null(options.null_rate);
  std::vector<ColumnArray> cols;
  for (const auto& f : schema.fields()) {
    ColumnBuilder b(f.type, rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (null(rng)) {
        b.append_null();
      } else {
        b.append(random_literal(rng, f.type, options));
      }
    }
    cols.push_back(b.finish());
  }
  return Table(schema, std::move(cols));
}

Schema random_schema(std::mt19937_64& rng, std::size_t max_columns) {
  std::uniform_int_distribution<std::size_t> count(1, max_columns);
  std::uniform_int_distribution<int> type(0, 3);
  std::vector<Field> fields;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) fields.push_back({"c" + std::to_string(i), static_cast<DataType>(type(rng))});
  return Schema(fields);
}

std::vector<Table> random_partition(std::mt19937_64& rng, const Table& table, int parts) {
  std::vector<std::size_t> cuts{0, table.num_rows()};
  std::uniform_int_distribution<std::size_t> pos(0, table.num_rows());
  for (int i = 1; i < parts; ++i) cuts.push_back(pos(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<Table> out;
  for (int i = 0; i < parts; ++i) out.push_back(slice(table, cuts[i], cuts[i + 1] - cuts[i]));
  return out;
}

}  // namespace hptmt::oracle
