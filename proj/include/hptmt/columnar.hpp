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

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hptmt/error.hpp"

namespace hptmt {

enum class DataType : std::uint8_t {
  Int64 = 0,
  Float64 = 1,
  Bool = 2,
  Utf8 = 3,
};

const char* to_string(DataType type);

/// Byte width of a fixed-width type; 0 for Utf8.
std::size_t fixed_width(DataType type);

inline bool is_numeric(DataType type) {
  return type == DataType::Int64 || type == DataType::Float64;
}

using Scalar = std::variant<std::int64_t, double, bool, std::string>;
using OptScalar = std::optional<Scalar>;

DataType scalar_type(const Scalar& value);

/// -0.0 becomes +0.0 and every NaN becomes the quiet NaN 0x7FF8000000000000.
double canonical_float(double value);

/// A typed column: a contiguous value buffer, an optional validity bitmap
/// (LSB-first, 1 = present) and, for Utf8, length+1 offsets into the buffer.
///
/// Instances are immutable. The constructor checks every layout invariant and
/// drops an all-ones bitmap so that two logically equal columns have equal
/// buffers.
class ColumnArray {
 public:
  ColumnArray(DataType type, std::size_t length, std::vector<std::uint8_t> validity,
              std::vector<std::uint8_t> data, std::vector<std::uint32_t> offsets = {});

  static ColumnArray empty(DataType type);

  DataType type() const { return type_; }
  std::size_t length() const { return length_; }
  bool has_validity() const { return !validity_.empty(); }
  std::size_t null_count() const { return null_count_; }

  bool is_valid(std::size_t row) const {
    return validity_.empty() || ((validity_[row >> 3] >> (row & 7)) & 1) != 0;
  }
  bool is_null(std::size_t row) const { return !is_valid(row); }

  std::int64_t int64_at(std::size_t row) const {
    std::int64_t v;
    std::memcpy(&v, data_.data() + row * 8, 8);
    return v;
  }
  double float64_at(std::size_t row) const {
    double v;
    std::memcpy(&v, data_.data() + row * 8, 8);
    return v;
  }
  bool bool_at(std::size_t row) const { return data_[row] != 0; }
  std::string_view utf8_at(std::size_t row) const {
    return {reinterpret_cast<const char*>(data_.data()) + offsets_[row],
            offsets_[row + 1] - offsets_[row]};
  }

  OptScalar scalar_at(std::size_t row) const;

  const std::vector<std::uint8_t>& validity() const { return validity_; }
  const std::vector<std::uint8_t>& data() const { return data_; }
  const std::vector<std::uint32_t>& offsets() const { return offsets_; }

  /// Bytes held by this column's buffers.
  std::size_t byte_size() const;

  /// Re-checks the layout invariants; throws InvalidArgument.
  void validate() const;

 private:
  DataType type_;
  std::size_t length_;
  std::size_t null_count_ = 0;
  std::vector<std::uint8_t> validity_;
  std::vector<std::uint8_t> data_;
  std::vector<std::uint32_t> offsets_;
};

/// Appends values one at a time and produces a ColumnArray.
class ColumnBuilder {
 public:
  explicit ColumnBuilder(DataType type, std::size_t expected_rows = 0);

  DataType type() const { return type_; }
  std::size_t length() const { return length_; }
  std::size_t byte_size() const;

  void append_null();
  void append_int64(std::int64_t v);
  void append_float64(double v);
  void append_bool(bool v);
  void append_utf8(std::string_view v);

  /// Type-checked append; throws InvalidArgument on a dtype mismatch.
  void append(const OptScalar& value);
  void append_from(const ColumnArray& src, std::size_t row);
  void append_column(const ColumnArray& src);

  ColumnArray finish();

 private:
  void mark_valid(bool valid);

  DataType type_;
  std::size_t length_ = 0;
  bool any_null_ = false;
  std::vector<std::uint8_t> validity_;
  std::vector<std::uint8_t> data_;
  std::vector<std::uint32_t> offsets_;
};

/// make_array: builds a column from optional scalars (absent = null).
ColumnArray make_array(DataType type, std::span<const OptScalar> values);

struct Field {
  std::string name;
  DataType type;

  bool operator==(const Field&) const = default;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Field> fields);

  std::size_t size() const { return fields_.size(); }
  const Field& field(std::size_t i) const { return fields_[i]; }
  const std::vector<Field>& fields() const { return fields_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Throws InvalidArgument for unknown names.
  std::size_t require_index(std::string_view name) const;

  std::string to_string() const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Field> fields_;
};

using ColumnPtr = std::shared_ptr<const ColumnArray>;

/// Schema plus equal-length columns. Columns are shared, so copies and
/// projections are cheap.
class Table {
 public:
  Table() = default;
  Table(Schema schema, std::vector<ColumnArray> columns);
  Table(Schema schema, std::vector<ColumnPtr> columns);

  static Table empty(const Schema& schema);

  const Schema& schema() const { return schema_; }
  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_columns() const { return columns_.size(); }
  const ColumnArray& column(std::size_t i) const { return *columns_[i]; }
  const ColumnPtr& column_ptr(std::size_t i) const { return columns_[i]; }
  const ColumnArray& column(std::string_view name) const {
    return *columns_[schema_.require_index(name)];
  }

  std::size_t byte_size() const;

 private:
  Schema schema_;
  std::vector<ColumnPtr> columns_;
  std::size_t num_rows_ = 0;
};

/// Row-wise table construction; columns follow the schema.
class TableBuilder {
 public:
  explicit TableBuilder(Schema schema, std::size_t expected_rows = 0);

  const Schema& schema() const { return schema_; }
  std::size_t num_rows() const { return rows_; }
  std::size_t byte_size() const;

  void append_row(const Table& src, std::size_t row);
  void append_table(const Table& src);
  ColumnBuilder& column(std::size_t i) { return columns_[i]; }
  /// Call after appending to every column directly.
  void commit_rows(std::size_t n) { rows_ += n; }

  Table finish();

 private:
  Schema schema_;
  std::vector<ColumnBuilder> columns_;
  std::size_t rows_ = 0;
};

using RowIndex = std::uint32_t;

/// Rows in input order, table by table. Throws on schema mismatch.
Table concat_tables(std::span<const Table> tables, const Schema* schema_if_empty = nullptr);

/// Gathers rows by position; throws InvalidArgument if an index is out of range.
Table take(const Table& table, std::span<const RowIndex> indices);
ColumnArray take_column(const ColumnArray& column, std::span<const RowIndex> indices);
/// Like take_column, with -1 producing a null row.
ColumnArray take_column_nullable(const ColumnArray& column, std::span<const std::int64_t> indices);

/// Rows [offset, offset + count).
Table slice(const Table& table, std::size_t offset, std::size_t count);

std::vector<std::size_t> resolve_columns(const Schema& schema, std::span<const std::string> names);

struct RowKey {
  std::string bytes;

  bool operator==(const RowKey&) const = default;
  auto operator<=>(const RowKey&) const = default;
};

/// Canonical key encoding of one row restricted to key_columns: per column
/// 0x00 for null, otherwise 0x01 followed by the little-endian value (Utf8:
/// u32 length then the bytes). Floats are canonicalized first.
RowKey encode_row_key(const Table& table, std::size_t row, std::span<const std::size_t> key_columns);
void append_row_key(const Table& table, std::size_t row, std::span<const std::size_t> key_columns,
                    std::string& out);

/// Keys of every row packed into one buffer; key i is
/// bytes[offsets[i], offsets[i+1]).
struct EncodedKeys {
  std::string bytes;
  std::vector<std::size_t> offsets;
  /// Set when any key column of the row is null.
  std::vector<std::uint8_t> has_null;

  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::string_view key(std::size_t i) const {
    return std::string_view(bytes).substr(offsets[i], offsets[i + 1] - offsets[i]);
  }
};

EncodedKeys encode_keys(const Table& table, std::span<const std::size_t> key_columns);

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Fnv1aHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return fnv1a64(s); }
};

/// Rows sorted by their all-column RowKey bytes. Stable and deterministic;
/// meant for order-insensitive comparisons.
Table canonicalize(const Table& table);

/// Same schema and row-by-row equal RowKeys over all columns.
bool equal_contents(const Table& a, const Table& b);

std::uint64_t schema_fingerprint(const Schema& schema);

}  // namespace hptmt
