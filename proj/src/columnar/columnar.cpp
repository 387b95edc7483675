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

#include "hptmt/columnar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace hptmt {

static_assert(std::endian::native == std::endian::little,
              "buffers are stored little-endian and copied verbatim");

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::kBadMagic: return "bad magic";
    case ParseErrorKind::kTruncated: return "truncated buffer";
    case ParseErrorKind::kBadOffsets: return "offsets not monotonic";
    case ParseErrorKind::kBadTypeTag: return "bad type tag";
    case ParseErrorKind::kBadLayout: return "bad layout";
    case ParseErrorKind::kTrailingBytes: return "trailing bytes";
  }
  return "parse error";
}

const char* to_string(DataType type) {
  switch (type) {
    case DataType::Int64: return "int64";
    case DataType::Float64: return "float64";
    case DataType::Bool: return "bool";
    case DataType::Utf8: return "utf8";
  }
  return "?";
}

std::size_t fixed_width(DataType type) {
  switch (type) {
    case DataType::Int64:
    case DataType::Float64: return 8;
    case DataType::Bool: return 1;
    case DataType::Utf8: return 0;
  }
  return 0;
}

DataType scalar_type(const Scalar& value) {
  switch (value.index()) {
    case 0: return DataType::Int64;
    case 1: return DataType::Float64;
    case 2: return DataType::Bool;
    default: return DataType::Utf8;
  }
}

double canonical_float(double value) {
  if (std::isnan(value)) return std::bit_cast<double>(std::uint64_t{0x7FF8000000000000ULL});
  if (value == 0.0) return 0.0;
  return value;
}

// ---------------------------------------------------------------------------
// ColumnArray

ColumnArray::ColumnArray(DataType type, std::size_t length, std::vector<std::uint8_t> validity,
                         std::vector<std::uint8_t> data, std::vector<std::uint32_t> offsets)
    : type_(type),
      length_(length),
      validity_(std::move(validity)),
      data_(std::move(data)),
      offsets_(std::move(offsets)) {
  if (!validity_.empty()) {
    if (validity_.size() != (length_ + 7) / 8) {
      throw InvalidArgument("validity bitmap size does not match length");
    }
    if (length_ % 8 != 0) {
      validity_.back() &= static_cast<std::uint8_t>((1u << (length_ % 8)) - 1);
    }
    std::size_t valid = 0;
    for (auto b : validity_) valid += std::popcount(b);
    null_count_ = length_ - valid;
    if (null_count_ == 0) validity_.clear();
  }
  validate();
}

ColumnArray ColumnArray::empty(DataType type) {
  return ColumnArray(type, 0, {}, {}, type == DataType::Utf8 ? std::vector<std::uint32_t>{0}
                                                             : std::vector<std::uint32_t>{});
}

void ColumnArray::validate() const {
  if (type_ == DataType::Utf8) {
    if (offsets_.size() != length_ + 1) throw InvalidArgument("utf8 offsets must have length+1 entries");
    if (offsets_[0] != 0) throw InvalidArgument("utf8 offsets[0] must be 0");
    for (std::size_t i = 0; i < length_; ++i) {
      if (offsets_[i + 1] < offsets_[i]) throw InvalidArgument("utf8 offsets not monotonic");
    }
    if (offsets_[length_] != data_.size()) throw InvalidArgument("utf8 offsets do not cover data");
    if (null_count_ > 0) {
      for (std::size_t i = 0; i < length_; ++i) {
        if (is_null(i) && offsets_[i + 1] != offsets_[i]) {
          throw InvalidArgument("null utf8 slot must be empty");
        }
      }
    }
    return;
  }
  if (!offsets_.empty()) throw InvalidArgument("fixed-width column cannot carry offsets");
  const std::size_t width = fixed_width(type_);
  if (data_.size() != length_ * width) throw InvalidArgument("data buffer size != length * width");
  if (type_ == DataType::Bool) {
    for (auto b : data_) {
      if (b > 1) throw InvalidArgument("bool values must be 0 or 1");
    }
  }
  if (null_count_ > 0) {
    for (std::size_t i = 0; i < length_; ++i) {
      if (!is_null(i)) continue;
      for (std::size_t k = 0; k < width; ++k) {
        if (data_[i * width + k] != 0) throw InvalidArgument("null slot must be zeroed");
      }
    }
  }
}

OptScalar ColumnArray::scalar_at(std::size_t row) const {
  if (is_null(row)) return std::nullopt;
  switch (type_) {
    case DataType::Int64: return Scalar{int64_at(row)};
    case DataType::Float64: return Scalar{float64_at(row)};
    case DataType::Bool: return Scalar{bool_at(row)};
    case DataType::Utf8: return Scalar{std::string(utf8_at(row))};
  }
  return std::nullopt;
}

std::size_t ColumnArray::byte_size() const {
  return validity_.size() + data_.size() + offsets_.size() * sizeof(std::uint32_t);
}

// ---------------------------------------------------------------------------
// ColumnBuilder

ColumnBuilder::ColumnBuilder(DataType type, std::size_t expected_rows) : type_(type) {
  if (type_ == DataType::Utf8) {
    offsets_.reserve(expected_rows + 1);
    offsets_.push_back(0);
  } else {
    data_.reserve(expected_rows * fixed_width(type_));
  }
}

std::size_t ColumnBuilder::byte_size() const {
  return (any_null_ ? validity_.size() : 0) + data_.size() + offsets_.size() * sizeof(std::uint32_t);
}

void ColumnBuilder::mark_valid(bool valid) {
  if ((length_ & 7) == 0) validity_.push_back(0);
  if (valid) {
    validity_.back() |= static_cast<std::uint8_t>(1u << (length_ & 7));
  } else {
    any_null_ = true;
  }
  ++length_;
}

void ColumnBuilder::append_null() {
  if (type_ == DataType::Utf8) {
    offsets_.push_back(offsets_.back());
  } else {
    data_.resize(data_.size() + fixed_width(type_), 0);
  }
  mark_valid(false);
}

void ColumnBuilder::append_int64(std::int64_t v) {
  const auto pos = data_.size();
  data_.resize(pos + 8);
  std::memcpy(data_.data() + pos, &v, 8);
  mark_valid(true);
}

void ColumnBuilder::append_float64(double v) {
  const auto pos = data_.size();
  data_.resize(pos + 8);
  std::memcpy(data_.data() + pos, &v, 8);
  mark_valid(true);
}

void ColumnBuilder::append_bool(bool v) {
  data_.push_back(v ? 1 : 0);
  mark_valid(true);
}

void ColumnBuilder::append_utf8(std::string_view v) {
  if (data_.size() + v.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("utf8 column exceeds 32-bit offsets");
  }
  data_.insert(data_.end(), v.begin(), v.end());
  offsets_.push_back(static_cast<std::uint32_t>(data_.size()));
  mark_valid(true);
}

void ColumnBuilder::append(const OptScalar& value) {
  if (!value) {
    append_null();
    return;
  }
  if (scalar_type(*value) != type_) {
    throw InvalidArgument(std::string("scalar of type ") + to_string(scalar_type(*value)) +
                          " does not match column type " + to_string(type_));
  }
  switch (type_) {
    case DataType::Int64: append_int64(std::get<std::int64_t>(*value)); break;
    case DataType::Float64: append_float64(std::get<double>(*value)); break;
    case DataType::Bool: append_bool(std::get<bool>(*value)); break;
    case DataType::Utf8: append_utf8(std::get<std::string>(*value)); break;
  }
}

void ColumnBuilder::append_from(const ColumnArray& src, std::size_t row) {
  if (src.is_null(row)) {
    append_null();
    return;
  }
  switch (type_) {
    case DataType::Int64:
    case DataType::Float64: {
      const auto pos = data_.size();
      data_.resize(pos + 8);
      std::memcpy(data_.data() + pos, src.data().data() + row * 8, 8);
      mark_valid(true);
      break;
    }
    case DataType::Bool: append_bool(src.bool_at(row)); break;
    case DataType::Utf8: append_utf8(src.utf8_at(row)); break;
  }
}

void ColumnBuilder::append_column(const ColumnArray& src) {
  if (src.type() != type_) throw InvalidArgument("append_column: type mismatch");
  const std::size_t n = src.length();
  if (n == 0) return;
  if (type_ == DataType::Utf8) {
    const std::uint32_t base = offsets_.back();
    if (std::size_t{base} + src.data().size() > std::numeric_limits<std::uint32_t>::max()) {
      throw InvalidArgument("utf8 column exceeds 32-bit offsets");
    }
    data_.insert(data_.end(), src.data().begin(), src.data().end());
    for (std::size_t i = 1; i <= n; ++i) offsets_.push_back(base + src.offsets()[i]);
  } else {
    data_.insert(data_.end(), src.data().begin(), src.data().end());
  }
  if ((length_ & 7) == 0 && !src.has_validity()) {
    // Fast path: byte-aligned and all valid.
    validity_.resize(validity_.size() + n / 8, 0xFF);
    if (n % 8) validity_.push_back(static_cast<std::uint8_t>((1u << (n % 8)) - 1));
    length_ += n;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool valid = src.is_valid(i);
    if ((length_ & 7) == 0) validity_.push_back(0);
    if (valid) {
      validity_.back() |= static_cast<std::uint8_t>(1u << (length_ & 7));
    } else {
      any_null_ = true;
    }
    ++length_;
  }
}

ColumnArray ColumnBuilder::finish() {
  std::vector<std::uint8_t> validity;
  if (any_null_) validity = std::move(validity_);
  ColumnArray out(type_, length_, std::move(validity), std::move(data_), std::move(offsets_));
  *this = ColumnBuilder(type_);
  return out;
}

ColumnArray make_array(DataType type, std::span<const OptScalar> values) {
  ColumnBuilder b(type, values.size());
  for (const auto& v : values) b.append(v);
  return b.finish();
}

// ---------------------------------------------------------------------------
// Schema / Table

Schema::Schema(std::vector<Field> fields) : fields_(std::move(fields)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& f : fields_) {
    if (f.name.empty()) throw InvalidArgument("field names must be non-empty");
    if (!seen.insert(f.name).second) throw InvalidArgument("duplicate field name '" + f.name + "'");
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::require_index(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw InvalidArgument("unknown column '" + std::string(name) + "'");
  return *idx;
}

std::string Schema::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) out += ",";
    out += fields_[i].name;
    out += ":";
    out += hptmt::to_string(fields_[i].type);
  }
  return out;
}

namespace {

std::vector<ColumnPtr> share(std::vector<ColumnArray> columns) {
  std::vector<ColumnPtr> out;
  out.reserve(columns.size());
  for (auto& c : columns) out.push_back(std::make_shared<const ColumnArray>(std::move(c)));
  return out;
}

}  // namespace

Table::Table(Schema schema, std::vector<ColumnArray> columns)
    : Table(std::move(schema), share(std::move(columns))) {}

Table::Table(Schema schema, std::vector<ColumnPtr> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.size()) {
    throw InvalidArgument("column count does not match schema");
  }
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (!columns_[i]) throw InvalidArgument("null column pointer");
    if (columns_[i]->type() != schema_.field(i).type) {
      throw InvalidArgument("column '" + schema_.field(i).name + "' type does not match schema");
    }
    if (i == 0) {
      num_rows_ = columns_[i]->length();
    } else if (columns_[i]->length() != num_rows_) {
      throw InvalidArgument("columns have different lengths");
    }
  }
}

Table Table::empty(const Schema& schema) {
  std::vector<ColumnArray> cols;
  cols.reserve(schema.size());
  for (const auto& f : schema.fields()) cols.push_back(ColumnArray::empty(f.type));
  return Table(schema, std::move(cols));
}

std::size_t Table::byte_size() const {
  std::size_t total = 0;
  for (const auto& c : columns_) total += c->byte_size();
  return total;
}

TableBuilder::TableBuilder(Schema schema, std::size_t expected_rows) : schema_(std::move(schema)) {
  columns_.reserve(schema_.size());
  for (const auto& f : schema_.fields()) columns_.emplace_back(f.type, expected_rows);
}

std::size_t TableBuilder::byte_size() const {
  std::size_t total = 0;
  for (const auto& c : columns_) total += c.byte_size();
  return total;
}

void TableBuilder::append_row(const Table& src, std::size_t row) {
  for (std::size_t c = 0; c < columns_.size(); ++c) columns_[c].append_from(src.column(c), row);
  ++rows_;
}

void TableBuilder::append_table(const Table& src) {
  if (src.schema() != schema_) throw InvalidArgument("append_table: schema mismatch");
  for (std::size_t c = 0; c < columns_.size(); ++c) columns_[c].append_column(src.column(c));
  rows_ += src.num_rows();
}

Table TableBuilder::finish() {
  std::vector<ColumnArray> cols;
  cols.reserve(columns_.size());
  for (auto& c : columns_) cols.push_back(c.finish());
  rows_ = 0;
  return Table(schema_, std::move(cols));
}

// ---------------------------------------------------------------------------
// concat / take / slice

Table concat_tables(std::span<const Table> tables, const Schema* schema_if_empty) {
  if (tables.empty()) {
    if (!schema_if_empty) throw InvalidArgument("concat_tables: no inputs and no schema");
    return Table::empty(*schema_if_empty);
  }
  if (tables.size() == 1) return tables[0];
  const Schema& schema = tables[0].schema();
  std::size_t rows = 0;
  for (const auto& t : tables) {
    if (t.schema() != schema) throw InvalidArgument("concat_tables: schema mismatch");
    rows += t.num_rows();
  }
  TableBuilder b(schema, rows);
  for (const auto& t : tables) b.append_table(t);
  return b.finish();
}

ColumnArray take_column(const ColumnArray& column, std::span<const RowIndex> indices) {
  const std::size_t n = indices.size();
  const bool nullable = column.has_validity();
  std::vector<std::uint8_t> validity;
  if (nullable) validity.assign((n + 7) / 8, 0);
  auto set_valid = [&](std::size_t i, std::size_t src) {
    if (nullable && column.is_valid(src)) validity[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  };
  if (column.type() == DataType::Utf8) {
    std::vector<std::uint32_t> offsets(n + 1);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = indices[i];
      total += column.offsets()[src + 1] - column.offsets()[src];
      if (total > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("utf8 column exceeds 32-bit offsets");
      }
      offsets[i + 1] = static_cast<std::uint32_t>(total);
    }
    std::vector<std::uint8_t> data(total);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = indices[i];
      const auto begin = column.offsets()[src];
      const auto len = column.offsets()[src + 1] - begin;
      if (len) std::memcpy(data.data() + offsets[i], column.data().data() + begin, len);
      set_valid(i, src);
    }
    return ColumnArray(column.type(), n, std::move(validity), std::move(data), std::move(offsets));
  }
  const std::size_t width = fixed_width(column.type());
  std::vector<std::uint8_t> data(n * width);
  const std::uint8_t* in = column.data().data();
  std::uint8_t* out = data.data();
  if (width == 8) {
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(out + i * 8, in + std::size_t{indices[i]} * 8, 8);
      set_valid(i, indices[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = in[indices[i]];
      set_valid(i, indices[i]);
    }
  }
  return ColumnArray(column.type(), n, std::move(validity), std::move(data));
}

ColumnArray take_column_nullable(const ColumnArray& column, std::span<const std::int64_t> indices) {
  ColumnBuilder b(column.type(), indices.size());
  for (auto idx : indices) {
    if (idx < 0) {
      b.append_null();
    } else {
      b.append_from(column, static_cast<std::size_t>(idx));
    }
  }
  return b.finish();
}

Table take(const Table& table, std::span<const RowIndex> indices) {
  const std::size_t rows = table.num_rows();
  for (auto idx : indices) {
    if (idx >= rows) {
      throw InvalidArgument("take: index " + std::to_string(idx) + " out of bounds for " +
                            std::to_string(rows) + " rows");
    }
  }
  std::vector<ColumnArray> cols;
  cols.reserve(table.num_columns());
  for (std::size_t c = 0; c < table.num_columns(); ++c) cols.push_back(take_column(table.column(c), indices));
  return Table(table.schema(), std::move(cols));
}

Table slice(const Table& table, std::size_t offset, std::size_t count) {
  if (offset > table.num_rows() || count > table.num_rows() - offset) {
    throw InvalidArgument("slice out of bounds");
  }
  if (offset == 0 && count == table.num_rows()) return table;
  std::vector<RowIndex> idx(count);
  std::iota(idx.begin(), idx.end(), static_cast<RowIndex>(offset));
  return take(table, idx);
}

std::vector<std::size_t> resolve_columns(const Schema& schema, std::span<const std::string> names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(schema.require_index(n));
  return out;
}

// ---------------------------------------------------------------------------
// Row keys

namespace {

inline void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

inline void append_value_key(const ColumnArray& col, std::size_t row, std::string& out) {
  if (col.is_null(row)) {
    out.push_back('\0');
    return;
  }
  out.push_back('\x01');
  switch (col.type()) {
    case DataType::Int64: put_u64(out, static_cast<std::uint64_t>(col.int64_at(row))); break;
    case DataType::Float64:
      put_u64(out, std::bit_cast<std::uint64_t>(canonical_float(col.float64_at(row))));
      break;
    case DataType::Bool: out.push_back(col.bool_at(row) ? '\x01' : '\0'); break;
    case DataType::Utf8: {
      auto s = col.utf8_at(row);
      const auto len = static_cast<std::uint32_t>(s.size());
      char buf[4];
      std::memcpy(buf, &len, 4);
      out.append(buf, 4);
      out.append(s);
      break;
    }
  }
}

}  // namespace

void append_row_key(const Table& table, std::size_t row, std::span<const std::size_t> key_columns,
                    std::string& out) {
  for (auto c : key_columns) append_value_key(table.column(c), row, out);
}

RowKey encode_row_key(const Table& table, std::size_t row, std::span<const std::size_t> key_columns) {
  RowKey key;
  append_row_key(table, row, key_columns, key.bytes);
  return key;
}

EncodedKeys encode_keys(const Table& table, std::span<const std::size_t> key_columns) {
  EncodedKeys keys;
  const std::size_t n = table.num_rows();
  keys.offsets.resize(n + 1);
  keys.has_null.assign(n, 0);
  std::size_t estimate = 0;
  for (auto c : key_columns) {
    const auto& col = table.column(c);
    estimate += n * (1 + (col.type() == DataType::Utf8 ? 4 : fixed_width(col.type()))) +
                (col.type() == DataType::Utf8 ? col.data().size() : 0);
  }
  keys.bytes.reserve(estimate);
  bool any_nullable = false;
  for (auto c : key_columns) any_nullable |= table.column(c).has_validity();
  for (std::size_t r = 0; r < n; ++r) {
    keys.offsets[r] = keys.bytes.size();
    append_row_key(table, r, key_columns, keys.bytes);
    if (any_nullable) {
      for (auto c : key_columns) {
        if (table.column(c).is_null(r)) {
          keys.has_null[r] = 1;
          break;
        }
      }
    }
  }
  keys.offsets[n] = keys.bytes.size();
  return keys;
}

Table canonicalize(const Table& table) {
  std::vector<std::size_t> all(table.num_columns());
  std::iota(all.begin(), all.end(), 0);
  const EncodedKeys keys = encode_keys(table, all);
  std::vector<RowIndex> order(table.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](RowIndex a, RowIndex b) { return keys.key(a) < keys.key(b); });
  return take(table, order);
}

bool equal_contents(const Table& a, const Table& b) {
  if (a.schema() != b.schema() || a.num_rows() != b.num_rows()) return false;
  std::vector<std::size_t> all(a.num_columns());
  std::iota(all.begin(), all.end(), 0);
  const EncodedKeys ka = encode_keys(a, all);
  const EncodedKeys kb = encode_keys(b, all);
  return ka.bytes == kb.bytes && ka.offsets == kb.offsets;
}

std::uint64_t schema_fingerprint(const Schema& schema) {
  std::string bytes;
  for (const auto& f : schema.fields()) {
    bytes += f.name;
    bytes.push_back('\0');
    bytes.push_back(static_cast<char>(f.type));
  }
  return fnv1a64(bytes);
}

}  // namespace hptmt
