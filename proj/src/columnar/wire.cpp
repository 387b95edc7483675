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

#include "hptmt/wire.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace hptmt {
namespace {

constexpr char kMagic[4] = {'H', 'P', 'T', '1'};

class Writer {
 public:
  virtual ~Writer() = default;
  virtual void write(const void* src, std::size_t n) = 0;

  template <typename T>
  void put(T v) {
    write(&v, sizeof(T));
  }
};

class BufferWriter final : public Writer {
 public:
  explicit BufferWriter(Bytes& out) : out_(out) {}
  void write(const void* src, std::size_t n) override {
    const auto* p = static_cast<const std::uint8_t*>(src);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  Bytes& out_;
};

class StreamWriter final : public Writer {
 public:
  explicit StreamWriter(std::ostream& out) : out_(out) {}
  void write(const void* src, std::size_t n) override {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write_table: stream write failed");
  }

 private:
  std::ostream& out_;
};

void write_impl(Writer& w, const Table& table) {
  w.write(kMagic, 4);
  w.put(static_cast<std::uint32_t>(table.num_columns()));
  w.put(static_cast<std::uint64_t>(table.num_rows()));
  const std::size_t rows = table.num_rows();
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const Field& f = table.schema().field(c);
    const ColumnArray& col = table.column(c);
    if (f.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("column name too long for wire format");
    }
    w.put(static_cast<std::uint16_t>(f.name.size()));
    w.write(f.name.data(), f.name.size());
    w.put(static_cast<std::uint8_t>(f.type));
    w.put(static_cast<std::uint8_t>(col.has_validity() ? 1 : 0));
    if (col.has_validity()) w.write(col.validity().data(), col.validity().size());
    if (f.type == DataType::Utf8) {
      w.write(col.offsets().data(), (rows + 1) * sizeof(std::uint32_t));
      w.put(static_cast<std::uint64_t>(col.data().size()));
      w.write(col.data().data(), col.data().size());
    } else {
      w.write(col.data().data(), col.data().size());
    }
  }
}

class Reader {
 public:
  virtual ~Reader() = default;
  /// Returns the number of bytes actually read.
  virtual std::size_t read_some(void* dst, std::size_t n) = 0;
  /// Upper bound on remaining bytes, if known.
  virtual std::optional<std::size_t> remaining() const = 0;

  void read(void* dst, std::size_t n, const char* what) {
    if (read_some(dst, n) != n) throw ParseError(ParseErrorKind::kTruncated, what);
  }
  template <typename T>
  T get(const char* what) {
    T v;
    read(&v, sizeof(T), what);
    return v;
  }
  /// Fails early when a declared size cannot fit in what is left.
  void require(std::uint64_t n, const char* what) const {
    auto left = remaining();
    if (left && n > *left) throw ParseError(ParseErrorKind::kTruncated, what);
  }
};

class SpanReader final : public Reader {
 public:
  explicit SpanReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::size_t read_some(void* dst, std::size_t n) override {
    const std::size_t k = std::min(n, bytes_.size() - pos_);
    if (k) std::memcpy(dst, bytes_.data() + pos_, k);
    pos_ += k;
    return k;
  }
  std::optional<std::size_t> remaining() const override { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class StreamReader final : public Reader {
 public:
  explicit StreamReader(std::istream& in) : in_(in) {}
  std::size_t read_some(void* dst, std::size_t n) override {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount());
  }
  std::optional<std::size_t> remaining() const override { return std::nullopt; }

 private:
  std::istream& in_;
};

Table read_body(Reader& r) {
  const auto column_count = r.get<std::uint32_t>("column_count");
  const auto row_count = r.get<std::uint64_t>("row_count");
  // Each column needs at least 4 header bytes.
  r.require(std::uint64_t{column_count} * 4, "column headers");
  if (row_count > std::numeric_limits<std::uint32_t>::max()) {
    throw ParseError(ParseErrorKind::kBadLayout, "row_count exceeds 32-bit range");
  }
  const std::size_t rows = static_cast<std::size_t>(row_count);
  std::vector<Field> fields;
  std::vector<ColumnArray> columns;
  fields.reserve(column_count);
  columns.reserve(column_count);
  for (std::uint32_t c = 0; c < column_count; ++c) {
    const auto name_len = r.get<std::uint16_t>("name_length");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, "column name");
    const auto tag = r.get<std::uint8_t>("type tag");
    if (tag > 3) throw ParseError(ParseErrorKind::kBadTypeTag, "type tag " + std::to_string(tag));
    const auto type = static_cast<DataType>(tag);
    const auto has_validity = r.get<std::uint8_t>("has_validity");
    if (has_validity > 1) throw ParseError(ParseErrorKind::kBadLayout, "has_validity must be 0 or 1");
    std::vector<std::uint8_t> validity;
    if (has_validity) {
      const std::size_t n = (rows + 7) / 8;
      r.require(n, "validity bitmap");
      validity.resize(n);
      r.read(validity.data(), n, "validity bitmap");
    }
    std::vector<std::uint8_t> data;
    std::vector<std::uint32_t> offsets;
    if (type == DataType::Utf8) {
      r.require((std::uint64_t{rows} + 1) * 4, "utf8 offsets");
      offsets.resize(rows + 1);
      r.read(offsets.data(), (rows + 1) * 4, "utf8 offsets");
      if (offsets[0] != 0) throw ParseError(ParseErrorKind::kBadOffsets, "offsets[0] != 0");
      for (std::size_t i = 0; i < rows; ++i) {
        if (offsets[i + 1] < offsets[i]) {
          throw ParseError(ParseErrorKind::kBadOffsets, "offset " + std::to_string(i + 1) + " decreases");
        }
      }
      const auto data_len = r.get<std::uint64_t>("data_length");
      if (data_len != offsets[rows]) {
        throw ParseError(ParseErrorKind::kBadOffsets, "last offset does not equal data_length");
      }
      r.require(data_len, "utf8 data");
      data.resize(static_cast<std::size_t>(data_len));
      r.read(data.data(), data.size(), "utf8 data");
    } else {
      const std::uint64_t n = std::uint64_t{rows} * fixed_width(type);
      r.require(n, "column data");
      data.resize(static_cast<std::size_t>(n));
      r.read(data.data(), data.size(), "column data");
    }
    try {
      columns.emplace_back(type, rows, std::move(validity), std::move(data), std::move(offsets));
    } catch (const InvalidArgument& e) {
      throw ParseError(ParseErrorKind::kBadLayout, e.what());
    }
    fields.push_back(Field{std::move(name), type});
  }
  try {
    if (column_count == 0 && rows != 0) {
      throw InvalidArgument("a table without columns cannot have rows");
    }
    return Table(Schema(std::move(fields)), std::move(columns));
  } catch (const InvalidArgument& e) {
    throw ParseError(ParseErrorKind::kBadLayout, e.what());
  }
}

void check_magic(const char (&magic)[4]) {
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError(ParseErrorKind::kBadMagic, "expected HPT1");
}

}  // namespace

Bytes serialize_table(const Table& table) {
  Bytes out;
  out.reserve(serialized_size(table));
  BufferWriter w(out);
  write_impl(w, table);
  return out;
}

std::size_t serialized_size(const Table& table) {
  std::size_t n = 16;
  const std::size_t rows = table.num_rows();
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const auto& col = table.column(c);
    n += 2 + table.schema().field(c).name.size() + 2;
    if (col.has_validity()) n += (rows + 7) / 8;
    if (col.type() == DataType::Utf8) {
      n += (rows + 1) * 4 + 8 + col.data().size();
    } else {
      n += col.data().size();
    }
  }
  return n;
}

void write_table(std::ostream& out, const Table& table) {
  StreamWriter w(out);
  write_impl(w, table);
}

Table deserialize_table(std::span<const std::uint8_t> bytes) {
  SpanReader r(bytes);
  char magic[4];
  r.read(magic, 4, "magic");
  check_magic(magic);
  Table t = read_body(r);
  if (*r.remaining() != 0) {
    throw ParseError(ParseErrorKind::kTrailingBytes, std::to_string(*r.remaining()) + " bytes after table");
  }
  return t;
}

std::optional<Table> read_table(std::istream& in) {
  StreamReader r(in);
  char magic[4];
  const std::size_t got = r.read_some(magic, 4);
  if (got == 0) return std::nullopt;
  if (got != 4) throw ParseError(ParseErrorKind::kTruncated, "magic");
  check_magic(magic);
  return read_body(r);
}

}  // namespace hptmt
