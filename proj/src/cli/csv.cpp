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

#include "hptmt/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace hptmt::csv {

CsvError::CsvError(const std::string& what, std::size_t line, std::size_t column)
    : InvalidArgument(line == 0 ? what
                                : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

struct Cell {
  std::string text;
  bool quoted = false;
};

/// Splits text into records of cells. Tracks the line each record starts on.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool next(std::vector<Cell>& record, std::size_t& line) {
    record.clear();
    if (pos_ >= text_.size()) return false;
    line = line_;
    Cell cell;
    for (;;) {
      if (pos_ >= text_.size()) {
        record.push_back(std::move(cell));
        return true;
      }
      const char c = text_[pos_];
      if (c == '"' && cell.text.empty() && !cell.quoted) {
        cell.quoted = true;
        ++pos_;
        read_quoted(cell, line);
        continue;
      }
      if (c == ',') {
        record.push_back(std::move(cell));
        cell = Cell{};
        ++pos_;
        continue;
      }
      if (c == '\r' || c == '\n') {
        pos_ += (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ? 2 : 1;
        ++line_;
        record.push_back(std::move(cell));
        return true;
      }
      if (cell.quoted) throw CsvError("unexpected character after closing quote", line_, record.size() + 1);
      cell.text.push_back(c);
      ++pos_;
    }
  }

 private:
  void read_quoted(Cell& cell, std::size_t start_line) {
    for (;;) {
      if (pos_ >= text_.size()) throw CsvError("unterminated quoted field", start_line, 0);
      const char c = text_[pos_++];
      if (c == '"') {
        if (pos_ < text_.size() && text_[pos_] == '"') {
          cell.text.push_back('"');
          ++pos_;
          continue;
        }
        return;
      }
      if (c == '\n') ++line_;
      cell.text.push_back(c);
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool needs_quotes(std::string_view s) {
  return s.empty() || s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_quoted(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void append_text(std::string& out, std::string_view s) {
  if (needs_quotes(s)) {
    append_quoted(out, s);
  } else {
    out.append(s);
  }
}

}  // namespace

Schema parse_schema_spec(std::string_view spec) {
  std::vector<Field> fields;
  std::size_t start = 0;
  if (trim(spec).empty()) throw InvalidArgument("empty schema spec");
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto item = trim(spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    const auto colon = item.rfind(':');
    if (colon == std::string_view::npos) throw InvalidArgument("schema item '" + std::string(item) + "' needs name:type");
    const auto name = trim(item.substr(0, colon));
    const auto type = trim(item.substr(colon + 1));
    DataType dt;
    if (type == "i64") {
      dt = DataType::Int64;
    } else if (type == "f64") {
      dt = DataType::Float64;
    } else if (type == "bool") {
      dt = DataType::Bool;
    } else if (type == "str") {
      dt = DataType::Utf8;
    } else {
      throw InvalidArgument("unknown type '" + std::string(type) + "' (expected i64, f64, bool or str)");
    }
    fields.push_back({std::string(name), dt});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return Schema(std::move(fields));
}

std::string schema_spec(const Schema& schema) {
  std::string out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) out += ',';
    out += schema.field(i).name + ':';
    switch (schema.field(i).type) {
      case DataType::Int64: out += "i64"; break;
      case DataType::Float64: out += "f64"; break;
      case DataType::Bool: out += "bool"; break;
      case DataType::Utf8: out += "str"; break;
    }
  }
  return out;
}

Table parse_csv(std::string_view text, const Schema& schema) {
  Reader reader(text);
  std::vector<Cell> record;
  std::size_t line = 0;
  if (!reader.next(record, line)) throw CsvError("missing header row");
  if (record.size() != schema.size()) {
    throw CsvError("header has " + std::to_string(record.size()) + " columns, schema has " +
                       std::to_string(schema.size()),
                   line, 0);
  }
  for (std::size_t c = 0; c < record.size(); ++c) {
    if (record[c].text != schema.field(c).name) {
      throw CsvError("header '" + record[c].text + "' does not match schema field '" + schema.field(c).name + "'",
                     line, c + 1);
    }
  }

  TableBuilder builder(schema);
  while (reader.next(record, line)) {
    if (record.size() != schema.size()) {
      throw CsvError("expected " + std::to_string(schema.size()) + " fields, found " + std::to_string(record.size()),
                     line, 0);
    }
    for (std::size_t c = 0; c < record.size(); ++c) {
      const Cell& cell = record[c];
      ColumnBuilder& col = builder.column(c);
      const DataType type = schema.field(c).type;
      if (!cell.quoted && cell.text.empty()) {
        col.append_null();
        continue;
      }
      if (type == DataType::Utf8) {
        col.append_utf8(cell.text);
        continue;
      }
      const auto s = trim(cell.text);
      bool ok = false;
      switch (type) {
        case DataType::Int64: {
          std::int64_t v;
          if ((ok = parse_number(s, v))) col.append_int64(v);
          break;
        }
        case DataType::Float64: {
          double v;
          if ((ok = parse_number(s, v))) col.append_float64(v);
          break;
        }
        case DataType::Bool:
          if (s == "true" || s == "false") {
            col.append_bool(s == "true");
            ok = true;
          }
          break;
        case DataType::Utf8: break;
      }
      if (!ok) {
        throw CsvError("cannot parse '" + cell.text + "' as " + to_string(type), line, c + 1);
      }
    }
    builder.commit_rows(1);
  }
  return builder.finish();
}

std::string format_float(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string format_csv(const Table& table) {
  std::string out;
  const Schema& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out += ',';
    append_text(out, schema.field(c).name);
  }
  out += '\n';
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out += ',';
      const ColumnArray& col = table.column(c);
      if (col.is_null(r)) continue;
      switch (col.type()) {
        case DataType::Int64: out += std::to_string(col.int64_at(r)); break;
        case DataType::Float64: out += format_float(col.float64_at(r)); break;
        case DataType::Bool: out += col.bool_at(r) ? "true" : "false"; break;
        case DataType::Utf8: append_text(out, col.utf8_at(r)); break;
      }
    }
    out += '\n';
  }
  return out;
}

Table read_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return parse_csv(text.str(), schema);
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  const std::string text = format_csv(table);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace hptmt::csv
