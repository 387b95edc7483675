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

// RFC 4180 CSV with an explicit schema.
//
//  * An empty unquoted field is null; a quoted empty field ("") is the empty
//    string.
//  * Float64 is written with 17 significant digits, so values round-trip.
//  * Bool is true/false.
//  * A trailing line break does not start another record.

#include <filesystem>
#include <string>
#include <string_view>

#include "hptmt/columnar.hpp"

namespace hptmt::csv {

/// Malformed CSV or cell, with a 1-based line and column when known.
class CsvError : public InvalidArgument {
 public:
  CsvError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// "name:type,..." with types i64, f64, bool, str.
Schema parse_schema_spec(std::string_view spec);
std::string schema_spec(const Schema& schema);

Table parse_csv(std::string_view text, const Schema& schema);
std::string format_csv(const Table& table);

Table read_csv(const std::filesystem::path& path, const Schema& schema);
void write_csv(const Table& table, const std::filesystem::path& path);

/// `value` with 17 significant digits (%.17g); nan, inf and -inf otherwise.
std::string format_float(double value);

}  // namespace hptmt::csv
