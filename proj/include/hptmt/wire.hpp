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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hptmt/columnar.hpp"

// Table wire format. All integers little-endian:
//
//   "HPT1" | u32 column_count | u64 row_count
//   per column:
//     u16 name_length | name bytes | u8 type tag | u8 has_validity
//     [ceil(row_count / 8) validity bytes, LSB-first]         if has_validity
//     Utf8:        (row_count + 1) x u32 offsets | u64 data_length | data
//     fixed-width: row_count x width data bytes
//
// The same encoding is used for partition exchange and for spill files
// (a spill file is a sequence of tables).

namespace hptmt {

using Bytes = std::vector<std::uint8_t>;

Bytes serialize_table(const Table& table);
/// Exact byte length of serialize_table(table).
std::size_t serialized_size(const Table& table);
void write_table(std::ostream& out, const Table& table);

/// Throws ParseError for malformed magic, truncation, bad offsets, bad type
/// tags and trailing bytes.
Table deserialize_table(std::span<const std::uint8_t> bytes);

/// Reads the next table from a stream. Returns nullopt at a clean end of
/// stream; a partial table is a ParseError.
std::optional<Table> read_table(std::istream& in);

}  // namespace hptmt
