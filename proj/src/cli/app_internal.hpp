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
#include <span>
#include <string>
#include <vector>

#include "hptmt/context.hpp"
#include "hptmt/columnar.hpp"

namespace hptmt::app::detail {

/// Every rank's table, concatenated in rank order, on every rank.
Table allgather_table(WorkerContext& ctx, const Table& local);

/// Order-insensitive digest of a table's rows under key equality (-0.0 equals
/// 0.0, NaN payloads ignored).
std::uint64_t table_digest(const Table& table);
/// Digest of the rows in their current order.
std::uint64_t ordered_digest(const Table& table);

inline std::uint64_t mix_digest(std::uint64_t acc, std::uint64_t value) {
  std::string bytes(16, '\0');
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>(acc >> (8 * i));
    bytes[8 + i] = static_cast<char>(value >> (8 * i));
  }
  return fnv1a64(bytes);
}

/// Logical AND of `ok` over every rank.
bool all_ranks(WorkerContext& ctx, bool ok);
std::int64_t sum_ranks(WorkerContext& ctx, std::int64_t value);
double max_ranks(WorkerContext& ctx, double value);

}  // namespace hptmt::app::detail
