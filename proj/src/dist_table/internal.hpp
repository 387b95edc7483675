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

#include <span>
#include <vector>

#include "hptmt/context.hpp"
#include "hptmt/columnar.hpp"

namespace hptmt::detail {

/// Collective check that every rank passed the same schema and key columns.
void check_schema_agreement(WorkerContext& ctx, const Schema& schema, std::span<const std::size_t> key_columns,
                            const char* op);

/// Row positions per destination rank.
std::vector<std::vector<RowIndex>> bucket_rows(WorkerContext& ctx, const Table& table,
                                               std::span<const std::size_t> key_columns, bool keep_null_keys_local);

Table shuffle_columns(WorkerContext& ctx, const Table& table, std::span<const std::size_t> key_columns,
                      bool keep_null_keys_local);

}  // namespace hptmt::detail
