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

#include <chrono>
#include <unordered_set>

#include "app_internal.hpp"
#include "hptmt/app.hpp"
#include "hptmt/collectives.hpp"
#include "hptmt/dist_table.hpp"
#include "json.hpp"

namespace hptmt::app {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kValueRange = 1'000'000'000;
constexpr std::size_t kSamplesPerRank = 8;

const Schema& bench_schema() {
  static const Schema schema({{"key", DataType::Int64}, {"value", DataType::Int64}});
  return schema;
}

// Up to kSamplesPerRank evenly spaced rows of `table`.
Table sample_rows(const Table& table) {
  std::vector<RowIndex> idx;
  const std::size_t n = table.num_rows();
  const std::size_t k = std::min(n, kSamplesPerRank);
  for (std::size_t i = 0; i < k; ++i) idx.push_back(static_cast<RowIndex>(i * n / k));
  return take(table, idx);
}

std::uint64_t pair_key(std::int64_t key, std::int64_t value) {
  return splitmix64(static_cast<std::uint64_t>(key) ^ splitmix64(static_cast<std::uint64_t>(value)));
}

// found[j] = 1 when sample row j's (key, value_col) pair exists in some rank's `local`.
std::vector<std::int64_t> locate(WorkerContext& ctx, const Table& samples, std::size_t value_col, const Table& local) {
  const auto& sk = samples.column(0);
  const auto& sv = samples.column(value_col);
  std::unordered_set<std::uint64_t> wanted;
  for (std::size_t j = 0; j < samples.num_rows(); ++j) wanted.insert(pair_key(sk.int64_at(j), sv.int64_at(j)));
  std::unordered_set<std::uint64_t> present;
  const auto& lk = local.column(0);
  const auto& lv = local.column(1);
  for (std::size_t r = 0; r < local.num_rows(); ++r) {
    const auto h = pair_key(lk.int64_at(r), lv.int64_at(r));
    if (wanted.count(h) != 0) present.insert(h);
  }
  std::vector<std::int64_t> found(samples.num_rows(), 0);
  for (std::size_t j = 0; j < samples.num_rows(); ++j) {
    found[j] = present.count(pair_key(sk.int64_at(j), sv.int64_at(j))) != 0 ? 1 : 0;
  }
  return coll::allreduce(ctx.comm(), coll::NumericArray(std::move(found)), coll::ReduceOp::Max).int64();
}

bool all_found(const std::vector<std::int64_t>& found) {
  return std::all_of(found.begin(), found.end(), [](std::int64_t f) { return f == 1; });
}

// Wrapping sum of `value` over rows whose key is keys[j], over every rank.
std::vector<std::int64_t> sums_for_keys(WorkerContext& ctx, const Table& local, const std::vector<std::int64_t>& keys) {
  std::vector<std::int64_t> sums(keys.size(), 0);
  const auto& lk = local.column(0);
  const auto& lv = local.column(1);
  for (std::size_t r = 0; r < local.num_rows(); ++r) {
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (lk.int64_at(r) == keys[j]) {
        sums[j] = static_cast<std::int64_t>(static_cast<std::uint64_t>(sums[j]) +
                                            static_cast<std::uint64_t>(lv.int64_at(r)));
      }
    }
  }
  return coll::allreduce(ctx.comm(), coll::NumericArray(std::move(sums)), coll::ReduceOp::Sum).int64();
}

bool spot_check(WorkerContext& ctx, BenchOp op, const Table& a, const Table& b, const Table& result) {
  const Table samples = detail::allgather_table(ctx, sample_rows(result));
  switch (op) {
    case BenchOp::Join: {
      const bool in_a = all_found(locate(ctx, samples, 1, a));
      const bool in_b = all_found(locate(ctx, samples, 2, b));
      return in_a && in_b;
    }
    case BenchOp::Shuffle:
    case BenchOp::Sort: return all_found(locate(ctx, samples, 1, a));
    case BenchOp::Allreduce:
    case BenchOp::Groupby: {
      std::vector<std::int64_t> keys;
      std::vector<std::int64_t> sums;
      const std::size_t sum_col = op == BenchOp::Groupby ? 1 : 0;
      for (std::size_t j = 0; j < samples.num_rows(); ++j) {
        keys.push_back(op == BenchOp::Groupby ? samples.column(0).int64_at(j) : 0);
        sums.push_back(samples.column(sum_col).int64_at(j));
      }
      if (op == BenchOp::Allreduce) {
        // Every key matches: sum the whole column.
        std::int64_t total = 0;
        for (std::size_t r = 0; r < a.num_rows(); ++r) {
          total = static_cast<std::int64_t>(static_cast<std::uint64_t>(total) +
                                            static_cast<std::uint64_t>(a.column(1).int64_at(r)));
        }
        const auto want = detail::sum_ranks(ctx, total);
        return std::all_of(sums.begin(), sums.end(), [&](std::int64_t s) { return s == want; });
      }
      return sums_for_keys(ctx, a, keys) == sums;
    }
  }
  return false;
}

}  // namespace

BenchOp parse_bench_op(const std::string& name) {
  for (auto op : {BenchOp::Join, BenchOp::Shuffle, BenchOp::Sort, BenchOp::Allreduce, BenchOp::Groupby}) {
    if (name == to_string(op)) return op;
  }
  throw InvalidArgument("unknown bench operator '" + name + "' (join, shuffle, sort, allreduce, groupby)");
}

const char* to_string(BenchOp op) {
  switch (op) {
    case BenchOp::Join: return "join";
    case BenchOp::Shuffle: return "shuffle";
    case BenchOp::Sort: return "sort";
    case BenchOp::Allreduce: return "allreduce";
    case BenchOp::Groupby: return "groupby";
  }
  return "?";
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["operator"] = op;
  j["workers"] = workers;
  j["rows_per_worker"] = rows_per_worker;
  j["phase_times_ms"] = {{"partition", partition_ms}, {"exchange", exchange_ms}, {"local", local_ms}};
  j["total_ms"] = total_ms;
  j["result_rows"] = result_rows;
  j["seed"] = seed;
  j["spot_check_passed"] = spot_check_passed;
  return j.dump(2);
}

Table bench_table(std::uint64_t seed, int table_id, std::size_t first_row, std::size_t rows, std::uint64_t key_range) {
  if (key_range == 0) throw InvalidArgument("key range must be positive");
  const std::uint64_t key_stream = splitmix64(seed ^ (static_cast<std::uint64_t>(table_id) * 2 + 1));
  const std::uint64_t value_stream = splitmix64(seed ^ (static_cast<std::uint64_t>(table_id) * 2 + 2));
  ColumnBuilder keys(DataType::Int64, rows);
  ColumnBuilder values(DataType::Int64, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint64_t row = first_row + i;
    keys.append_int64(static_cast<std::int64_t>(splitmix64(key_stream + row) % key_range));
    values.append_int64(static_cast<std::int64_t>(splitmix64(value_stream + row) % kValueRange));
  }
  return Table(bench_schema(), std::vector<ColumnArray>{keys.finish(), values.finish()});
}

BenchReport run_bench(const RunConfig& config, BenchOp op) {
  if (config.rows_per_worker < 1) throw InvalidArgument("--rows-per-worker must be >= 1");
  BenchReport report;
  run_world(config, [&](WorkerContext& ctx) {
    const int world = ctx.world_size();
    const std::size_t rpw = config.rows_per_worker;
    const std::size_t first = static_cast<std::size_t>(ctx.rank()) * rpw;
    const std::uint64_t key_range = 2 * static_cast<std::uint64_t>(rpw) * static_cast<std::uint64_t>(world);
    const Table a = bench_table(config.seed, 0, first, rpw, key_range);
    const Table b = op == BenchOp::Join ? bench_table(config.seed, 1, first, rpw, key_range) : Table::empty(bench_schema());

    ctx.comm().barrier();
    ctx.phase_times() = {};
    const auto start = std::chrono::steady_clock::now();
    Table result;
    switch (op) {
      case BenchOp::Join: result = dist_join(ctx, a, b, {rel::JoinType::Inner, {"key"}, {"key"}}); break;
      case BenchOp::Shuffle: result = shuffle(ctx, a, std::vector<std::string>{"key"}); break;
      case BenchOp::Sort: result = dist_sort(ctx, a, {{{"key", rel::SortOrder::Asc}}}); break;
      case BenchOp::Allreduce:
        result = dist_aggregate(ctx, a, std::vector<rel::Aggregate>{{"value", rel::AggFn::Sum, "sum_value"}});
        break;
      case BenchOp::Groupby:
        result = dist_groupby_aggregate(ctx, a, {{"key"}, {{"value", rel::AggFn::Sum, "sum_value"}}});
        break;
    }
    ctx.comm().barrier();
    const double total = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    BenchReport mine;
    mine.op = to_string(op);
    mine.workers = world;
    mine.rows_per_worker = rpw;
    mine.seed = config.seed;
    mine.partition_ms = detail::max_ranks(ctx, ctx.phase_times().partition_ms);
    mine.exchange_ms = detail::max_ranks(ctx, ctx.phase_times().exchange_ms);
    mine.local_ms = detail::max_ranks(ctx, ctx.phase_times().local_ms);
    mine.total_ms = detail::max_ranks(ctx, total);
    // dist_aggregate replicates its single row on every rank.
    mine.result_rows = op == BenchOp::Allreduce
                           ? result.num_rows()
                           : static_cast<std::uint64_t>(detail::sum_ranks(ctx, static_cast<std::int64_t>(result.num_rows())));
    mine.spot_check_passed = detail::all_ranks(ctx, spot_check(ctx, op, a, b, result));
    if (config.transport == TransportKind::Tcp || ctx.rank() == 0) report = mine;
  });
  return report;
}

}  // namespace hptmt::app
