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

#include <algorithm>
#include <fstream>

#include "app_internal.hpp"
#include "hptmt/app.hpp"
#include "hptmt/collectives.hpp"
#include "hptmt/wire.hpp"

namespace hptmt::app {

std::vector<std::string> read_peers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open peers file " + path.string());
  std::vector<std::string> peers;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    peers.push_back(line.substr(start));
  }
  if (peers.empty()) throw InvalidArgument("peers file " + path.string() + " lists no addresses");
  return peers;
}

void run_world(const RunConfig& config, const std::function<void(WorkerContext&)>& body) {
  TransportConfig transport;
  transport.kind = config.transport;
  transport.world_size = config.workers;
  if (config.transport == TransportKind::Tcp) {
    transport.addresses = read_peers(config.peers_file);
    if (config.workers != static_cast<int>(transport.addresses.size())) {
      throw InvalidArgument("--workers " + std::to_string(config.workers) + " does not match the " +
                            std::to_string(transport.addresses.size()) + " peers listed");
    }
    transport.rank = config.rank;
  }
  ContextOptions options;
  options.memory_budget = config.memory_budget;
  options.spill_dir = config.spill_dir;
  options.seed = config.seed;
  launch(transport, [&](Communicator& comm) {
    WorkerContext ctx(comm, options);
    body(ctx);
    comm.barrier();
  });
}

namespace detail {

Table allgather_table(WorkerContext& ctx, const Table& local) {
  const auto parts = coll::allgather_bytes(ctx.comm(), serialize_table(local));
  std::vector<Table> tables;
  tables.reserve(parts.size());
  for (const auto& p : parts) tables.push_back(deserialize_table(p));
  return concat_tables(tables, &local.schema());
}

std::uint64_t ordered_digest(const Table& table) {
  const Bytes bytes = serialize_table(table);
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::uint64_t table_digest(const Table& table) {
  std::vector<std::size_t> all(table.num_columns());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
  const auto keys = encode_keys(table, all);
  std::vector<std::string_view> rows;
  rows.reserve(keys.size());
  for (std::size_t r = 0; r < keys.size(); ++r) rows.push_back(keys.key(r));
  std::sort(rows.begin(), rows.end());
  std::uint64_t digest = mix_digest(schema_fingerprint(table.schema()), rows.size());
  for (auto row : rows) digest = mix_digest(digest, fnv1a64(row));
  return digest;
}

bool all_ranks(WorkerContext& ctx, bool ok) {
  const auto r = coll::allreduce(ctx.comm(), coll::NumericArray(std::vector<std::int64_t>{ok ? 1 : 0}),
                                 coll::ReduceOp::Min);
  return r.int64()[0] == 1;
}

std::int64_t sum_ranks(WorkerContext& ctx, std::int64_t value) {
  return coll::allreduce(ctx.comm(), coll::NumericArray(std::vector<std::int64_t>{value}), coll::ReduceOp::Sum)
      .int64()[0];
}

double max_ranks(WorkerContext& ctx, double value) {
  return coll::allreduce(ctx.comm(), coll::NumericArray(std::vector<double>{value}), coll::ReduceOp::Max)
      .float64()[0];
}

}  // namespace detail
}  // namespace hptmt::app
