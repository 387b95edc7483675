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

// Command implementations behind the hptmt binary.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hptmt/columnar.hpp"
#include "hptmt/context.hpp"

namespace hptmt::app {

struct RunConfig {
  int workers = 1;
  TransportKind transport = TransportKind::InProc;
  /// Tcp: one host:port per line; line index = rank.
  std::filesystem::path peers_file;
  int rank = 0;
  std::size_t memory_budget = std::size_t{256} << 20;
  std::filesystem::path spill_dir = std::filesystem::temp_directory_path();
  std::uint64_t seed = 42;
  std::size_t rows_per_worker = 1000;
  std::filesystem::path out;
};

/// Reads a peers file: non-empty lines, each host:port.
std::vector<std::string> read_peers(const std::filesystem::path& path);

/// Runs `body` on every rank of the configured world. For Tcp only this
/// process's rank runs here.
void run_world(const RunConfig& config, const std::function<void(WorkerContext&)>& body);

// --- verify ----------------------------------------------------------------

struct SuiteOptions {
  std::uint64_t seed = 42;
  /// Random cases per operator (local relational suite).
  int relational_cases = 100;
  /// Random instances per distributed operator.
  int dist_instances = 8;
  std::size_t dist_max_rows = 20000;
  int shuffle_instances = 40;
  std::vector<std::size_t> collective_lengths{0, 1, 7, 64, 1000};
  std::size_t aggregate_rows = 100000;
  /// Chunks per rank in the long chunked-shuffle case.
  std::size_t many_chunks = 1000;
  std::size_t external_sort_rows = 60000;
  std::size_t external_sort_budget = std::size_t{1} << 20;
  std::size_t mds_points = 20;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  /// Digest of the suite's results; equal for equal logical outcomes.
  std::uint64_t digest = 0;
  std::string detail;
  double seconds = 0;
};

using Suite = std::function<SuiteResult(WorkerContext&, const SuiteOptions&)>;

struct SuiteEntry {
  std::string name;
  Suite run;
};

/// Every suite, in report order.
const std::vector<SuiteEntry>& suites();

/// Runs one suite on every rank and agrees on the outcome: passed only if
/// every rank passed, digest combined over ranks.
SuiteResult run_suite_collective(WorkerContext& ctx, const SuiteEntry& suite, const SuiteOptions& options);

SuiteResult suite_collectives(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_relational(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_shuffle(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_dist_ops(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_chunked_shuffle(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_external_sort(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_mds(WorkerContext& ctx, const SuiteOptions& options);
SuiteResult suite_aggregate_bytes(WorkerContext& ctx, const SuiteOptions& options);

/// Runs the named suites (all when empty). Results are identical on every
/// rank; returned from this process's lowest local rank.
std::vector<SuiteResult> run_verify(const RunConfig& config, const SuiteOptions& options,
                                    const std::vector<std::string>& only = {});

// --- bench -----------------------------------------------------------------

enum class BenchOp { Join, Shuffle, Sort, Allreduce, Groupby };

BenchOp parse_bench_op(const std::string& name);
const char* to_string(BenchOp op);

struct BenchReport {
  std::string op;
  int workers = 0;
  std::size_t rows_per_worker = 0;
  std::uint64_t seed = 0;
  double partition_ms = 0;
  double exchange_ms = 0;
  double local_ms = 0;
  double total_ms = 0;
  std::uint64_t result_rows = 0;
  bool spot_check_passed = false;

  std::string to_json() const;
};

/// Generated input: rank r owns global rows [r * rows_per_worker, ...), and
/// the value of every cell depends only on (seed, table, column, global row),
/// so any world size sees the same global tables.
Table bench_table(std::uint64_t seed, int table_id, std::size_t first_row, std::size_t rows, std::uint64_t key_range);

BenchReport run_bench(const RunConfig& config, BenchOp op);

// --- mds -------------------------------------------------------------------

struct MdsCommand {
  std::filesystem::path input;
  std::string schema;
  std::vector<std::string> features;  // empty = every numeric column
  std::size_t dims = 2;
  int iters = 100;
  double tol = 1e-9;
  std::filesystem::path history_out;
};

struct MdsOutcome {
  std::vector<double> stress_history;
  std::string embedding_csv;
};

MdsOutcome run_mds_command(const RunConfig& config, const MdsCommand& command);

}  // namespace hptmt::app
