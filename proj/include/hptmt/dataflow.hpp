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

// Chunked (dataflow) operators: they consume and produce tables piece by
// piece through pull-based streams.

#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hptmt/context.hpp"
#include "hptmt/relational.hpp"

namespace hptmt {

/// Pull-based sequence of schema-equal chunks. next() returns nullopt at end
/// of stream and keeps returning nullopt afterwards.
class ChunkStream {
 public:
  virtual ~ChunkStream() = default;
  virtual const Schema& schema() const = 0;
  virtual std::optional<Table> next() = 0;
};

class VectorStream final : public ChunkStream {
 public:
  VectorStream(Schema schema, std::vector<Table> chunks);

  const Schema& schema() const override { return schema_; }
  std::optional<Table> next() override;

 private:
  Schema schema_;
  std::deque<Table> chunks_;
};

/// Splits a table into chunks of at most rows_per_chunk rows.
std::unique_ptr<ChunkStream> chunked(const Table& table, std::size_t rows_per_chunk);

/// Concatenation of every remaining chunk.
Table drain(ChunkStream& stream);

/// Reserved tag of the chunked shuffle; a zero-length payload is an EOS marker.
inline constexpr MessageTag kChunkShuffleTag = 0x3000'0000;

/// Streaming hash shuffle. Each input chunk is bucketed and sent as soon as it
/// is pulled; after the input ends an EOS marker goes to every rank including
/// this one. The output ends once EOS markers from all ranks have arrived.
/// Sends never block: a full channel is retried while incoming chunks are
/// drained, so ranks pulling at different speeds cannot deadlock.
class ChunkedShuffle final : public ChunkStream {
 public:
  ChunkedShuffle(WorkerContext& ctx, std::unique_ptr<ChunkStream> input, std::vector<std::string> key_columns);

  const Schema& schema() const override { return schema_; }
  std::optional<Table> next() override;

  /// EOS markers received so far; world_size once the stream has ended.
  int eos_received() const { return eos_received_; }
  std::size_t chunks_sent() const { return chunks_sent_; }

 private:
  bool progress();
  bool receive_ready();
  bool flush_pending();
  void pull_input();

  WorkerContext& ctx_;
  std::unique_ptr<ChunkStream> input_;
  Schema schema_;
  std::vector<std::size_t> key_columns_;
  std::deque<std::pair<int, Bytes>> pending_;
  std::deque<Table> ready_;
  std::vector<bool> open_sources_;
  int eos_received_ = 0;
  bool input_done_ = false;
  std::size_t chunks_sent_ = 0;
};

std::unique_ptr<ChunkedShuffle> chunked_shuffle(WorkerContext& ctx, std::unique_ptr<ChunkStream> input,
                                                std::vector<std::string> key_columns);

struct ExternalSortOptions {
  /// Upper bound on the bytes of one spill block, merge buffer and output
  /// chunk. Capped at memory_budget / 8.
  std::size_t block_bytes = std::size_t{1} << 20;
};

/// Local external merge sort bounded by the context's memory budget. Input is
/// accumulated into runs; a full run is sorted and spilled to
/// spill_dir/run-{rank}-{seq}.hpt as a sequence of wire-format blocks. After
/// the input ends the runs are merged one block per run at a time. If nothing
/// was spilled the sort happens in memory.
///
/// Table bytes held by the operator are reported to ctx.memory(). Spill files
/// are removed when the output is exhausted or the stream is destroyed.
class ExternalSort final : public ChunkStream {
 public:
  ExternalSort(WorkerContext& ctx, std::unique_ptr<ChunkStream> input, rel::SortSpec spec,
               ExternalSortOptions options = {});
  ~ExternalSort() override;
  ExternalSort(const ExternalSort&) = delete;
  ExternalSort& operator=(const ExternalSort&) = delete;

  const Schema& schema() const override { return schema_; }
  std::optional<Table> next() override;

  std::size_t runs_spilled() const { return spill_files_.size(); }
  std::size_t block_bytes() const { return block_; }
  const std::vector<std::filesystem::path>& spill_files() const { return spill_files_; }

 private:
  struct Run {
    std::ifstream in;
    Table block;
    std::size_t pos = 0;
    bool done = false;
  };

  void generate_runs();
  void spill_run();
  bool load_block(Run& run);
  std::optional<Table> next_in_memory();
  std::optional<Table> next_merged();
  void cleanup();
  void hold(std::size_t bytes);
  void drop(std::size_t bytes);

  WorkerContext& ctx_;
  std::unique_ptr<ChunkStream> input_;
  rel::SortSpec spec_;
  Schema schema_;
  rel::RowComparator cmp_;
  std::size_t block_;
  std::size_t run_threshold_;

  std::vector<Table> run_;
  std::size_t run_bytes_ = 0;
  std::vector<std::filesystem::path> spill_files_;
  bool generated_ = false;
  bool finished_ = false;

  // In-memory path.
  std::vector<std::pair<std::uint32_t, RowIndex>> order_;
  std::size_t emitted_ = 0;

  // Merge path.
  std::vector<Run> runs_;
  std::vector<std::size_t> heap_;
  bool heap_built_ = false;
  std::size_t held_ = 0;
};

std::unique_ptr<ExternalSort> external_sort(WorkerContext& ctx, std::unique_ptr<ChunkStream> input,
                                            rel::SortSpec spec, ExternalSortOptions options = {});

}  // namespace hptmt
