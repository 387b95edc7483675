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

#include "hptmt/dataflow.hpp"

#include <algorithm>

#include "dist_table/internal.hpp"
#include "hptmt/wire.hpp"

namespace hptmt {

VectorStream::VectorStream(Schema schema, std::vector<Table> chunks)
    : schema_(std::move(schema)), chunks_(std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end())) {
  for (const auto& c : chunks_) {
    if (c.schema() != schema_) throw InvalidArgument("chunk schema differs from stream schema");
  }
}

std::optional<Table> VectorStream::next() {
  if (chunks_.empty()) return std::nullopt;
  Table t = std::move(chunks_.front());
  chunks_.pop_front();
  return t;
}

std::unique_ptr<ChunkStream> chunked(const Table& table, std::size_t rows_per_chunk) {
  if (rows_per_chunk == 0) throw InvalidArgument("rows_per_chunk must be positive");
  std::vector<Table> chunks;
  for (std::size_t off = 0; off < table.num_rows(); off += rows_per_chunk) {
    chunks.push_back(slice(table, off, std::min(rows_per_chunk, table.num_rows() - off)));
  }
  return std::make_unique<VectorStream>(table.schema(), std::move(chunks));
}

Table drain(ChunkStream& stream) {
  std::vector<Table> parts;
  while (auto c = stream.next()) parts.push_back(std::move(*c));
  return concat_tables(parts, &stream.schema());
}

// ---------------------------------------------------------------------------
// Chunked shuffle

ChunkedShuffle::ChunkedShuffle(WorkerContext& ctx, std::unique_ptr<ChunkStream> input,
                               std::vector<std::string> key_columns)
    : ctx_(ctx),
      input_(std::move(input)),
      schema_(input_->schema()),
      key_columns_(resolve_columns(schema_, key_columns)),
      open_sources_(ctx.world_size(), true) {
  detail::check_schema_agreement(ctx_, schema_, key_columns_, "chunked_shuffle");
}

std::optional<Table> ChunkedShuffle::next() {
  for (;;) {
    if (!ready_.empty()) {
      Table t = std::move(ready_.front());
      ready_.pop_front();
      return t;
    }
    if (eos_received_ == ctx_.world_size()) return std::nullopt;
    if (!progress()) ctx_.comm().wait_for_activity(std::chrono::microseconds(200));
  }
}

bool ChunkedShuffle::progress() {
  bool moved = receive_ready();
  moved |= flush_pending();
  if (pending_.empty() && !input_done_) {
    pull_input();
    moved = true;
  }
  return moved;
}

bool ChunkedShuffle::receive_ready() {
  bool moved = false;
  while (eos_received_ < ctx_.world_size()) {
    auto msg = ctx_.comm().try_recv_any(kChunkShuffleTag, open_sources_);
    if (!msg) break;
    moved = true;
    auto& [src, payload] = *msg;
    if (payload.empty()) {
      open_sources_[src] = false;
      ++eos_received_;
      continue;
    }
    Table t = deserialize_table(payload);
    if (t.schema() != schema_) {
      throw InvalidArgument("chunked_shuffle: rank " + std::to_string(src) + " sent schema " + t.schema().to_string());
    }
    if (t.num_rows() > 0) ready_.push_back(std::move(t));
  }
  return moved;
}

bool ChunkedShuffle::flush_pending() {
  bool moved = false;
  while (!pending_.empty()) {
    auto& [dest, payload] = pending_.front();
    if (!ctx_.comm().try_send(dest, kChunkShuffleTag, payload)) break;
    pending_.pop_front();
    moved = true;
  }
  return moved;
}

void ChunkedShuffle::pull_input() {
  const int me = ctx_.rank();
  auto chunk = input_->next();
  if (!chunk) {
    input_done_ = true;
    // Our own marker goes last so that receiving it means every earlier
    // send has left this rank.
    for (int d = 0; d < ctx_.world_size(); ++d) {
      if (d != me) pending_.emplace_back(d, Bytes{});
    }
    pending_.emplace_back(me, Bytes{});
    return;
  }
  if (chunk->schema() != schema_) throw InvalidArgument("chunked_shuffle: chunk schema differs from stream schema");
  auto buckets = detail::bucket_rows(ctx_, *chunk, key_columns_, false);
  for (int d = 0; d < ctx_.world_size(); ++d) {
    if (buckets[d].empty()) continue;
    Table part = take(*chunk, buckets[d]);
    if (d == me) {
      ready_.push_back(std::move(part));
    } else {
      pending_.emplace_back(d, serialize_table(part));
      ++chunks_sent_;
    }
  }
}

std::unique_ptr<ChunkedShuffle> chunked_shuffle(WorkerContext& ctx, std::unique_ptr<ChunkStream> input,
                                                std::vector<std::string> key_columns) {
  return std::make_unique<ChunkedShuffle>(ctx, std::move(input), std::move(key_columns));
}

// ---------------------------------------------------------------------------
// External sort

namespace {

/// Upper bound on how much appending `row` grows a builder's byte_size,
/// ignoring validity.
std::size_t row_bytes(const Table& t, std::size_t row) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    const auto& col = t.column(c);
    n += col.type() == DataType::Utf8 ? col.utf8_at(row).size() + 4 : fixed_width(col.type());
  }
  return n;
}

/// True if appending `row` could push the builder past `limit`. Validity is
/// counted as if every column had a bitmap.
bool would_overflow(const TableBuilder& b, const Table& src, std::size_t row, std::size_t limit) {
  if (b.num_rows() == 0) return false;
  const std::size_t validity = src.num_columns() * ((b.num_rows() + 1 + 7) / 8);
  return b.byte_size() + row_bytes(src, row) + validity > limit;
}

}  // namespace

ExternalSort::ExternalSort(WorkerContext& ctx, std::unique_ptr<ChunkStream> input, rel::SortSpec spec,
                           ExternalSortOptions options)
    : ctx_(ctx),
      input_(std::move(input)),
      spec_(std::move(spec)),
      schema_(input_->schema()),
      cmp_(schema_, spec_) {
  const std::size_t budget = ctx_.memory_budget();
  block_ = std::max<std::size_t>(1, std::min(options.block_bytes, budget / 8));
  // A run plus the chunk that completes it plus one output block must fit.
  const std::size_t reserve = block_ + budget / 4;
  run_threshold_ = budget > reserve ? budget - reserve : 1;
}

ExternalSort::~ExternalSort() { cleanup(); }

void ExternalSort::hold(std::size_t bytes) {
  held_ += bytes;
  ctx_.memory().add(bytes);
}

void ExternalSort::drop(std::size_t bytes) {
  held_ -= bytes;
  ctx_.memory().release(bytes);
}

std::optional<Table> ExternalSort::next() {
  if (finished_) return std::nullopt;
  if (!generated_) {
    generate_runs();
    generated_ = true;
  }
  return spill_files_.empty() ? next_in_memory() : next_merged();
}

void ExternalSort::generate_runs() {
  const std::size_t budget = ctx_.memory_budget();
  while (auto chunk = input_->next()) {
    if (chunk->schema() != schema_) throw InvalidArgument("external_sort: chunk schema differs from stream schema");
    const std::size_t bytes = chunk->byte_size();
    if (bytes * 4 >= budget) {
      throw InvalidArgument("external_sort: memory budget " + std::to_string(budget) +
                            " must exceed 4x the chunk size " + std::to_string(bytes));
    }
    hold(bytes);
    run_bytes_ += bytes;
    run_.push_back(std::move(*chunk));
    if (run_bytes_ >= run_threshold_) spill_run();
  }
  if (!spill_files_.empty() && !run_.empty()) spill_run();

  // Sort order over (chunk, row) for the in-memory path.
  if (spill_files_.empty()) {
    for (std::uint32_t c = 0; c < run_.size(); ++c) {
      for (RowIndex r = 0; r < run_[c].num_rows(); ++r) order_.emplace_back(c, r);
    }
    std::stable_sort(order_.begin(), order_.end(), [&](const auto& x, const auto& y) {
      return cmp_.compare(run_[x.first], x.second, run_[y.first], y.second) < 0;
    });
    return;
  }

  runs_.resize(spill_files_.size());
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    runs_[i].in.open(spill_files_[i], std::ios::binary);
    if (!runs_[i].in) throw IoError("cannot reopen spill file " + spill_files_[i].string());
    load_block(runs_[i]);
  }
}

void ExternalSort::spill_run() {
  std::error_code ec;
  std::filesystem::create_directories(ctx_.spill_dir(), ec);
  const auto path = ctx_.spill_dir() / ("run-" + std::to_string(ctx_.rank()) + "-" +
                                        std::to_string(ctx_.next_spill_sequence()) + ".hpt");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create spill file " + path.string());
  spill_files_.push_back(path);

  std::vector<std::pair<std::uint32_t, RowIndex>> order;
  for (std::uint32_t c = 0; c < run_.size(); ++c) {
    for (RowIndex r = 0; r < run_[c].num_rows(); ++r) order.emplace_back(c, r);
  }
  std::stable_sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
    return cmp_.compare(run_[x.first], x.second, run_[y.first], y.second) < 0;
  });

  auto write_block = [&](TableBuilder& b) {
    Table block = b.finish();
    const std::size_t bytes = block.byte_size();
    hold(bytes);
    write_table(out, block);
    drop(bytes);
    if (!out) throw IoError("write failed on spill file " + path.string());
  };
  TableBuilder builder(schema_);
  for (const auto& [c, r] : order) {
    if (would_overflow(builder, run_[c], r, block_)) {
      write_block(builder);
      builder = TableBuilder(schema_);
    }
    builder.append_row(run_[c], r);
  }
  if (builder.num_rows() > 0) write_block(builder);
  out.close();
  if (!out) throw IoError("cannot close spill file " + path.string());

  drop(run_bytes_);
  run_bytes_ = 0;
  run_.clear();
}

bool ExternalSort::load_block(Run& run) {
  if (run.block.num_columns() > 0) drop(run.block.byte_size());
  run.block = Table();
  run.pos = 0;
  std::optional<Table> t;
  try {
    t = read_table(run.in);
  } catch (const ParseError& e) {
    throw IoError(std::string("corrupt spill file: ") + e.what());
  }
  if (!t) {
    run.done = true;
    return false;
  }
  hold(t->byte_size());
  run.block = std::move(*t);
  return true;
}

std::optional<Table> ExternalSort::next_in_memory() {
  TableBuilder builder(schema_);
  while (emitted_ < order_.size()) {
    const auto [c, r] = order_[emitted_];
    if (would_overflow(builder, run_[c], r, block_)) break;
    builder.append_row(run_[c], r);
    ++emitted_;
  }
  if (builder.num_rows() == 0) {
    cleanup();
    finished_ = true;
    return std::nullopt;
  }
  Table out = builder.finish();
  hold(out.byte_size());
  drop(out.byte_size());
  return out;
}

std::optional<Table> ExternalSort::next_merged() {
  // Min-heap of run indices keyed by each run's current row; ties go to the
  // earlier run, which holds earlier input.
  auto later = [&](std::size_t x, std::size_t y) {
    const int c = cmp_.compare(runs_[x].block, runs_[x].pos, runs_[y].block, runs_[y].pos);
    return c != 0 ? c > 0 : x > y;
  };
  if (heap_.empty() && !heap_built_) {
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      if (!runs_[i].done) heap_.push_back(i);
    }
    std::make_heap(heap_.begin(), heap_.end(), later);
    heap_built_ = true;
  }
  TableBuilder builder(schema_);
  while (!heap_.empty()) {
    const std::size_t r = heap_.front();
    Run& run = runs_[r];
    if (would_overflow(builder, run.block, run.pos, block_)) break;
    std::pop_heap(heap_.begin(), heap_.end(), later);
    heap_.pop_back();
    builder.append_row(run.block, run.pos);
    if (++run.pos >= run.block.num_rows()) load_block(run);
    if (!run.done) {
      heap_.push_back(r);
      std::push_heap(heap_.begin(), heap_.end(), later);
    }
  }
  if (builder.num_rows() == 0) {
    cleanup();
    finished_ = true;
    return std::nullopt;
  }
  Table out = builder.finish();
  hold(out.byte_size());
  drop(out.byte_size());
  return out;
}

void ExternalSort::cleanup() {
  for (auto& run : runs_) run.in.close();
  runs_.clear();
  heap_.clear();
  for (const auto& p : spill_files_) {
    std::error_code ec;
    std::filesystem::remove(p, ec);
  }
  run_.clear();
  order_.clear();
  run_bytes_ = 0;
  if (held_ > 0) drop(held_);
}

std::unique_ptr<ExternalSort> external_sort(WorkerContext& ctx, std::unique_ptr<ChunkStream> input,
                                            rel::SortSpec spec, ExternalSortOptions options) {
  return std::make_unique<ExternalSort>(ctx, std::move(input), std::move(spec), options);
}

}  // namespace hptmt
