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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>

#include "hptmt/comm.hpp"

namespace hptmt {

/// Counts table bytes an operator holds. Operators add when they take
/// ownership of data and release when they drop it.
class MemoryTracker {
 public:
  void add(std::size_t bytes) {
    const auto now = current_.fetch_add(bytes) + bytes;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
  }
  void release(std::size_t bytes) { current_.fetch_sub(bytes); }
  std::size_t current() const { return current_.load(); }
  std::size_t peak() const { return peak_.load(); }
  void reset_peak() { peak_.store(current_.load()); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// Wall time spent in each phase of the distributed operators, accumulated
/// across calls.
struct PhaseTimes {
  double partition_ms = 0;
  double exchange_ms = 0;
  double local_ms = 0;
};

/// Adds the elapsed time to `slot` on destruction.
class PhaseTimer {
 public:
  explicit PhaseTimer(double& slot) : slot_(slot), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    slot_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  double& slot_;
  std::chrono::steady_clock::time_point start_;
};

struct ContextOptions {
  std::size_t memory_budget = std::size_t{256} << 20;
  std::filesystem::path spill_dir = std::filesystem::temp_directory_path();
  std::uint64_t seed = 0;
  /// Threads for the numeric kernels; 0 picks hardware_concurrency / world_size.
  int threads = 0;
};

/// Per-worker handle passed to every distributed operator.
class WorkerContext {
 public:
  WorkerContext(Communicator& comm, ContextOptions options = {});

  Communicator& comm() { return comm_; }
  int rank() const { return comm_.rank(); }
  int world_size() const { return comm_.world_size(); }

  std::size_t memory_budget() const { return options_.memory_budget; }
  const std::filesystem::path& spill_dir() const { return options_.spill_dir; }
  std::uint64_t seed() const { return options_.seed; }
  int threads() const { return threads_; }

  /// Transport byte and message counters of this rank.
  const CommStats& stats() const { return comm_.stats(); }
  PhaseTimes& phase_times() { return phases_; }
  MemoryTracker& memory() { return memory_; }

  std::uint64_t next_spill_sequence() { return spill_seq_++; }

 private:
  Communicator& comm_;
  ContextOptions options_;
  int threads_;
  PhaseTimes phases_;
  MemoryTracker memory_;
  std::uint64_t spill_seq_ = 0;
};

}  // namespace hptmt
