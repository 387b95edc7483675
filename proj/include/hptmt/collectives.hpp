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

// Eager array collectives. Every rank of the world must make the same call
// with consistent parameters. Each call starts with an exchange of a 16-byte
// parameter header so that dtype/length/root mismatches raise
// CollectiveMismatch on every rank instead of deadlocking.
//
// Algorithms: broadcast = binomial tree; gather/scatter = direct to/from the
// root; allgather = ring; alltoall = W-1 pairwise rounds; reduce = gather then
// a left fold in ascending rank order; allreduce = reduce + broadcast.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "hptmt/columnar.hpp"
#include "hptmt/comm.hpp"

namespace hptmt::coll {

/// Collective traffic lives in [kTagBase, kTagBase + 0x0FFFFFFF].
inline constexpr MessageTag kTagBase = 0x4000'0000;

enum class ReduceOp : std::uint8_t { Sum = 0, Min = 1, Max = 2, Prod = 3 };

const char* to_string(ReduceOp op);

/// Dense Int64 or Float64 values without nulls.
class NumericArray {
 public:
  NumericArray() : values_(std::vector<std::int64_t>{}) {}
  explicit NumericArray(std::vector<std::int64_t> v) : values_(std::move(v)) {}
  explicit NumericArray(std::vector<double> v) : values_(std::move(v)) {}

  static NumericArray empty(DataType type);
  static NumericArray from_bytes(DataType type, std::span<const std::uint8_t> bytes);

  DataType type() const { return values_.index() == 0 ? DataType::Int64 : DataType::Float64; }
  std::size_t size() const;

  const std::vector<std::int64_t>& int64() const { return std::get<0>(values_); }
  const std::vector<double>& float64() const { return std::get<1>(values_); }
  std::vector<std::int64_t>& int64() { return std::get<0>(values_); }
  std::vector<double>& float64() { return std::get<1>(values_); }

  Bytes to_bytes() const;

  /// Bitwise equality (so NaN payloads and -0.0 are distinguished).
  bool operator==(const NumericArray& other) const;

 private:
  std::variant<std::vector<std::int64_t>, std::vector<double>> values_;
};

/// Element-wise op; Float64 Min/Max order NaN above every number.
void combine_into(NumericArray& acc, const NumericArray& next, ReduceOp op);
double reduce_float(double a, double b, ReduceOp op);
std::int64_t reduce_int(std::int64_t a, std::int64_t b, ReduceOp op);

NumericArray broadcast(Communicator& comm, const NumericArray& array, int root);
std::optional<NumericArray> gather(Communicator& comm, const NumericArray& array, int root);
NumericArray allgather(Communicator& comm, const NumericArray& array);
/// `parts` is only read at the root and must hold world_size arrays of `type`.
NumericArray scatter(Communicator& comm, std::span<const NumericArray> parts, DataType type, int root);
/// Output[s] is what rank s put in its parts[rank].
std::vector<NumericArray> alltoall(Communicator& comm, std::span<const NumericArray> parts);
std::optional<NumericArray> reduce(Communicator& comm, const NumericArray& array, ReduceOp op, int root);
NumericArray allreduce(Communicator& comm, const NumericArray& array, ReduceOp op);

/// Variable-size byte exchange; sizes travel first, then payloads pairwise.
std::vector<Bytes> alltoall_bytes(Communicator& comm, std::vector<Bytes> parts);
std::vector<Bytes> allgather_bytes(Communicator& comm, const Bytes& payload);
/// Root gets every rank's payload in rank order; others get an empty vector.
std::vector<Bytes> gather_bytes(Communicator& comm, const Bytes& payload, int root);

}  // namespace hptmt::coll
