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

#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hptmt/columnar.hpp"
#include "hptmt/comm.hpp"
#include "hptmt/context.hpp"

namespace hptmt::testing {

inline ColumnArray ints(std::initializer_list<std::optional<std::int64_t>> values) {
  ColumnBuilder b(DataType::Int64);
  for (const auto& v : values) v ? b.append_int64(*v) : b.append_null();
  return b.finish();
}

inline ColumnArray floats(std::initializer_list<std::optional<double>> values) {
  ColumnBuilder b(DataType::Float64);
  for (const auto& v : values) v ? b.append_float64(*v) : b.append_null();
  return b.finish();
}

inline ColumnArray strs(std::initializer_list<std::optional<std::string>> values) {
  ColumnBuilder b(DataType::Utf8);
  for (const auto& v : values) v ? b.append_utf8(*v) : b.append_null();
  return b.finish();
}

inline ColumnArray bools(std::initializer_list<std::optional<bool>> values) {
  ColumnBuilder b(DataType::Bool);
  for (const auto& v : values) v ? b.append_bool(*v) : b.append_null();
  return b.finish();
}

inline Table make_table(std::vector<std::pair<std::string, ColumnArray>> columns) {
  std::vector<Field> fields;
  std::vector<ColumnArray> arrays;
  for (auto& [name, col] : columns) {
    fields.push_back({name, col.type()});
    arrays.push_back(std::move(col));
  }
  return Table(Schema(std::move(fields)), std::move(arrays));
}

/// Runs body(ctx) on every rank of an in-process world.
inline void in_world(int world_size, const std::function<void(WorkerContext&)>& body,
                     ContextOptions options = {}) {
  run_inproc(world_size, [&](Communicator& comm) {
    WorkerContext ctx(comm, options);
    body(ctx);
  });
}

/// Splits rows evenly (first ranks get the remainder) and returns rank r's share.
inline Table share(const Table& table, int world_size, int rank) {
  const std::size_t n = table.num_rows();
  const std::size_t w = static_cast<std::size_t>(world_size);
  const std::size_t r = static_cast<std::size_t>(rank);
  const std::size_t lo = r * (n / w) + std::min(r, n % w);
  const std::size_t len = n / w + (r < n % w ? 1 : 0);
  return slice(table, lo, len);
}

inline std::string hex_bytes(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    if (!out.empty()) out += ' ';
    out += kDigits[c >> 4];
    out += kDigits[c & 15];
  }
  return out;
}

/// A localhost TCP port that was free a moment ago.
inline int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

inline std::vector<std::string> localhost_addresses(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("127.0.0.1:" + std::to_string(free_port()));
  return out;
}

}  // namespace hptmt::testing
