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

#include "hptmt/collectives.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace hptmt::coll {

const char* to_string(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return "SUM";
    case ReduceOp::Min: return "MIN";
    case ReduceOp::Max: return "MAX";
    case ReduceOp::Prod: return "PROD";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// NumericArray

NumericArray NumericArray::empty(DataType type) {
  if (type == DataType::Int64) return NumericArray(std::vector<std::int64_t>{});
  if (type == DataType::Float64) return NumericArray(std::vector<double>{});
  throw InvalidArgument("numeric arrays are Int64 or Float64");
}

NumericArray NumericArray::from_bytes(DataType type, std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw ParseError(ParseErrorKind::kTruncated, "numeric payload not a multiple of 8");
  const std::size_t n = bytes.size() / 8;
  if (type == DataType::Int64) {
    std::vector<std::int64_t> v(n);
    if (n) std::memcpy(v.data(), bytes.data(), bytes.size());
    return NumericArray(std::move(v));
  }
  if (type == DataType::Float64) {
    std::vector<double> v(n);
    if (n) std::memcpy(v.data(), bytes.data(), bytes.size());
    return NumericArray(std::move(v));
  }
  throw InvalidArgument("numeric arrays are Int64 or Float64");
}

std::size_t NumericArray::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values_);
}

Bytes NumericArray::to_bytes() const {
  return std::visit(
      [](const auto& v) {
        Bytes out(v.size() * 8);
        if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
        return out;
      },
      values_);
}

bool NumericArray::operator==(const NumericArray& other) const {
  return type() == other.type() && to_bytes() == other.to_bytes();
}

double reduce_float(double a, double b, ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return a + b;
    case ReduceOp::Prod: return a * b;
    case ReduceOp::Min:
      if (std::isnan(b)) return a;
      if (std::isnan(a)) return b;
      return b < a ? b : a;
    case ReduceOp::Max:
      if (std::isnan(a)) return a;
      if (std::isnan(b)) return b;
      return b > a ? b : a;
  }
  return a;
}

std::int64_t reduce_int(std::int64_t a, std::int64_t b, ReduceOp op) {
  const auto ua = static_cast<std::uint64_t>(a);
  const auto ub = static_cast<std::uint64_t>(b);
  switch (op) {
    case ReduceOp::Sum: return static_cast<std::int64_t>(ua + ub);
    case ReduceOp::Prod: return static_cast<std::int64_t>(ua * ub);
    case ReduceOp::Min: return b < a ? b : a;
    case ReduceOp::Max: return b > a ? b : a;
  }
  return a;
}

void combine_into(NumericArray& acc, const NumericArray& next, ReduceOp op) {
  if (acc.type() != next.type() || acc.size() != next.size()) {
    throw InvalidArgument("combine_into: shape mismatch");
  }
  if (acc.type() == DataType::Int64) {
    auto& a = acc.int64();
    const auto& b = next.int64();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = reduce_int(a[i], b[i], op);
  } else {
    auto& a = acc.float64();
    const auto& b = next.float64();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = reduce_float(a[i], b[i], op);
  }
}

// ---------------------------------------------------------------------------
// Parameter check

namespace {

enum class Kind : std::uint8_t {
  Broadcast = 1,
  Gather,
  Allgather,
  Scatter,
  Alltoall,
  AlltoallBytes,
  Reduce,
  Allreduce,
  AllgatherBytes,
  GatherBytes,
};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Broadcast: return "broadcast";
    case Kind::Gather: return "gather";
    case Kind::Allgather: return "allgather";
    case Kind::Scatter: return "scatter";
    case Kind::Alltoall: return "alltoall";
    case Kind::AlltoallBytes: return "alltoall_bytes";
    case Kind::Reduce: return "reduce";
    case Kind::Allreduce: return "allreduce";
    case Kind::AllgatherBytes: return "allgather_bytes";
    case Kind::GatherBytes: return "gather_bytes";
  }
  return "?";
}

constexpr MessageTag kHeaderTag = kTagBase;
MessageTag data_tag(Kind k) { return kTagBase + static_cast<MessageTag>(k); }

enum Flag : std::uint8_t {
  kBadRoot = 1,
  kBadPartCount = 2,
  kBadPartType = 4,
};

struct Header {
  Kind kind;
  std::uint8_t dtype;
  std::uint8_t op;
  std::uint8_t flags;
  std::uint32_t root;
  std::uint64_t length;
};
static_assert(sizeof(Header) == 16);

Bytes encode(const Header& h) {
  Bytes b(sizeof(Header));
  std::memcpy(b.data(), &h, sizeof(Header));
  return b;
}

Header decode(const Bytes& b) {
  if (b.size() != sizeof(Header)) throw ParseError(ParseErrorKind::kTruncated, "collective header");
  Header h;
  std::memcpy(&h, b.data(), sizeof(Header));
  return h;
}

/// Ring allgather of one message per rank; result in rank order.
std::vector<Bytes> ring_allgather(Communicator& comm, MessageTag tag, Bytes mine) {
  const int w = comm.world_size();
  const int r = comm.rank();
  std::vector<Bytes> blocks(w);
  blocks[r] = std::move(mine);
  const int right = (r + 1) % w;
  const int left = (r - 1 + w) % w;
  for (int step = 0; step < w - 1; ++step) {
    const int send_block = (r - step + w) % w;
    const int recv_block = (r - step - 1 + w) % w;
    comm.send(right, tag, std::span<const std::uint8_t>(blocks[send_block]));
    blocks[recv_block] = comm.recv(left, tag);
  }
  return blocks;
}

struct Expect {
  bool same_dtype = true;
  bool same_root = false;
  bool same_op = false;
  bool same_length = false;
};

/// Exchanges headers and validates them identically on every rank.
std::vector<Header> check(Communicator& comm, const Header& mine, Expect expect) {
  std::vector<Header> all;
  if (comm.world_size() == 1) {
    all.push_back(mine);
  } else {
    for (auto& b : ring_allgather(comm, kHeaderTag, encode(mine))) all.push_back(decode(b));
  }
  const std::string name = kind_name(mine.kind);
  for (std::size_t r = 0; r < all.size(); ++r) {
    const Header& h = all[r];
    if (h.kind != all[0].kind) {
      throw CollectiveMismatch("rank " + std::to_string(r) + " called " + kind_name(h.kind) + " while rank 0 called " +
                               kind_name(all[0].kind));
    }
  }
  for (std::size_t r = 0; r < all.size(); ++r) {
    const Header& h = all[r];
    const std::string who = name + ": rank " + std::to_string(r);
    if (h.flags & kBadRoot) throw CollectiveMismatch(who + " passed an out-of-range root");
    if (h.flags & kBadPartCount) throw CollectiveMismatch(who + " passed a part list whose length is not world_size");
    if (h.flags & kBadPartType) throw CollectiveMismatch(who + " passed parts with inconsistent dtypes");
    if (expect.same_dtype && h.dtype != all[0].dtype) throw CollectiveMismatch(who + " dtype differs from rank 0");
    if (expect.same_root && h.root != all[0].root) throw CollectiveMismatch(who + " root differs from rank 0");
    if (expect.same_op && h.op != all[0].op) throw CollectiveMismatch(who + " reduce op differs from rank 0");
    if (expect.same_length && h.length != all[0].length) {
      throw CollectiveMismatch(who + " length " + std::to_string(h.length) + " differs from rank 0 length " +
                               std::to_string(all[0].length));
    }
  }
  return all;
}

Header make_header(Communicator& comm, Kind kind, DataType dtype, std::uint64_t length, int root = 0,
                   ReduceOp op = ReduceOp::Sum) {
  Header h{};
  h.kind = kind;
  h.dtype = static_cast<std::uint8_t>(dtype);
  h.op = static_cast<std::uint8_t>(op);
  h.root = static_cast<std::uint32_t>(root);
  h.length = length;
  if (root < 0 || root >= comm.world_size()) h.flags |= kBadRoot;
  return h;
}

void require_numeric(DataType t) {
  if (!is_numeric(t)) throw InvalidArgument("collectives operate on Int64 or Float64 arrays");
}

// ---- unchecked algorithms ----

Bytes broadcast_impl(Communicator& comm, Bytes data, int root, MessageTag tag) {
  const int w = comm.world_size();
  const int vr = (comm.rank() - root + w) % w;
  int mask = 1;
  while (mask < w) {
    if (vr & mask) {
      data = comm.recv((vr - mask + root) % w, tag);
      break;
    }
    mask <<= 1;
  }
  mask >>= 1;
  while (mask > 0) {
    if (vr + mask < w) comm.send((vr + mask + root) % w, tag, std::span<const std::uint8_t>(data));
    mask >>= 1;
  }
  return data;
}

std::vector<Bytes> gather_impl(Communicator& comm, Bytes mine, int root, MessageTag tag) {
  std::vector<Bytes> out;
  if (comm.rank() != root) {
    comm.send(root, tag, std::move(mine));
    return out;
  }
  out.resize(comm.world_size());
  for (int r = 0; r < comm.world_size(); ++r) {
    out[r] = (r == root) ? std::move(mine) : comm.recv(r, tag);
  }
  return out;
}

std::vector<Bytes> alltoall_impl(Communicator& comm, std::vector<Bytes> parts, MessageTag tag) {
  const int w = comm.world_size();
  const int r = comm.rank();
  std::vector<Bytes> out(w);
  out[r] = std::move(parts[r]);
  if (w == 1) return out;
  std::vector<std::uint64_t> incoming(w, 0);
  for (int k = 1; k < w; ++k) {
    const int to = (r + k) % w;
    const int from = (r - k + w) % w;
    const std::uint64_t len = parts[to].size();
    Bytes msg(8);
    std::memcpy(msg.data(), &len, 8);
    comm.send(to, tag, std::move(msg));
    Bytes got = comm.recv(from, tag);
    if (got.size() != 8) throw ParseError(ParseErrorKind::kTruncated, "alltoall length message");
    std::memcpy(&incoming[from], got.data(), 8);
  }
  for (int k = 1; k < w; ++k) {
    const int to = (r + k) % w;
    const int from = (r - k + w) % w;
    if (!parts[to].empty()) comm.send(to, tag, std::move(parts[to]));
    if (incoming[from] > 0) {
      out[from] = comm.recv(from, tag);
      if (out[from].size() != incoming[from]) throw ParseError(ParseErrorKind::kTruncated, "alltoall payload");
    }
  }
  return out;
}

NumericArray fold(DataType type, const std::vector<Bytes>& parts, ReduceOp op) {
  NumericArray acc = NumericArray::from_bytes(type, parts[0]);
  for (std::size_t r = 1; r < parts.size(); ++r) combine_into(acc, NumericArray::from_bytes(type, parts[r]), op);
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public collectives

NumericArray broadcast(Communicator& comm, const NumericArray& array, int root) {
  const auto h = make_header(comm, Kind::Broadcast, array.type(), array.size(), root);
  check(comm, h, {.same_root = true});
  Bytes data = comm.rank() == root ? array.to_bytes() : Bytes{};
  return NumericArray::from_bytes(array.type(), broadcast_impl(comm, std::move(data), root, data_tag(Kind::Broadcast)));
}

std::optional<NumericArray> gather(Communicator& comm, const NumericArray& array, int root) {
  const auto h = make_header(comm, Kind::Gather, array.type(), array.size(), root);
  check(comm, h, {.same_root = true});
  auto parts = gather_impl(comm, array.to_bytes(), root, data_tag(Kind::Gather));
  if (comm.rank() != root) return std::nullopt;
  Bytes all;
  for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  return NumericArray::from_bytes(array.type(), all);
}

NumericArray allgather(Communicator& comm, const NumericArray& array) {
  const auto h = make_header(comm, Kind::Allgather, array.type(), array.size());
  const auto headers = check(comm, h, {});
  std::uint64_t total = 0;
  for (const auto& x : headers) total += x.length;
  auto blocks = ring_allgather(comm, data_tag(Kind::Allgather), array.to_bytes());
  Bytes all;
  all.reserve(total * 8);
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    if (blocks[r].size() != headers[r].length * 8) throw ParseError(ParseErrorKind::kTruncated, "allgather block");
    all.insert(all.end(), blocks[r].begin(), blocks[r].end());
  }
  return NumericArray::from_bytes(array.type(), all);
}

NumericArray scatter(Communicator& comm, std::span<const NumericArray> parts, DataType type, int root) {
  require_numeric(type);
  auto h = make_header(comm, Kind::Scatter, type, 0, root);
  if (comm.rank() == root) {
    if (parts.size() != static_cast<std::size_t>(comm.world_size())) h.flags |= kBadPartCount;
    for (const auto& p : parts) {
      if (p.type() != type) h.flags |= kBadPartType;
    }
  }
  check(comm, h, {.same_root = true});
  const MessageTag tag = data_tag(Kind::Scatter);
  if (comm.rank() == root) {
    for (int r = 0; r < comm.world_size(); ++r) {
      if (r != root) comm.send(r, tag, parts[r].to_bytes());
    }
    return parts[root];
  }
  return NumericArray::from_bytes(type, comm.recv(root, tag));
}

std::vector<NumericArray> alltoall(Communicator& comm, std::span<const NumericArray> parts) {
  const DataType type = parts.empty() ? DataType::Int64 : parts[0].type();
  auto h = make_header(comm, Kind::Alltoall, type, parts.size());
  if (parts.size() != static_cast<std::size_t>(comm.world_size())) h.flags |= kBadPartCount;
  for (const auto& p : parts) {
    if (p.type() != type) h.flags |= kBadPartType;
  }
  check(comm, h, {});
  std::vector<Bytes> raw;
  raw.reserve(parts.size());
  for (const auto& p : parts) raw.push_back(p.to_bytes());
  auto got = alltoall_impl(comm, std::move(raw), data_tag(Kind::Alltoall));
  std::vector<NumericArray> out;
  out.reserve(got.size());
  for (const auto& b : got) out.push_back(NumericArray::from_bytes(type, b));
  return out;
}

std::optional<NumericArray> reduce(Communicator& comm, const NumericArray& array, ReduceOp op, int root) {
  const auto h = make_header(comm, Kind::Reduce, array.type(), array.size(), root, op);
  check(comm, h, {.same_root = true, .same_op = true, .same_length = true});
  auto parts = gather_impl(comm, array.to_bytes(), root, data_tag(Kind::Reduce));
  if (comm.rank() != root) return std::nullopt;
  return fold(array.type(), parts, op);
}

NumericArray allreduce(Communicator& comm, const NumericArray& array, ReduceOp op) {
  const auto h = make_header(comm, Kind::Allreduce, array.type(), array.size(), 0, op);
  check(comm, h, {.same_op = true, .same_length = true});
  const MessageTag tag = data_tag(Kind::Allreduce);
  auto parts = gather_impl(comm, array.to_bytes(), 0, tag);
  Bytes result;
  if (comm.rank() == 0) result = fold(array.type(), parts, op).to_bytes();
  return NumericArray::from_bytes(array.type(), broadcast_impl(comm, std::move(result), 0, tag));
}

std::vector<Bytes> alltoall_bytes(Communicator& comm, std::vector<Bytes> parts) {
  auto h = make_header(comm, Kind::AlltoallBytes, DataType::Int64, parts.size());
  if (parts.size() != static_cast<std::size_t>(comm.world_size())) h.flags |= kBadPartCount;
  check(comm, h, {});
  return alltoall_impl(comm, std::move(parts), data_tag(Kind::AlltoallBytes));
}

std::vector<Bytes> allgather_bytes(Communicator& comm, const Bytes& payload) {
  const auto h = make_header(comm, Kind::AllgatherBytes, DataType::Int64, payload.size());
  check(comm, h, {});
  return ring_allgather(comm, data_tag(Kind::AllgatherBytes), payload);
}

std::vector<Bytes> gather_bytes(Communicator& comm, const Bytes& payload, int root) {
  const auto h = make_header(comm, Kind::GatherBytes, DataType::Int64, payload.size(), root);
  check(comm, h, {.same_root = true});
  return gather_impl(comm, payload, root, data_tag(Kind::GatherBytes));
}

}  // namespace hptmt::coll
