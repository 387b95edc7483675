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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hptmt/columnar.hpp"
#include "hptmt/oracle.hpp"
#include "test_util.hpp"

namespace hptmt {
namespace {

using testing::floats;
using testing::hex_bytes;
using testing::ints;
using testing::make_table;
using testing::strs;

TEST(ColumnArray, Int64WithNullZeroesTheSlot) {
  const auto col = ints({1, std::nullopt, 3});
  EXPECT_EQ(col.length(), 3u);
  ASSERT_EQ(col.validity().size(), 1u);
  EXPECT_EQ(col.validity()[0], 0b101);
  EXPECT_EQ(col.null_count(), 1u);
  EXPECT_EQ(col.int64_at(0), 1);
  EXPECT_EQ(col.int64_at(1), 0);
  EXPECT_EQ(col.int64_at(2), 3);
}

TEST(ColumnArray, Utf8Offsets) {
  const auto col = strs({"ab", ""});
  EXPECT_EQ(col.offsets(), (std::vector<std::uint32_t>{0, 2, 2}));
  EXPECT_EQ(std::string(col.data().begin(), col.data().end()), "ab");
  EXPECT_EQ(col.utf8_at(1), "");
}

TEST(ColumnArray, EmptyFloatColumn) {
  const auto col = ColumnArray::empty(DataType::Float64);
  EXPECT_EQ(col.length(), 0u);
  EXPECT_TRUE(col.data().empty());
  EXPECT_TRUE(col.validity().empty());
}

TEST(ColumnArray, AllValidBitmapIsDropped) {
  const auto col = ColumnArray(DataType::Int64, 2, {0b11}, std::vector<std::uint8_t>(16, 0));
  EXPECT_FALSE(col.has_validity());
}

TEST(ColumnArray, RejectsBadLayouts) {
  EXPECT_THROW(ColumnArray(DataType::Int64, 2, {}, std::vector<std::uint8_t>(8, 0)), InvalidArgument);
  EXPECT_THROW(ColumnArray(DataType::Utf8, 2, {}, {'a', 'b'}, {0, 2, 1}), InvalidArgument);
  EXPECT_THROW(ColumnArray(DataType::Utf8, 1, {}, {'a'}, {0, 2}), InvalidArgument);
}

TEST(ColumnBuilder, TypeMismatchThrows) {
  ColumnBuilder b(DataType::Int64);
  EXPECT_THROW(b.append(OptScalar{Scalar{std::string("x")}}), InvalidArgument);
  EXPECT_THROW(b.append(OptScalar{Scalar{1.5}}), InvalidArgument);
  b.append(std::nullopt);
  EXPECT_EQ(b.finish().null_count(), 1u);
}

TEST(Table, ConcatAddsLengths) {
  const auto t2 = make_table({{"x", ints({1, 2})}});
  const auto t3 = make_table({{"x", ints({3, 4, 5})}});
  const std::vector<Table> both{t2, t3};
  EXPECT_EQ(concat_tables(both).num_rows(), 5u);
  const std::vector<Table> one{t2};
  EXPECT_TRUE(equal_contents(concat_tables(one), t2));
  const std::vector<Table> empties{Table::empty(t2.schema()), Table::empty(t2.schema())};
  const auto e = concat_tables(empties);
  EXPECT_EQ(e.num_rows(), 0u);
  EXPECT_EQ(e.schema(), t2.schema());
}

TEST(Table, ConcatSchemaMismatchThrows) {
  const std::vector<Table> mixed{make_table({{"x", ints({1})}}), make_table({{"y", ints({1})}})};
  EXPECT_THROW(concat_tables(mixed), InvalidArgument);
}

TEST(Table, Take) {
  const auto t = make_table({{"s", strs({"a", "b", "c"})}});
  const std::vector<RowIndex> perm{2, 0};
  const auto p = take(t, perm);
  EXPECT_EQ(p.column(0).utf8_at(0), "c");
  EXPECT_EQ(p.column(0).utf8_at(1), "a");
  EXPECT_EQ(take(t, std::vector<RowIndex>{}).num_rows(), 0u);
  const auto rep = take(t, std::vector<RowIndex>{1, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rep.column(0).utf8_at(i), "b");
  EXPECT_THROW(take(t, std::vector<RowIndex>{3}), InvalidArgument);
}

TEST(RowKey, FrozenEncodings) {
  const auto t = make_table({{"i", ints({1, std::nullopt})},
                             {"f", floats({-0.0, 0.0})},
                             {"s", strs({"ab", ""})}});
  const std::vector<std::size_t> i{0}, f{1}, s{2};
  EXPECT_EQ(hex_bytes(encode_row_key(t, 0, i).bytes), "01 01 00 00 00 00 00 00 00");
  EXPECT_EQ(hex_bytes(encode_row_key(t, 1, i).bytes), "00");
  EXPECT_EQ(encode_row_key(t, 0, f), encode_row_key(t, 1, f));
  EXPECT_EQ(hex_bytes(encode_row_key(t, 0, f).bytes), "01 00 00 00 00 00 00 00 00");
  EXPECT_EQ(hex_bytes(encode_row_key(t, 0, s).bytes), "01 02 00 00 00 61 62");
  EXPECT_EQ(hex_bytes(encode_row_key(t, 1, s).bytes), "01 00 00 00 00");
}

TEST(RowKey, NanPayloadsEncodeAlike) {
  const double quiet = std::numeric_limits<double>::quiet_NaN();
  const auto t = make_table({{"f", floats({quiet, -quiet, std::nan("7")})}});
  const std::vector<std::size_t> f{0};
  EXPECT_EQ(hex_bytes(encode_row_key(t, 0, f).bytes), "01 00 00 00 00 00 00 f8 7f");
  EXPECT_EQ(encode_row_key(t, 0, f), encode_row_key(t, 1, f));
  EXPECT_EQ(encode_row_key(t, 0, f), encode_row_key(t, 2, f));
}

TEST(Fnv1a, PublishedVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Canonicalize, SortsRows) {
  const auto t = make_table({{"x", ints({2, 1})}});
  const auto c = canonicalize(t);
  EXPECT_EQ(c.column(0).int64_at(0), 1);
  EXPECT_EQ(c.column(0).int64_at(1), 2);
}

std::vector<RowIndex> random_permutation(std::mt19937_64& rng, std::size_t n) {
  std::vector<RowIndex> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

TEST(ColumnarProperty, CanonicalizeIdempotentAndPermutationInvariant) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto schema = oracle::random_schema(rng, 4);
    const auto t = oracle::random_table(rng, schema, rng() % 60);
    const auto c = canonicalize(t);
    EXPECT_TRUE(equal_contents(canonicalize(c), c));
    const auto shuffled = take(t, random_permutation(rng, t.num_rows()));
    EXPECT_TRUE(equal_contents(canonicalize(shuffled), c));
  }
}

TEST(ColumnarProperty, RowKeyInjectiveOverValueEquality) {
  std::mt19937_64 rng(12);
  oracle::GenOptions g;
  g.int_range = 3;
  g.max_string = 1;
  g.null_rate = 0.2;
  g.nan_rate = 0.2;
  for (int i = 0; i < 100; ++i) {
    const auto schema = oracle::random_schema(rng, 3);
    const auto t = oracle::random_table(rng, schema, 30, g);
    std::vector<std::size_t> all(schema.size());
    std::iota(all.begin(), all.end(), 0);
    const auto rows = oracle::rows_of(t);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < rows.size(); ++b) {
        const bool keys_equal = encode_row_key(t, a, all) == encode_row_key(t, b, all);
        EXPECT_EQ(keys_equal, oracle::same_row(rows[a], rows[b]));
      }
    }
  }
}

TEST(ColumnarProperty, LayoutInvariantsHoldAfterEveryOperation) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto schema = oracle::random_schema(rng, 4);
    const auto t = oracle::random_table(rng, schema, rng() % 50);
    const auto perm = random_permutation(rng, t.num_rows());
    const std::vector<Table> parts{t, take(t, perm), slice(t, t.num_rows() / 2, t.num_rows() - t.num_rows() / 2)};
    for (const auto& part : {parts[1], parts[2], concat_tables(parts)}) {
      for (std::size_t c = 0; c < part.num_columns(); ++c) EXPECT_NO_THROW(part.column(c).validate());
    }
  }
}

}  // namespace
}  // namespace hptmt
