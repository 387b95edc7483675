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

#include "hptmt/oracle.hpp"
#include "test_util.hpp"

namespace hptmt::oracle {
namespace {

using testing::floats;
using testing::ints;
using testing::make_table;

TEST(Oracle, ValueRules) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_TRUE(same_value(std::nullopt, std::nullopt));
  EXPECT_TRUE(same_value(Scalar(nan), Scalar(-nan)));
  EXPECT_TRUE(same_value(Scalar(-0.0), Scalar(0.0)));
  EXPECT_FALSE(same_value(Scalar(std::int64_t{1}), std::nullopt));
  EXPECT_LT(order_values(Scalar(1e308), Scalar(nan)), 0);
  EXPECT_LT(order_values(Scalar(nan), std::nullopt), 0);
  EXPECT_LT(order_values(Scalar(nan), std::nullopt, true), 0);
  EXPECT_GT(order_values(Scalar(1.0), Scalar(2.0), true), 0);
}

TEST(Oracle, ReferenceEncodingMatchesDocumentedBytes) {
  const Row row{Scalar(std::int64_t{1}), std::nullopt, Scalar(std::string("ab"))};
  const std::vector<std::size_t> cols{0, 1, 2};
  EXPECT_EQ(testing::hex_bytes(encode_key_reference(row, cols)),
            "01 01 00 00 00 00 00 00 00 00 01 02 00 00 00 61 62");
  EXPECT_EQ(fnv1a_reference("foobar"), 0x85944171f73967e8ULL);
}

TEST(Oracle, RowsRoundTripThroughTables) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 20; ++i) {
    const auto schema = random_schema(rng, 4);
    const auto t = random_table(rng, schema, rng() % 30);
    EXPECT_TRUE(equal_ordered(table_of(schema, rows_of(t)), t));
  }
}

TEST(Oracle, ComparisonHelpers) {
  const auto a = make_table({{"k", ints({1, 2})}, {"v", floats({1.0, 2.0})}});
  const auto b = make_table({{"k", ints({2, 1})}, {"v", floats({2.0 + 1e-12, 1.0})}});
  EXPECT_FALSE(equal_ordered(a, b));
  EXPECT_FALSE(equal_unordered(a, b));
  const std::vector<std::size_t> tolerant{1};
  EXPECT_TRUE(equal_unordered_tolerant(a, b, tolerant, 1e-9));
  EXPECT_FALSE(equal_unordered_tolerant(a, b, tolerant, 1e-15));
}

TEST(Oracle, FoldsInInputOrder) {
  const std::vector<coll::NumericArray> in{coll::NumericArray(std::vector<double>{1e16}),
                                           coll::NumericArray(std::vector<double>{1.0}),
                                           coll::NumericArray(std::vector<double>{-1e16})};
  EXPECT_EQ(fold_arrays(in, coll::ReduceOp::Sum).float64()[0], 0.0);
  EXPECT_EQ(concat_arrays(in).size(), 3u);
}

}  // namespace
}  // namespace hptmt::oracle
