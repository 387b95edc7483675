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

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "app_internal.hpp"
#include "hptmt/app.hpp"
#include "hptmt/collectives.hpp"
#include "hptmt/dataflow.hpp"
#include "hptmt/dist_table.hpp"
#include "hptmt/mds.hpp"
#include "hptmt/oracle.hpp"
#include "hptmt/wire.hpp"

namespace hptmt::app {
namespace {

using detail::mix_digest;
using oracle::GenOptions;
using Rng = std::mt19937_64;

// First failure of a suite plus a running digest of everything it computed.
class Outcome {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok && passed_) {
      passed_ = false;
      detail_ = what;
    }
  }
  void fold(std::uint64_t value) { digest_ = mix_digest(digest_, value); }

  // Runs local-only work; an exception counts as a failure of `what`.
  template <typename F>
  void guarded(const std::string& what, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      check(false, what + ": " + e.what());
    }
  }

  SuiteResult result(std::string name) const {
    SuiteResult r;
    r.name = std::move(name);
    r.passed = passed_;
    r.digest = digest_;
    r.detail = detail_;
    return r;
  }

 private:
  bool passed_ = true;
  std::uint64_t digest_ = 0;
  std::string detail_;
};

Rng case_rng(std::uint64_t seed, std::uint64_t suite, std::uint64_t index) {
  return Rng(mix_digest(mix_digest(seed, suite), index));
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Uniform in log space over [0, max].
std::size_t log_uniform(Rng& rng, std::size_t max) {
  const double u = std::uniform_real_distribution<double>(0.0, std::log(static_cast<double>(max) + 1.0))(rng);
  return std::min(max, static_cast<std::size_t>(std::exp(u)) - 1);
}

std::vector<std::size_t> random_columns(Rng& rng, std::size_t ncols, std::size_t min_count, std::size_t max_count) {
  std::vector<std::size_t> all(ncols);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(pick(rng, min_count, std::min(max_count, ncols)));
  return all;
}

std::vector<std::string> names_of(const Schema& schema, std::span<const std::size_t> cols) {
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(schema.field(c).name);
  return names;
}

// Some of a's rows followed by fresh ones, so set operators see overlap.
Table overlapping(Rng& rng, const Table& a, std::size_t fresh_rows, const GenOptions& g) {
  std::vector<RowIndex> idx;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    if (coin(rng, 0.3)) idx.push_back(static_cast<RowIndex>(r));
  }
  std::vector<Table> parts{take(a, idx), oracle::random_table(rng, a.schema(), fresh_rows, g)};
  return concat_tables(parts, &a.schema());
}

rel::Predicate random_predicate(Rng& rng, const Schema& schema, const GenOptions& g) {
  rel::Predicate p;
  const std::size_t n = pick(rng, 1, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = schema.field(pick(rng, 0, schema.size() - 1));
    const auto op = static_cast<rel::CmpOp>(pick(rng, 0, 5));
    Scalar literal = oracle::random_literal(rng, f.type, g);
    if (f.type == DataType::Float64 && coin(rng, 0.2)) literal = static_cast<std::int64_t>(pick(rng, 0, 5));
    p.conjuncts.push_back({f.name, op, std::move(literal)});
  }
  return p;
}

rel::SortSpec random_sort_spec(Rng& rng, const Schema& schema) {
  rel::SortSpec spec;
  for (auto c : random_columns(rng, schema.size(), 1, schema.size())) {
    spec.keys.push_back({schema.field(c).name, coin(rng, 0.5) ? rel::SortOrder::Desc : rel::SortOrder::Asc});
  }
  return spec;
}

rel::AggSpec random_agg_spec(Rng& rng, const Schema& schema, std::size_t max_keys) {
  rel::AggSpec spec;
  spec.group_keys = names_of(schema, random_columns(rng, schema.size(), 0, max_keys));
  const std::size_t n = pick(rng, 1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = schema.field(pick(rng, 0, schema.size() - 1));
    auto fn = static_cast<rel::AggFn>(pick(rng, 0, 4));
    if (!is_numeric(f.type) && (fn == rel::AggFn::Sum || fn == rel::AggFn::Prod)) fn = rel::AggFn::Count;
    spec.aggregates.push_back({f.name, fn, "agg" + std::to_string(i)});
  }
  return spec;
}

struct JoinCase {
  Table a;
  Table b;
  rel::JoinSpec spec;
};

// b holds copies of a's key types under other names, plus extra columns
// whose names may clash with a's. With wide_keys the keys are Int64 so the
// output stays near-linear in the input.
JoinCase random_join_case(Rng& rng, std::size_t rows_a, std::size_t rows_b, GenOptions g, bool wide_keys) {
  std::vector<Field> fa = oracle::random_schema(rng, 3).fields();
  const auto keys = random_columns(rng, fa.size(), 1, 2);
  if (wide_keys) {
    for (auto k : keys) fa[k].type = DataType::Int64;
    g.int_range = std::max<std::int64_t>(20, static_cast<std::int64_t>(std::max(rows_a, rows_b)));
  }
  std::vector<Field> fb;
  JoinCase jc;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    fb.push_back({"k" + std::to_string(i), fa[keys[i]].type});
    jc.spec.left_keys.push_back(fa[keys[i]].name);
    jc.spec.right_keys.push_back(fb.back().name);
  }
  const std::size_t extra = pick(rng, 0, 2);
  for (std::size_t i = 0; i < extra; ++i) {
    fb.push_back({"c" + std::to_string(i), static_cast<DataType>(pick(rng, 0, 3))});
  }
  jc.a = oracle::random_table(rng, Schema(fa), rows_a, g);
  jc.b = oracle::random_table(rng, Schema(fb), rows_b, g);
  return jc;
}

constexpr rel::JoinType kJoinTypes[] = {rel::JoinType::Inner, rel::JoinType::Left, rel::JoinType::Right,
                                        rel::JoinType::FullOuter};

void expect_ordered(Outcome& out, const Table& got, const Table& want, const std::string& what) {
  out.fold(detail::ordered_digest(got));
  out.check(oracle::equal_ordered(got, want), what + ": differs from the reference");
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::uint64_t digest_doubles(std::span<const double> values) {
  std::uint64_t d = values.size();
  for (double v : values) d = mix_digest(d, std::bit_cast<std::uint64_t>(v));
  return d;
}

// Every Float64 Sum/Prod output of an aggregate.
std::vector<std::size_t> tolerant_columns(const Schema& input, const rel::AggSpec& spec) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < spec.aggregates.size(); ++i) {
    const auto& agg = spec.aggregates[i];
    const bool float_in = input.field(input.require_index(agg.column)).type == DataType::Float64;
    if (float_in && (agg.fn == rel::AggFn::Sum || agg.fn == rel::AggFn::Prod)) {
      cols.push_back(spec.group_keys.size() + i);
    }
  }
  return cols;
}

constexpr double kAggTolerance = 1e-9;
constexpr std::uint64_t kCollinearSeed = 0;

// --- collectives ------------------------------------------------------------

coll::NumericArray random_array(Rng& rng, DataType type, std::size_t n) {
  if (type == DataType::Int64) {
    std::vector<std::int64_t> v(n);
    std::uniform_int_distribution<std::int64_t> any(std::numeric_limits<std::int64_t>::min(),
                                                    std::numeric_limits<std::int64_t>::max());
    std::uniform_int_distribution<std::int64_t> small(-5, 5);
    for (auto& x : v) x = coin(rng, 0.5) ? small(rng) : any(rng);
    return coll::NumericArray(std::move(v));
  }
  static constexpr double kSpecial[] = {std::numeric_limits<double>::quiet_NaN(),
                                        -std::numeric_limits<double>::quiet_NaN(),
                                        -0.0,
                                        0.0,
                                        std::numeric_limits<double>::infinity(),
                                        -std::numeric_limits<double>::infinity()};
  std::vector<double> v(n);
  std::uniform_real_distribution<double> value(-1e3, 1e3);
  for (auto& x : v) x = coin(rng, 0.1) ? kSpecial[pick(rng, 0, std::size(kSpecial) - 1)] : value(rng);
  return coll::NumericArray(std::move(v));
}

std::uint64_t digest_array(const coll::NumericArray& a) {
  const Bytes b = a.to_bytes();
  return mix_digest(static_cast<std::uint64_t>(a.type()),
                    fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size())));
}

}  // namespace

SuiteResult suite_collectives(WorkerContext& ctx, const SuiteOptions& options) {
  Communicator& comm = ctx.comm();
  const int world = ctx.world_size();
  const int me = ctx.rank();
  Outcome out;
  auto expect = [&](const coll::NumericArray& got, const coll::NumericArray& want, const std::string& what) {
    out.fold(digest_array(got));
    out.check(got == want, what);
  };
  std::uint64_t index = 0;
  for (std::size_t len : options.collective_lengths) {
    for (DataType type : {DataType::Int64, DataType::Float64}) {
      Rng rng = case_rng(options.seed, 1, index++);
      const std::string tag = std::string(to_string(type)) + " len " + std::to_string(len) + " ";
      const int root = static_cast<int>(len % static_cast<std::size_t>(world));
      std::vector<coll::NumericArray> inputs;
      for (int r = 0; r < world; ++r) inputs.push_back(random_array(rng, type, len));
      // parts[s][d]: what rank s sends to rank d.
      std::vector<std::vector<coll::NumericArray>> parts(world);
      for (int s = 0; s < world; ++s) {
        for (int d = 0; d < world; ++d) parts[s].push_back(random_array(rng, type, len));
      }

      expect(coll::broadcast(comm, inputs[me], root), inputs[root], tag + "broadcast");

      const auto gathered = coll::gather(comm, inputs[me], root);
      if (me == root) {
        out.check(gathered.has_value(), tag + "gather: root got nothing");
        if (gathered) expect(*gathered, oracle::concat_arrays(inputs), tag + "gather");
      } else {
        out.check(!gathered.has_value(), tag + "gather: non-root got data");
      }

      expect(coll::allgather(comm, inputs[me]), oracle::concat_arrays(inputs), tag + "allgather");

      expect(coll::scatter(comm, parts[root], type, root), parts[root][me], tag + "scatter");

      const auto received = coll::alltoall(comm, parts[me]);
      out.check(received.size() == static_cast<std::size_t>(world), tag + "alltoall: wrong part count");
      for (int s = 0; s < world && s < static_cast<int>(received.size()); ++s) {
        expect(received[s], parts[s][me], tag + "alltoall");
      }

      std::vector<Bytes> byte_parts;
      for (const auto& p : parts[me]) byte_parts.push_back(p.to_bytes());
      const auto received_bytes = coll::alltoall_bytes(comm, std::move(byte_parts));
      out.check(received_bytes.size() == static_cast<std::size_t>(world), tag + "alltoall_bytes: wrong part count");
      for (int s = 0; s < world && s < static_cast<int>(received_bytes.size()); ++s) {
        out.check(received_bytes[s] == parts[s][me].to_bytes(), tag + "alltoall_bytes");
      }

      for (auto op : {coll::ReduceOp::Sum, coll::ReduceOp::Min, coll::ReduceOp::Max, coll::ReduceOp::Prod}) {
        const auto want = oracle::fold_arrays(inputs, op);
        const std::string name = tag + coll::to_string(op);
        const auto reduced = coll::reduce(comm, inputs[me], op, root);
        if (me == root) {
          out.check(reduced.has_value(), name + " reduce: root got nothing");
          if (reduced) expect(*reduced, want, name + " reduce");
        } else {
          out.check(!reduced.has_value(), name + " reduce: non-root got data");
        }
        expect(coll::allreduce(comm, inputs[me], op), want, name + " allreduce");
      }
    }
  }
  return out.result("collectives");
}

SuiteResult suite_relational(WorkerContext& ctx, const SuiteOptions& options) {
  Outcome out;
  const GenOptions g;
  for (int i = 0; i < options.relational_cases; ++i) {
    if (i % ctx.world_size() != ctx.rank()) continue;
    Rng rng = case_rng(options.seed, 2, static_cast<std::uint64_t>(i));
    const std::string tag = "case " + std::to_string(i) + " ";
    const Schema schema = oracle::random_schema(rng, 4);
    const Table a = oracle::random_table(rng, schema, pick(rng, 0, 140), g);
    const Table b = overlapping(rng, a, pick(rng, 0, 60), g);

    out.guarded(tag + "select", [&] {
      const auto p = random_predicate(rng, schema, g);
      expect_ordered(out, rel::select(a, p), oracle::select(a, p), tag + "select");
    });
    out.guarded(tag + "distinct", [&] {
      expect_ordered(out, rel::distinct(b), oracle::distinct(b), tag + "distinct");
    });
    out.guarded(tag + "union", [&] {
      expect_ordered(out, rel::set_union(a, b), oracle::set_union(a, b), tag + "union");
    });
    out.guarded(tag + "difference", [&] {
      expect_ordered(out, rel::set_difference(a, b), oracle::set_difference(a, b), tag + "difference");
    });
    out.guarded(tag + "intersect", [&] {
      expect_ordered(out, rel::set_intersect(a, b), oracle::set_intersect(a, b), tag + "intersect");
    });
    out.guarded(tag + "cartesian_product", [&] {
      const Table left = slice(a, 0, std::min<std::size_t>(a.num_rows(), 40));
      const Table right = oracle::random_table(rng, oracle::random_schema(rng, 3), pick(rng, 0, 40), g);
      expect_ordered(out, rel::cartesian_product(left, right), oracle::cartesian_product(left, right),
                     tag + "cartesian_product");
    });
    out.guarded(tag + "join", [&] {
      JoinCase jc = random_join_case(rng, pick(rng, 0, 200), pick(rng, 0, 200), g, false);
      for (auto type : kJoinTypes) {
        jc.spec.type = type;
        expect_ordered(out, rel::join(jc.a, jc.b, jc.spec), oracle::join(jc.a, jc.b, jc.spec),
                       tag + "join " + rel::to_string(type));
      }
    });
    out.guarded(tag + "sort", [&] {
      const auto spec = random_sort_spec(rng, schema);
      expect_ordered(out, rel::sort(a, spec), oracle::sort(a, spec), tag + "sort");
    });
    out.guarded(tag + "groupby", [&] {
      const auto spec = random_agg_spec(rng, schema, 2);
      expect_ordered(out, rel::groupby_aggregate(a, spec), oracle::groupby_aggregate(a, spec), tag + "groupby");
    });
  }
  return out.result("relational");
}

SuiteResult suite_shuffle(WorkerContext& ctx, const SuiteOptions& options) {
  const int world = ctx.world_size();
  const int me = ctx.rank();
  Outcome out;
  for (int inst = 0; inst < options.shuffle_instances; ++inst) {
    Rng rng = case_rng(options.seed, 3, static_cast<std::uint64_t>(inst));
    const std::string tag = "instance " + std::to_string(inst) + " ";
    const Schema schema = oracle::random_schema(rng, 3);
    const std::size_t rows = inst % 4 == 0 ? pick(rng, 0, static_cast<std::size_t>(world)) : pick(rng, 0, 300);
    const Table table = oracle::random_table(rng, schema, rows);
    const auto parts = oracle::random_partition(rng, table, world);
    const auto keys = random_columns(rng, schema.size(), 1, schema.size());
    const bool null_local = inst % 2 == 1;

    const Table mine = shuffle(ctx, parts[me], names_of(schema, keys), ShuffleOptions{null_local});
    const Table all = detail::allgather_table(ctx, mine);
    out.fold(detail::table_digest(mine));

    out.guarded(tag, [&] {
      out.check(oracle::equal_unordered(all, table), tag + "rows not conserved");
      auto has_null_key = [&](const oracle::Row& row) {
        return std::any_of(keys.begin(), keys.end(), [&](std::size_t c) { return !row[c].has_value(); });
      };
      oracle::Rows stayed;
      for (const auto& row : oracle::rows_of(mine)) {
        if (null_local && has_null_key(row)) {
          stayed.push_back(row);
          continue;
        }
        const auto hash = oracle::fnv1a_reference(oracle::encode_key_reference(row, keys));
        out.check(hash % static_cast<std::uint64_t>(world) == static_cast<std::uint64_t>(me),
                  tag + "row on the wrong rank");
      }
      if (null_local) {
        oracle::Rows expected;
        for (const auto& row : oracle::rows_of(parts[me])) {
          if (has_null_key(row)) expected.push_back(row);
        }
        out.check(oracle::equal_unordered(oracle::table_of(schema, stayed), oracle::table_of(schema, expected)),
                  tag + "null-key rows moved");
      }
    });
  }
  return out.result("shuffle");
}

namespace {

enum class DistOp { Shuffle, Union, Difference, Intersect, Join, Aggregate, Groupby, Sort };

constexpr std::pair<DistOp, const char*> kDistOps[] = {
    {DistOp::Shuffle, "shuffle"},     {DistOp::Union, "dist_union"},
    {DistOp::Difference, "dist_difference"}, {DistOp::Intersect, "dist_intersect"},
    {DistOp::Join, "dist_join"},      {DistOp::Aggregate, "dist_aggregate"},
    {DistOp::Groupby, "dist_groupby_aggregate"}, {DistOp::Sort, "dist_sort"},
};

Schema aggregate_input_schema(Rng& rng) {
  return Schema({{"g", static_cast<DataType>(pick(rng, 0, 3))}, {"i", DataType::Int64}, {"f", DataType::Float64}});
}

std::vector<rel::Aggregate> every_aggregate() {
  std::vector<rel::Aggregate> aggs;
  for (const char* col : {"i", "f"}) {
    for (auto fn : {rel::AggFn::Sum, rel::AggFn::Min, rel::AggFn::Max, rel::AggFn::Count, rel::AggFn::Prod}) {
      aggs.push_back({col, fn, std::string(rel::to_string(fn)) + "_" + col});
    }
  }
  aggs.push_back({"g", rel::AggFn::Count, "count_g"});
  return aggs;
}

// One random instance of `op`, checked against the local operator on the
// concatenated input.
void run_dist_instance(WorkerContext& ctx, Outcome& out, DistOp op, const std::string& tag, Rng& rng,
                       std::size_t max_rows) {
  const int world = ctx.world_size();
  const int me = ctx.rank();
  const std::size_t n = log_uniform(rng, max_rows);
  GenOptions g;
  g.int_range = std::max<std::int64_t>(20, static_cast<std::int64_t>(n / 2));

  switch (op) {
    case DistOp::Shuffle:
    case DistOp::Union:
    case DistOp::Difference:
    case DistOp::Intersect:
    case DistOp::Sort: {
      const Schema schema = oracle::random_schema(rng, 3);
      const Table a = oracle::random_table(rng, schema, n, g);
      const Table b = overlapping(rng, a, log_uniform(rng, max_rows / 2), g);
      const auto pa = oracle::random_partition(rng, a, world);
      const auto pb = oracle::random_partition(rng, b, world);
      Table mine;
      Table want;
      bool ordered = false;
      if (op == DistOp::Shuffle) {
        const auto keys = names_of(schema, random_columns(rng, schema.size(), 1, schema.size()));
        mine = shuffle(ctx, pa[me], keys);
        want = a;
      } else if (op == DistOp::Union) {
        mine = dist_union(ctx, pa[me], pb[me]);
        want = rel::set_union(a, b);
      } else if (op == DistOp::Difference) {
        mine = dist_difference(ctx, pa[me], pb[me]);
        want = rel::set_difference(a, b);
      } else if (op == DistOp::Intersect) {
        mine = dist_intersect(ctx, pa[me], pb[me]);
        want = rel::set_intersect(a, b);
      } else {
        const auto spec = random_sort_spec(rng, schema);
        mine = dist_sort(ctx, pa[me], spec);
        want = rel::sort(a, spec);
        ordered = true;
      }
      const Table all = detail::allgather_table(ctx, mine);
      out.fold(ordered ? detail::ordered_digest(all) : detail::table_digest(all));
      out.guarded(tag, [&] {
        out.check(ordered ? oracle::equal_ordered(all, want) : oracle::equal_unordered(all, want),
                  tag + "differs from the local operator");
      });
      return;
    }
    case DistOp::Join: {
      const std::size_t nb = log_uniform(rng, max_rows);
      JoinCase jc = random_join_case(rng, n, nb, g, std::max(n, nb) > 300);
      jc.spec.type = kJoinTypes[pick(rng, 0, 3)];
      const auto pa = oracle::random_partition(rng, jc.a, world);
      const auto pb = oracle::random_partition(rng, jc.b, world);
      const Table all = detail::allgather_table(ctx, dist_join(ctx, pa[me], pb[me], jc.spec));
      out.fold(detail::table_digest(all));
      out.guarded(tag, [&] {
        out.check(oracle::equal_unordered(all, rel::join(jc.a, jc.b, jc.spec)),
                  tag + rel::to_string(jc.spec.type) + " differs from the local operator");
      });
      return;
    }
    case DistOp::Aggregate:
    case DistOp::Groupby: {
      g.float_pool = false;
      g.nan_rate = coin(rng, 0.5) ? 0.02 : 0.0;
      const Schema schema = aggregate_input_schema(rng);
      const Table a = oracle::random_table(rng, schema, n, g);
      const auto pa = oracle::random_partition(rng, a, world);
      rel::AggSpec spec;
      spec.aggregates = every_aggregate();
      Table mine;
      Table got;
      if (op == DistOp::Aggregate) {
        mine = dist_aggregate(ctx, pa[me], spec.aggregates);
        got = mine;
      } else {
        spec.group_keys = coin(rng, 0.3) ? std::vector<std::string>{"g", "i"} : std::vector<std::string>{"g"};
        mine = dist_groupby_aggregate(ctx, pa[me], spec);
        got = detail::allgather_table(ctx, mine);
      }
      const Table want = rel::groupby_aggregate(a, spec);
      out.fold(detail::table_digest(got));
      out.guarded(tag, [&] {
        const auto tolerant = tolerant_columns(schema, spec);
        out.check(oracle::equal_unordered_tolerant(got, want, tolerant, kAggTolerance),
                  tag + "differs from the local operator");
      });
      return;
    }
  }
}

}  // namespace

SuiteResult suite_dist_ops(WorkerContext& ctx, const SuiteOptions& options) {
  Outcome out;
  std::uint64_t op_index = 0;
  for (const auto& [op, name] : kDistOps) {
    for (int inst = 0; inst < options.dist_instances; ++inst) {
      Rng rng = case_rng(options.seed, 4, op_index * 1'000'000 + static_cast<std::uint64_t>(inst));
      run_dist_instance(ctx, out, op, std::string(name) + " instance " + std::to_string(inst) + ": ", rng,
                        options.dist_max_rows);
    }
    ++op_index;
  }
  return out.result("dist-ops");
}

SuiteResult suite_chunked_shuffle(WorkerContext& ctx, const SuiteOptions& options) {
  const int world = ctx.world_size();
  const int me = ctx.rank();
  Outcome out;
  enum Shape { kAllEmpty, kEmptyChunks, kSingleRow, kManyChunks, kRandom };
  const Shape shapes[] = {kAllEmpty, kEmptyChunks, kSingleRow, kManyChunks, kRandom, kRandom, kRandom};
  std::uint64_t index = 0;
  for (Shape shape : shapes) {
    const std::uint64_t case_id = index++;
    Rng shared = case_rng(options.seed, 5, case_id);
    Rng local = case_rng(options.seed, 5, (case_id << 20) + static_cast<std::uint64_t>(me) + 1);
    const std::string tag = "case " + std::to_string(case_id) + " ";
    const Schema schema = oracle::random_schema(shared, 3);
    const auto keys = names_of(schema, random_columns(shared, schema.size(), 1, schema.size()));

    Table input;
    std::size_t rows_per_chunk = 1;
    switch (shape) {
      case kAllEmpty:
      case kEmptyChunks: input = Table::empty(schema); break;
      case kSingleRow: input = oracle::random_table(local, schema, 1); break;
      case kManyChunks: input = oracle::random_table(local, schema, options.many_chunks); break;
      case kRandom:
        input = oracle::random_table(local, schema, pick(local, 0, 2000));
        rows_per_chunk = pick(local, 1, 300);
        break;
    }
    std::unique_ptr<ChunkStream> stream;
    if (shape == kEmptyChunks) {
      stream = std::make_unique<VectorStream>(schema, std::vector<Table>{input, input, input});
    } else {
      stream = chunked(input, rows_per_chunk);
    }

    const Table eager = shuffle(ctx, input, keys);
    auto streaming = chunked_shuffle(ctx, std::move(stream), keys);
    const Table got = drain(*streaming);
    out.fold(detail::table_digest(got));
    out.check(streaming->eos_received() == world, tag + "stream ended before every EOS arrived");
    out.guarded(tag, [&] { out.check(oracle::equal_unordered(got, eager), tag + "differs from the eager shuffle"); });
  }
  return out.result("chunked-shuffle");
}

SuiteResult suite_external_sort(WorkerContext& ctx, const SuiteOptions& options) {
  Outcome out;
  const auto dir = ctx.spill_dir() / ("hptmt-verify-" + std::to_string(::getpid()) + "-" + std::to_string(ctx.rank()));
  std::filesystem::create_directories(dir);
  out.guarded("external sort", [&] {
    ContextOptions opts;
    opts.memory_budget = options.external_sort_budget;
    opts.spill_dir = dir;
    opts.seed = ctx.seed();
    opts.threads = 1;
    WorkerContext local(ctx.comm(), opts);

    Rng rng = case_rng(options.seed, 6, static_cast<std::uint64_t>(ctx.rank()));
    GenOptions g;
    g.int_range = 1000;
    const Schema schema({{"k", DataType::Int64}, {"f", DataType::Float64}, {"s", DataType::Utf8}});
    const Table input = oracle::random_table(rng, schema, options.external_sort_rows, g);
    const rel::SortSpec spec{{{"k", rel::SortOrder::Asc}, {"f", rel::SortOrder::Desc}}};

    auto sorter = external_sort(local, chunked(input, 1000), spec);
    const Table got = drain(*sorter);
    out.fold(detail::ordered_digest(got));
    out.check(oracle::equal_ordered(got, rel::sort(input, spec)), "output differs from a stable sort");
    const std::size_t runs = sorter->runs_spilled();
    out.check(runs >= 2, "expected at least two spill runs, got " + std::to_string(runs));
    const std::size_t bound = opts.memory_budget + sorter->block_bytes() * runs;
    out.check(local.memory().peak() <= bound, "peak table bytes " + std::to_string(local.memory().peak()) +
                                                  " above " + std::to_string(bound));
    for (const auto& f : sorter->spill_files()) out.check(!std::filesystem::exists(f), "spill file left behind");
  });
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  return out.result("external-sort");
}

SuiteResult suite_mds(WorkerContext& ctx, const SuiteOptions& options) {
  Outcome out;
  const std::vector<std::string> features{"x", "y"};
  const Schema schema({{"x", DataType::Float64}, {"y", DataType::Float64}});
  auto owned = [&](const Table& all) {
    const auto range = mds::owned_rows(all.num_rows(), ctx.world_size(), ctx.rank());
    return slice(all, range.lo, range.size());
  };
  auto solo = [&](const Table& all, const mds::MdsOptions& opts) {
    mds::MdsResult result;
    run_inproc(1, [&](Communicator& comm) {
      ContextOptions co;
      co.seed = ctx.seed();
      WorkerContext one(comm, co);
      result = mds::run_mds(one, all, features, opts);
    });
    return result;
  };

  {
    Rng rng = case_rng(options.seed, 7, 0);
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    ColumnBuilder x(DataType::Float64), y(DataType::Float64);
    for (std::size_t i = 0; i < options.mds_points; ++i) {
      x.append_float64(coord(rng));
      y.append_float64(coord(rng));
    }
    const Table points(schema, std::vector<ColumnArray>{x.finish(), y.finish()});
    mds::MdsOptions opts;
    opts.max_iters = 50;
    opts.tolerance = 1e-12;
    const auto result = mds::run_mds(ctx, owned(points), features, opts);
    const auto& h = result.stress_history;
    out.fold(digest_doubles(h));
    out.fold(digest_doubles(result.embedding.coords));
    out.check(!h.empty(), "empty stress history");
    for (std::size_t i = 1; i < h.size(); ++i) {
      out.check(h[i] - h[i - 1] <= 1e-9 * h[i - 1], "stress increased at step " + std::to_string(i));
    }
    out.guarded("single-worker reference", [&] {
      const auto ref = solo(points, opts);
      out.check(bitwise_equal(h, ref.stress_history), "stress history differs from one worker");
      out.check(bitwise_equal(result.embedding.coords, ref.embedding.coords), "embedding differs from one worker");
    });
  }
  {
    // Collinear regression instance, delta = (1, 1, 2), embedded in 1-D. In
    // 1-D the result depends only on the starting order of the points, so it
    // runs at a fixed seed instead of --seed.
    ColumnBuilder x(DataType::Float64);
    for (double v : {0.0, 1.0, 2.0}) x.append_float64(v);
    const Table points(Schema({{"x", DataType::Float64}}), std::vector<ColumnArray>{x.finish()});
    ContextOptions fixed;
    fixed.seed = kCollinearSeed;
    WorkerContext seeded(ctx.comm(), fixed);
    mds::MdsOptions opts;
    opts.dims = 1;
    opts.max_iters = 200;
    opts.tolerance = 0.0;
    const auto range = mds::owned_rows(3, ctx.world_size(), ctx.rank());
    const std::vector<std::string> feature{"x"};
    const auto result = mds::run_mds(seeded, slice(points, range.lo, range.size()), feature, opts);
    out.fold(digest_doubles(result.stress_history));
    const double last = result.stress_history.back();
    out.check(last < 1e-6, "collinear instance ended at stress " + std::to_string(last));
    const auto& c = result.embedding.coords;
    const double gap01 = std::fabs(c[1] - c[0]);
    const double gap12 = std::fabs(c[2] - c[1]);
    out.check(std::fabs(gap01 - 1.0) <= 1e-3 && std::fabs(gap12 - 1.0) <= 1e-3, "collinear gaps not recovered");
  }
  return out.result("mds");
}

SuiteResult suite_aggregate_bytes(WorkerContext& ctx, const SuiteOptions& options) {
  const int world = ctx.world_size();
  const int me = ctx.rank();
  Outcome out;
  const auto range = mds::owned_rows(options.aggregate_rows, world, me);
  Rng rng = case_rng(options.seed, 8, static_cast<std::uint64_t>(me));
  std::uniform_real_distribution<double> value(0.0, 1.0);
  ColumnBuilder k(DataType::Int64, range.size()), v(DataType::Float64, range.size());
  for (std::size_t i = 0; i < range.size(); ++i) {
    k.append_int64(7);
    v.append_float64(value(rng));
  }
  const Table table(Schema({{"k", DataType::Int64}, {"v", DataType::Float64}}),
                    std::vector<ColumnArray>{k.finish(), v.finish()});
  const rel::AggSpec spec{{"k"}, {{"v", rel::AggFn::Sum, "sum_v"}}};

  ctx.comm().barrier();
  const auto before_agg = ctx.stats().bytes_sent;
  const Table total = dist_aggregate(ctx, table, spec.aggregates);
  const auto agg_bytes = static_cast<std::int64_t>(ctx.stats().bytes_sent - before_agg);

  ctx.comm().barrier();
  const auto before_groupby = ctx.stats().bytes_sent;
  const Table grouped = dist_groupby_aggregate(ctx, table, spec);
  const auto groupby_bytes = static_cast<std::int64_t>(ctx.stats().bytes_sent - before_groupby);

  // What the pre-aggregated partial costs on the wire when it leaves this rank.
  const Table partial = rel::groupby_aggregate(table, spec);
  std::int64_t partial_bytes = 0;
  if (partial.num_rows() > 0) {
    const std::vector<std::size_t> key_col{0};
    const int dest = partition_of(encode_row_key(partial, 0, key_col).bytes, world);
    if (dest != me) partial_bytes = static_cast<std::int64_t>(serialized_size(partial));
  }

  const auto agg_total = detail::sum_ranks(ctx, agg_bytes);
  const auto groupby_total = detail::sum_ranks(ctx, groupby_bytes);
  const auto partial_total = detail::sum_ranks(ctx, partial_bytes);
  out.fold(detail::table_digest(total));
  out.fold(static_cast<std::uint64_t>(detail::sum_ranks(ctx, static_cast<std::int64_t>(grouped.num_rows()))));
  out.check(agg_total < 1024 * world, "dist_aggregate sent " + std::to_string(agg_total) + " bytes");
  out.check(groupby_total >= partial_total, "dist_groupby_aggregate sent " + std::to_string(groupby_total) +
                                                " bytes, partials need " + std::to_string(partial_total));
  return out.result("aggregate-bytes");
}

const std::vector<SuiteEntry>& suites() {
  static const std::vector<SuiteEntry> all{
      {"collectives", suite_collectives},         {"relational", suite_relational},
      {"shuffle", suite_shuffle},                 {"dist-ops", suite_dist_ops},
      {"chunked-shuffle", suite_chunked_shuffle}, {"external-sort", suite_external_sort},
      {"mds", suite_mds},                         {"aggregate-bytes", suite_aggregate_bytes},
  };
  return all;
}

SuiteResult run_suite_collective(WorkerContext& ctx, const SuiteEntry& suite, const SuiteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult local = suite.run(ctx, options);
  SuiteResult agreed;
  agreed.name = suite.name;
  agreed.passed = detail::all_ranks(ctx, local.passed);

  Bytes mine(8);
  for (int i = 0; i < 8; ++i) mine[i] = static_cast<std::uint8_t>(local.digest >> (8 * i));
  for (const auto& d : coll::allgather_bytes(ctx.comm(), mine)) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(d[i]) << (8 * i);
    agreed.digest = mix_digest(agreed.digest, v);
  }

  const auto details = coll::allgather_bytes(ctx.comm(), Bytes(local.detail.begin(), local.detail.end()));
  for (std::size_t r = 0; r < details.size(); ++r) {
    if (details[r].empty()) continue;
    agreed.detail = "rank " + std::to_string(r) + ": " + std::string(details[r].begin(), details[r].end());
    break;
  }
  agreed.seconds = detail::max_ranks(
      ctx, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return agreed;
}

std::vector<SuiteResult> run_verify(const RunConfig& config, const SuiteOptions& options,
                                    const std::vector<std::string>& only) {
  std::vector<const SuiteEntry*> selected;
  for (const auto& name : only) {
    auto it = std::find_if(suites().begin(), suites().end(), [&](const SuiteEntry& s) { return s.name == name; });
    if (it == suites().end()) throw InvalidArgument("unknown suite '" + name + "'");
    selected.push_back(&*it);
  }
  if (only.empty()) {
    for (const auto& s : suites()) selected.push_back(&s);
  }
  std::vector<SuiteResult> results;
  run_world(config, [&](WorkerContext& ctx) {
    std::vector<SuiteResult> mine;
    for (const auto* s : selected) mine.push_back(run_suite_collective(ctx, *s, options));
    if (config.transport == TransportKind::Tcp || ctx.rank() == 0) results = std::move(mine);
  });
  return results;
}

}  // namespace hptmt::app
