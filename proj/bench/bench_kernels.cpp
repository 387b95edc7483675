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

// Serial vs OpenMP numeric kernels, plus the local operators they feed.

#include <benchmark/benchmark.h>

#include <random>
#include <thread>
#include <vector>

#include "hptmt/kernels.hpp"
#include "hptmt/relational.hpp"

namespace {

using namespace hptmt;

struct MdsInput {
  std::size_t n;
  std::vector<double> points;
  std::vector<double> x;
  std::vector<double> delta;
};

const MdsInput& mds_input(std::size_t n) {
  static std::vector<std::unique_ptr<MdsInput>> cache;
  for (const auto& c : cache) {
    if (c->n == n) return *c;
  }
  auto in = std::make_unique<MdsInput>();
  in->n = n;
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  in->points.resize(n * 3);
  in->x.resize(n * 2);
  for (auto& v : in->points) v = u(rng);
  for (auto& v : in->x) v = u(rng);
  in->delta.resize(n * n);
  kernels::serial::distance_rows({in->points, n, 3}, 0, n, in->delta);
  cache.push_back(std::move(in));
  return *cache.back();
}

int max_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void BM_GuttmanSerial(benchmark::State& state) {
  const auto& in = mds_input(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(in.n * 2);
  for (auto _ : state) {
    kernels::serial::guttman_rows(in.delta, {in.x, in.n, 2}, 0, in.n, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.n * in.n));
}

void BM_GuttmanOpenMP(benchmark::State& state) {
  const auto& in = mds_input(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(in.n * 2);
  for (auto _ : state) {
    kernels::guttman_rows(in.delta, {in.x, in.n, 2}, 0, in.n, out, max_threads());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.n * in.n));
}

void BM_DistanceSerial(benchmark::State& state) {
  const auto& in = mds_input(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(in.n * in.n);
  for (auto _ : state) {
    kernels::serial::distance_rows({in.points, in.n, 3}, 0, in.n, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_DistanceOpenMP(benchmark::State& state) {
  const auto& in = mds_input(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(in.n * in.n);
  for (auto _ : state) {
    kernels::distance_rows({in.points, in.n, 3}, 0, in.n, out, max_threads());
    benchmark::DoNotOptimize(out.data());
  }
}

Table int_table(std::size_t rows, std::uint64_t seed, std::int64_t range) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> u(0, range - 1);
  ColumnBuilder k(DataType::Int64, rows), v(DataType::Int64, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    k.append_int64(u(rng));
    v.append_int64(static_cast<std::int64_t>(i));
  }
  return Table(Schema({{"key", DataType::Int64}, {"value", DataType::Int64}}),
               std::vector<ColumnArray>{k.finish(), v.finish()});
}

void BM_PartitionSerial(benchmark::State& state) {
  const auto t = int_table(static_cast<std::size_t>(state.range(0)), 1, 1 << 30);
  const std::vector<std::size_t> cols{0};
  const auto keys = encode_keys(t, cols);
  std::vector<std::uint32_t> out(keys.size());
  for (auto _ : state) {
    kernels::serial::partition_destinations(keys, 8, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PartitionOpenMP(benchmark::State& state) {
  const auto t = int_table(static_cast<std::size_t>(state.range(0)), 1, 1 << 30);
  const std::vector<std::size_t> cols{0};
  const auto keys = encode_keys(t, cols);
  std::vector<std::uint32_t> out(keys.size());
  for (auto _ : state) {
    kernels::partition_destinations(keys, 8, out, max_threads());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LocalJoin(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto a = int_table(rows, 2, static_cast<std::int64_t>(rows * 2));
  const auto b = int_table(rows, 3, static_cast<std::int64_t>(rows * 2));
  const rel::JoinSpec spec{rel::JoinType::Inner, {"key"}, {"key"}};
  for (auto _ : state) benchmark::DoNotOptimize(rel::join(a, b, spec).num_rows());
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}

void BM_LocalSort(benchmark::State& state) {
  const auto t = int_table(static_cast<std::size_t>(state.range(0)), 4, 1 << 30);
  const rel::SortSpec spec{{{"key"}}};
  for (auto _ : state) benchmark::DoNotOptimize(rel::sort(t, spec).num_rows());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_GuttmanSerial)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GuttmanOpenMP)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceOpenMP)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PartitionSerial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PartitionOpenMP)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LocalJoin)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LocalSort)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
