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

#include "hptmt/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <vector>

namespace hptmt::kernels {
namespace {

inline double distance(const double* a, const double* b, std::size_t dims) {
  double s = 0.0;
  for (std::size_t k = 0; k < dims; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return std::sqrt(s);
}

void check_sizes(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                 std::size_t out_size, std::size_t out_width) {
  if (lo > hi || hi > x.rows) throw InvalidArgument("row range outside the embedding");
  if (delta.size() != (hi - lo) * x.rows) throw InvalidArgument("distance block has the wrong size");
  if (out_size != (hi - lo) * out_width) throw InvalidArgument("output has the wrong size");
}

// Row kernels shared by the serial and OpenMP drivers.

inline void distance_row(const MatrixView& p, std::size_t i, double* out) {
  for (std::size_t j = 0; j < p.rows; ++j) out[j] = i == j ? 0.0 : distance(p.row(i), p.row(j), p.cols);
}

inline bool guttman_row(const double* delta, const MatrixView& x, std::size_t i, double* b, double* out) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  double diag = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      b[j] = 0.0;
      continue;
    }
    const double dij = distance(x.row(i), x.row(j), d);
    b[j] = dij > 0.0 ? -delta[j] / dij : 0.0;
    diag -= b[j];
  }
  b[i] = diag;
  bool finite = true;
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += b[j] * x.row(j)[k];
    out[k] = s / static_cast<double>(n);
    finite = finite && std::isfinite(out[k]);
  }
  return finite;
}

inline double stress_row(const double* delta, const MatrixView& x, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = i + 1; j < x.rows; ++j) {
    const double r = delta[j] - distance(x.row(i), x.row(j), x.cols);
    s += r * r;
  }
  return s;
}

int clamp_threads(int threads) { return threads < 1 ? 1 : threads; }

}  // namespace

// ---------------------------------------------------------------------------
// Serial reference

namespace serial {

void key_hashes(const EncodedKeys& keys, std::span<std::uint64_t> out) {
  if (out.size() != keys.size()) throw InvalidArgument("key_hashes: output size");
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = fnv1a64(keys.key(i));
}

void partition_destinations(const EncodedKeys& keys, int world_size, std::span<std::uint32_t> out) {
  if (out.size() != keys.size()) throw InvalidArgument("partition_destinations: output size");
  const auto w = static_cast<std::uint64_t>(world_size);
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = static_cast<std::uint32_t>(fnv1a64(keys.key(i)) % w);
}

void distance_rows(const MatrixView& points, std::size_t lo, std::size_t hi, std::span<double> out) {
  if (lo > hi || hi > points.rows || out.size() != (hi - lo) * points.rows) {
    throw InvalidArgument("distance_rows: bad range or output size");
  }
  for (std::size_t i = lo; i < hi; ++i) distance_row(points, i, out.data() + (i - lo) * points.rows);
}

bool guttman_rows(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                  std::span<double> out) {
  check_sizes(delta, x, lo, hi, out.size(), x.cols);
  std::vector<double> b(x.rows);
  bool finite = true;
  for (std::size_t i = lo; i < hi; ++i) {
    finite &= guttman_row(delta.data() + (i - lo) * x.rows, x, i, b.data(), out.data() + (i - lo) * x.cols);
  }
  return finite;
}

void row_stress(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                std::span<double> out) {
  check_sizes(delta, x, lo, hi, out.size(), 1);
  for (std::size_t i = lo; i < hi; ++i) out[i - lo] = stress_row(delta.data() + (i - lo) * x.rows, x, i);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP

void key_hashes(const EncodedKeys& keys, std::span<std::uint64_t> out, int threads) {
  if (out.size() != keys.size()) throw InvalidArgument("key_hashes: output size");
  const auto n = static_cast<std::int64_t>(keys.size());
#pragma omp parallel for num_threads(clamp_threads(threads)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = fnv1a64(keys.key(i));
}

void partition_destinations(const EncodedKeys& keys, int world_size, std::span<std::uint32_t> out, int threads) {
  if (out.size() != keys.size()) throw InvalidArgument("partition_destinations: output size");
  const auto w = static_cast<std::uint64_t>(world_size);
  const auto n = static_cast<std::int64_t>(keys.size());
#pragma omp parallel for num_threads(clamp_threads(threads)) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = static_cast<std::uint32_t>(fnv1a64(keys.key(i)) % w);
}

void distance_rows(const MatrixView& points, std::size_t lo, std::size_t hi, std::span<double> out, int threads) {
  if (lo > hi || hi > points.rows || out.size() != (hi - lo) * points.rows) {
    throw InvalidArgument("distance_rows: bad range or output size");
  }
  const auto begin = static_cast<std::int64_t>(lo);
  const auto end = static_cast<std::int64_t>(hi);
#pragma omp parallel for num_threads(clamp_threads(threads)) schedule(static)
  for (std::int64_t i = begin; i < end; ++i) distance_row(points, i, out.data() + (i - begin) * points.rows);
}

bool guttman_rows(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                  std::span<double> out, int threads) {
  check_sizes(delta, x, lo, hi, out.size(), x.cols);
  const auto begin = static_cast<std::int64_t>(lo);
  const auto end = static_cast<std::int64_t>(hi);
  bool finite = true;
#pragma omp parallel num_threads(clamp_threads(threads)) reduction(&& : finite)
  {
    std::vector<double> b(x.rows);
#pragma omp for schedule(static)
    for (std::int64_t i = begin; i < end; ++i) {
      const bool ok = guttman_row(delta.data() + (i - begin) * x.rows, x, i, b.data(),
                                  out.data() + (i - begin) * x.cols);
      finite = finite && ok;
    }
  }
  return finite;
}

void row_stress(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                std::span<double> out, int threads) {
  check_sizes(delta, x, lo, hi, out.size(), 1);
  const auto begin = static_cast<std::int64_t>(lo);
  const auto end = static_cast<std::int64_t>(hi);
#pragma omp parallel for num_threads(clamp_threads(threads)) schedule(static)
  for (std::int64_t i = begin; i < end; ++i) out[i - begin] = stress_row(delta.data() + (i - begin) * x.rows, x, i);
}

}  // namespace hptmt::kernels
