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

// Row-parallel numeric kernels. Each kernel computes every output row with a
// fixed, row-local summation order, so the OpenMP version is bit-identical to
// the serial one for any thread count. The serial versions are kept as the
// reference for tests and benchmarks.

#include <cstddef>
#include <cstdint>
#include <span>

#include "hptmt/columnar.hpp"

namespace hptmt::kernels {

/// Dense row-major matrix view.
struct MatrixView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  const double* row(std::size_t i) const { return values.data() + i * cols; }
};

/// FNV-1a of every encoded key.
void key_hashes(const EncodedKeys& keys, std::span<std::uint64_t> out, int threads);
/// hash mod world_size for every encoded key.
void partition_destinations(const EncodedKeys& keys, int world_size, std::span<std::uint32_t> out, int threads);

/// out[(i - lo) * n + j] = ||points[i] - points[j]|| for i in [lo, hi).
void distance_rows(const MatrixView& points, std::size_t lo, std::size_t hi, std::span<double> out, int threads);

/// One Guttman transform for rows [lo, hi): `delta` holds those rows of the
/// target distances ((hi - lo) x n), `x` the full current embedding (n x d).
/// Writes (hi - lo) x d values. Returns false if any output is non-finite.
bool guttman_rows(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                  std::span<double> out, int threads);

/// out[i - lo] = sum over j > i of (delta_ij - d_ij(x))^2, j ascending.
void row_stress(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                std::span<double> out, int threads);

namespace serial {

void key_hashes(const EncodedKeys& keys, std::span<std::uint64_t> out);
void partition_destinations(const EncodedKeys& keys, int world_size, std::span<std::uint32_t> out);
void distance_rows(const MatrixView& points, std::size_t lo, std::size_t hi, std::span<double> out);
bool guttman_rows(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                  std::span<double> out);
void row_stress(std::span<const double> delta, const MatrixView& x, std::size_t lo, std::size_t hi,
                std::span<double> out);

}  // namespace serial

}  // namespace hptmt::kernels
