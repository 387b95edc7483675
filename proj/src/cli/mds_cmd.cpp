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

#include "app_internal.hpp"
#include "hptmt/app.hpp"
#include "hptmt/csv.hpp"
#include "hptmt/mds.hpp"

namespace hptmt::app {

MdsOutcome run_mds_command(const RunConfig& config, const MdsCommand& command) {
  if (command.dims < 1) throw InvalidArgument("--dims must be >= 1");
  if (command.iters < 1) throw InvalidArgument("--iters must be >= 1");
  if (!(command.tol >= 0)) throw InvalidArgument("--tol must be >= 0");
  const Schema schema = csv::parse_schema_spec(command.schema);
  std::vector<std::string> features = command.features;
  if (features.empty()) {
    for (const auto& f : schema.fields()) {
      if (is_numeric(f.type)) features.push_back(f.name);
    }
  }
  if (features.empty()) throw InvalidArgument("the schema has no numeric column to embed");
  // Every rank parses the file and keeps its balanced share of the rows.
  const Table all = csv::read_csv(command.input, schema);

  MdsOutcome outcome;
  run_world(config, [&](WorkerContext& ctx) {
    const auto range = mds::owned_rows(all.num_rows(), ctx.world_size(), ctx.rank());
    mds::MdsOptions options;
    options.dims = command.dims;
    options.max_iters = command.iters;
    options.tolerance = command.tol;
    const auto result = mds::run_mds(ctx, slice(all, range.lo, range.size()), features, options);
    if (config.transport != TransportKind::Tcp && ctx.rank() != 0) return;

    std::vector<Field> fields{{"point", DataType::Int64}};
    for (std::size_t d = 0; d < result.embedding.dims; ++d) fields.push_back({"x" + std::to_string(d), DataType::Float64});
    TableBuilder out(Schema(fields), result.embedding.n);
    for (std::size_t i = 0; i < result.embedding.n; ++i) {
      out.column(0).append_int64(static_cast<std::int64_t>(i));
      for (std::size_t d = 0; d < result.embedding.dims; ++d) {
        out.column(d + 1).append_float64(result.embedding.coords[i * result.embedding.dims + d]);
      }
    }
    out.commit_rows(result.embedding.n);
    outcome.embedding_csv = csv::format_csv(out.finish());
    outcome.stress_history = result.stress_history;
  });
  return outcome;
}

}  // namespace hptmt::app
