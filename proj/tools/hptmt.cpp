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

// hptmt: verify | bench | mds | csvcheck.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error,
// 3 runtime or transport error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <new>

#include "CLI11.hpp"
#include "hptmt/app.hpp"
#include "hptmt/csv.hpp"
#include "json.hpp"

namespace {

using namespace hptmt;

constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void check_config(const app::RunConfig& config) {
  if (config.workers < 1) throw UsageError("--workers must be >= 1");
  if (config.memory_budget == 0) throw UsageError("--memory-budget must be > 0");
  if (config.transport == TransportKind::Tcp) {
    if (config.peers_file.empty()) throw UsageError("--transport tcp needs --peers");
    if (config.rank < 0 || config.rank >= config.workers) throw UsageError("--rank must be in [0, workers)");
  }
}

bool writes_output(const app::RunConfig& config) {
  return config.transport == TransportKind::InProc || config.rank == 0;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_verify(const app::RunConfig& config, const std::vector<std::string>& only) {
  const auto results = app::run_verify(config, app::SuiteOptions{.seed = config.seed}, only);
  bool all = true;
  nlohmann::ordered_json report;
  report["transport"] = config.transport == TransportKind::Tcp ? "tcp" : "inproc";
  report["workers"] = config.workers;
  report["seed"] = config.seed;
  report["suites"] = nlohmann::ordered_json::array();
  std::printf("%-18s %-6s %-16s %9s\n", "suite", "result", "digest", "seconds");
  for (const auto& r : results) {
    all = all && r.passed;
    std::printf("%-18s %-6s %-16s %9.2f\n", r.name.c_str(), r.passed ? "pass" : "FAIL", hex(r.digest).c_str(),
                r.seconds);
    if (!r.passed) std::printf("  %s\n", r.detail.c_str());
    report["suites"].push_back({{"name", r.name}, {"passed", r.passed}, {"digest", hex(r.digest)}});
  }
  report["passed"] = all;
  if (!all) {
    std::string failing;
    for (const auto& r : results) {
      if (!r.passed) failing += (failing.empty() ? "" : ", ") + r.name;
    }
    std::fprintf(stderr, "verify failed: %s\n", failing.c_str());
  }
  if (!config.out.empty() && writes_output(config)) write_text(config.out, report.dump(2) + "\n");
  return all ? kOk : kVerifyFailed;
}

int cmd_bench(const app::RunConfig& config, const std::string& op_name) {
  const auto op = app::parse_bench_op(op_name);
  const auto report = app::run_bench(config, op);
  const std::string json = report.to_json();
  std::printf("%s\n", json.c_str());
  if (!config.out.empty() && writes_output(config)) write_text(config.out, json + "\n");
  return report.spot_check_passed ? kOk : kVerifyFailed;
}

int cmd_mds(const app::RunConfig& config, const app::MdsCommand& command) {
  const auto outcome = app::run_mds_command(config, command);
  nlohmann::ordered_json report;
  report["dims"] = command.dims;
  report["iterations"] = outcome.stress_history.size();
  report["final_stress"] = outcome.stress_history.empty() ? 0.0 : outcome.stress_history.back();
  report["stress_history"] = outcome.stress_history;
  std::printf("%s\n", report.dump(2).c_str());
  if (writes_output(config)) {
    if (!config.out.empty()) write_text(config.out, outcome.embedding_csv);
    if (!command.history_out.empty()) {
      std::string text = "iteration,stress\n";
      for (std::size_t i = 0; i < outcome.stress_history.size(); ++i) {
        text += std::to_string(i + 1) + "," + csv::format_float(outcome.stress_history[i]) + "\n";
      }
      write_text(command.history_out, text);
    }
  }
  return kOk;
}

int cmd_csvcheck(const app::RunConfig& config, const std::filesystem::path& input, const std::string& spec) {
  const Schema schema = csv::parse_schema_spec(spec);
  Table table;
  try {
    table = csv::read_csv(input, schema);
  } catch (const csv::CsvError& e) {
    std::fprintf(stderr, "%s: %s\n", input.string().c_str(), e.what());
    return kVerifyFailed;
  }
  std::printf("%zu rows, schema %s\n", table.num_rows(), csv::schema_spec(schema).c_str());
  if (!config.out.empty()) csv::write_csv(table, config.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Distributed table operators and array collectives"};
  cli.require_subcommand(1);
  cli.fallthrough();

  app::RunConfig config;
  const std::map<std::string, TransportKind> transports{{"inproc", TransportKind::InProc},
                                                        {"tcp", TransportKind::Tcp}};
  cli.add_option("--workers", config.workers, "Number of ranks")->capture_default_str();
  cli.add_option("--transport", config.transport, "inproc or tcp")
      ->transform(CLI::CheckedTransformer(transports, CLI::ignore_case));
  cli.add_option("--peers", config.peers_file, "tcp: one host:port per line, line index = rank");
  cli.add_option("--rank", config.rank, "tcp: this process's rank");
  cli.add_option("--memory-budget", config.memory_budget, "Bytes of table data per worker (e.g. 16MiB)")
      ->transform(CLI::AsSizeValue(false))
      ->capture_default_str();
  cli.add_option("--spill-dir", config.spill_dir, "Directory for external-sort runs");
  cli.add_option("--seed", config.seed, "Seed for generated data")->capture_default_str();
  cli.add_option("--rows-per-worker", config.rows_per_worker, "Generated rows per worker (bench)")
      ->capture_default_str();
  cli.add_option("--out", config.out, "Output path");

  std::vector<std::string> suites;
  auto* verify = cli.add_subcommand("verify", "Run the oracle-equivalence and invariant suites");
  verify->add_option("--suite", suites, "Run only these suites (repeatable)");

  std::string bench_op;
  auto* bench = cli.add_subcommand("bench", "Time one distributed operator on generated tables");
  bench->add_option("operator", bench_op, "join | shuffle | sort | allreduce | groupby")->required();

  app::MdsCommand mds;
  std::string mds_schema;
  auto* mds_cmd = cli.add_subcommand("mds", "Embed the points of a CSV file with SMACOF");
  mds_cmd->add_option("input", mds.input, "CSV file")->required();
  mds_cmd->add_option("--schema", mds.schema, "name:type,...")->required();
  mds_cmd->add_option("--features", mds.features, "Feature columns (default: every numeric column)")
      ->delimiter(',');
  mds_cmd->add_option("--dims", mds.dims, "Embedding dimension")->capture_default_str();
  mds_cmd->add_option("--iters", mds.iters, "Maximum iterations")->capture_default_str();
  mds_cmd->add_option("--tol", mds.tol, "Relative stress decrease that stops the loop")->capture_default_str();
  mds_cmd->add_option("--history", mds.history_out, "Write the stress history as CSV");

  std::filesystem::path check_input;
  std::string check_schema;
  auto* csvcheck = cli.add_subcommand("csvcheck", "Parse a CSV file against a schema");
  csvcheck->add_option("input", check_input, "CSV file")->required();
  csvcheck->add_option("--schema", check_schema, "name:type,...")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    check_config(config);
    if (*verify) return cmd_verify(config, suites);
    if (*bench) return cmd_bench(config, bench_op);
    if (*mds_cmd) return cmd_mds(config, mds);
    if (*csvcheck) return cmd_csvcheck(config, check_input, check_schema);
  } catch (const csv::CsvError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kUsage;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "error: out of memory\n");
    return kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
