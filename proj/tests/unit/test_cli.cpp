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
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun hptmt_cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + HPTMT_BINARY + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hptmt-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string file(const std::string& name, const std::string& contents = {}) {
    const auto p = dir_ / name;
    if (!contents.empty()) std::ofstream(p, std::ios::binary) << contents;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(Cli, VerifyDegenerateWorld) {
  const auto out = file("verify.json");
  const auto r = hptmt_cli("--workers 1 --out " + out + " verify");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto report = json::parse(slurp(out));
  EXPECT_TRUE(report["passed"].get<bool>());
  EXPECT_EQ(report["suites"].size(), 8u);
}

TEST_F(Cli, VerifyOneSuiteAtFourWorkers) {
  const auto r = hptmt_cli("--workers 4 verify --suite shuffle --suite mds");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("shuffle"), std::string::npos);
  EXPECT_EQ(r.out.find("relational"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(hptmt_cli("").code, 2);
  EXPECT_EQ(hptmt_cli("--bogus verify").code, 2);
  EXPECT_EQ(hptmt_cli("--workers 0 verify").code, 2);
  EXPECT_EQ(hptmt_cli("--transport udp verify").code, 2);
  EXPECT_EQ(hptmt_cli("--transport tcp verify").code, 2);
  EXPECT_EQ(hptmt_cli("verify --suite nope").code, 2);
  EXPECT_EQ(hptmt_cli("bench teleport").code, 2);
  EXPECT_EQ(hptmt_cli("--rows-per-worker 0 bench join").code, 2);
  EXPECT_EQ(hptmt_cli("csvcheck x.csv --schema x:int").code, 2);
  EXPECT_EQ(hptmt_cli("mds " + file("p.csv", "p\n1\n") + " --schema p:f64 --iters 0").code, 2);
}

TEST_F(Cli, CsvCheck) {
  const auto good = file("good.csv", "a,b\n1,\"x,y\"\n,\n");
  const auto copy = file("copy.csv");
  auto r = hptmt_cli("--out " + copy + " csvcheck " + good + " --schema a:i64,b:str");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(slurp(copy), "a,b\n1,\"x,y\"\n,\n");
  r = hptmt_cli("csvcheck " + file("bad.csv", "a\n1\nx\n") + " --schema a:i64");
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, RuntimeErrorsExitThree) {
  EXPECT_EQ(hptmt_cli("mds " + (dir_ / "missing.csv").string() + " --schema p:f64").code, 3);
  EXPECT_EQ(hptmt_cli("mds " + file("bad.csv", "p\n1\nzz\n") + " --schema p:f64").code, 3);
  // Rank 0 of a two-rank mesh whose peer never shows up.
  const auto peers = file("peers.txt", "127.0.0.1:" + std::to_string(hptmt::testing::free_port()) + "\n127.0.0.1:" +
                                           std::to_string(hptmt::testing::free_port()) + "\n");
  EXPECT_EQ(hptmt_cli("--workers 2 --transport tcp --peers " + peers + " --rank 0 verify --suite collectives",
                      "HPTMT_CONNECT_TIMEOUT_SECS=1")
                .code,
            3);
}

TEST_F(Cli, MdsHistoryAndEmbedding) {
  const auto input = file("col.csv", "p\n0\n1\n2\n");
  const auto hist = file("h.csv");
  auto r = hptmt_cli("mds " + input + " --schema p:f64 --iters 1 --history " + hist);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["stress_history"].size(), 1u);
  const auto h = slurp(hist);
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 2);

  r = hptmt_cli("--seed 0 mds " + input + " --schema p:f64 --dims 1 --iters 200 --tol 0");
  ASSERT_EQ(r.code, 0);
  const auto history = json::parse(r.out)["stress_history"].get<std::vector<double>>();
  for (std::size_t i = 1; i < history.size(); ++i) EXPECT_LT(history[i], history[i - 1]);
  EXPECT_LT(history.back(), 1e-6);
}

TEST_F(Cli, MdsEmbeddingIndependentOfWorldSize) {
  std::string csv = "a,b,c\n";
  for (int i = 0; i < 13; ++i) csv += std::to_string(i % 5) + "," + std::to_string(i * i % 7) + "," + std::to_string(i) + ".5\n";
  const auto input = file("pts.csv", csv);
  const auto e1 = file("e1.csv"), e4 = file("e4.csv");
  ASSERT_EQ(hptmt_cli("--workers 1 --out " + e1 + " mds " + input + " --schema a:i64,b:i64,c:f64 --iters 30").code, 0);
  ASSERT_EQ(hptmt_cli("--workers 4 --out " + e4 + " mds " + input + " --schema a:i64,b:i64,c:f64 --iters 30").code, 0);
  EXPECT_FALSE(slurp(e1).empty());
  EXPECT_EQ(slurp(e1), slurp(e4));
  EXPECT_EQ(slurp(e1).substr(0, 9), "point,x0,");
}

TEST_F(Cli, BenchReportShapeAndDeterminism) {
  auto r = hptmt_cli("--workers 2 --rows-per-worker 1000 bench join");
  ASSERT_EQ(r.code, 0);
  const auto a = json::parse(r.out);
  for (const char* phase : {"partition", "exchange", "local"}) EXPECT_TRUE(a["phase_times_ms"].contains(phase));
  EXPECT_GT(a["total_ms"].get<double>(), 0.0);
  EXPECT_EQ(a["operator"], "join");
  EXPECT_EQ(a["workers"], 2);
  EXPECT_TRUE(a["spot_check_passed"].get<bool>());
  const auto b = json::parse(hptmt_cli("--workers 2 --rows-per-worker 1000 bench join").out);
  EXPECT_EQ(a["result_rows"], b["result_rows"]);
}

TEST_F(Cli, BenchRowCountsIndependentOfWorldSize) {
  for (const char* op : {"join", "shuffle", "sort", "allreduce", "groupby"}) {
    const auto one = json::parse(hptmt_cli(std::string("--workers 1 --rows-per-worker 4000 bench ") + op).out);
    const auto four = json::parse(hptmt_cli(std::string("--workers 4 --rows-per-worker 1000 bench ") + op).out);
    EXPECT_EQ(one["result_rows"], four["result_rows"]) << op;
    EXPECT_TRUE(four["spot_check_passed"].get<bool>()) << op;
  }
}

TEST_F(Cli, VerifyOverTcpMatchesInproc) {
  const int world = 3;
  const auto addresses = hptmt::testing::localhost_addresses(world);
  std::string peers;
  for (const auto& a : addresses) peers += a + "\n";
  const auto peers_file = file("peers.txt", peers);
  const std::string common = "--workers 3 --seed 7 ";
  const std::string suites = " verify --suite collectives --suite shuffle --suite dist-ops";
  std::vector<CliRun> runs(world);
  std::vector<std::thread> ranks;
  for (int r = 0; r < world; ++r) {
    ranks.emplace_back([&, r] {
      runs[r] = hptmt_cli(common + "--transport tcp --peers " + peers_file + " --rank " + std::to_string(r) +
                          " --out " + file("tcp" + std::to_string(r) + ".json") + suites);
    });
  }
  for (auto& t : ranks) t.join();
  for (const auto& run : runs) EXPECT_EQ(run.code, 0);
  ASSERT_EQ(hptmt_cli(common + "--out " + file("inproc.json") + suites).code, 0);
  const auto inproc = json::parse(slurp(dir_ / "inproc.json"));
  const auto tcp = json::parse(slurp(dir_ / "tcp0.json"));
  EXPECT_EQ(tcp["suites"], inproc["suites"]);
  EXPECT_EQ(tcp["transport"], "tcp");
}

}  // namespace
