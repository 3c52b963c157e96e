// Copyright 2026 The fbmine Authors.
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
#include <signal.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fbmine/fbmine.hpp"
#include "httplib.h"
#include "test_support.hpp"

namespace fbmine {
namespace {

using testing::data_path;
using testing::TempDir;

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI inside `dir` with FF_* variables cleared; stderr goes to dir/stderr.txt.
RunResult run(const std::filesystem::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && env -u FF_API_KEY -u FF_CACHE_DIR -u FF_CONCURRENCY '" +
                          std::string(FBMINE_CLI_PATH) + "' " + args + " 2>stderr.txt";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string data(const std::string& name) { return "'" + data_path(name).string() + "'"; }

TEST(CliTest, VersionAndUsage) {
  TempDir dir;
  EXPECT_EQ(run(dir.path(), "--version").code, 0);
  EXPECT_EQ(run(dir.path(), "").code, 2);
  EXPECT_EQ(run(dir.path(), "frobnicate").code, 2);
}

TEST(CliTest, IngestFixture) {
  TempDir dir;
  const auto r = run(dir.path(), "ingest --input " + data("lmsys_raw_sample.jsonl") + " --format lmsys_raw --out c.jsonl");
  ASSERT_EQ(r.code, 0);
  const json stats = json::parse(r.out);
  EXPECT_EQ(stats["accepted"], 2);
  EXPECT_EQ(stats["dropped_turns"]["system_turn_dropped"], 1);
  EXPECT_EQ(read_corpus(dir.path() / "c.jsonl").size(), 2u);
  const json meta = json::parse(slurp(dir.path() / "c.jsonl.meta.json"));
  EXPECT_EQ(meta["command"], "ingest");
  EXPECT_EQ(meta["seed"], 42);
  EXPECT_TRUE(meta.contains("config_hash"));
}

TEST(CliTest, IngestBadFormatIsUsageError) {
  TempDir dir;
  EXPECT_EQ(run(dir.path(), "ingest --input " + data("lmsys_raw_sample.jsonl") + " --format xml --out c.jsonl").code, 2);
  EXPECT_EQ(run(dir.path(), "ingest --input missing.jsonl --out c.jsonl").code, 2);
}

TEST(CliTest, RuleDetectIsDeterministic) {
  TempDir dir;
  const std::string in = data("pipeline_50.jsonl");
  ASSERT_EQ(run(dir.path(), "detect --input " + in + " --detector rule --out a.jsonl").code, 0);
  ASSERT_EQ(run(dir.path(), "detect --input " + in + " --detector rule --out b.jsonl").code, 0);
  EXPECT_EQ(slurp(dir.path() / "a.jsonl"), slurp(dir.path() / "b.jsonl"));
  EXPECT_FALSE(slurp(dir.path() / "a.jsonl").empty());
  // Conversations with a single user turn are recorded, not failed.
  std::istringstream skips(slurp(dir.path() / "a.jsonl.skips.jsonl"));
  for (std::string line; std::getline(skips, line);) EXPECT_EQ(json::parse(line)["stage"], "eligibility");
}

TEST(CliTest, LlmDetectWithoutKeyIsConfigError) {
  TempDir dir;
  const std::string in = data("pipeline_50.jsonl");
  EXPECT_EQ(run(dir.path(), "--set judge.base_url=http://127.0.0.1:9 detect --input " + in +
                                " --detector llm --out l.jsonl")
                .code,
            2);
  EXPECT_EQ(run(dir.path(), "detect --input " + in + " --detector llm --out l.jsonl").code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "l.jsonl"));
}

TEST(CliTest, DenseDetectOnSingleTurnSkipsAll) {
  TempDir dir;
  std::string corpus;
  for (int i = 0; i < 3; ++i) corpus += dump_line(to_json(testing::make_conv_n("s" + std::to_string(i), 1)));
  write_file(dir.path() / "one.jsonl", corpus);
  const auto r = run(dir.path(), "--set judge.base_url=mock://fixed detect --input one.jsonl --mode dense "
                                 "--detector llm --out l.jsonl");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir.path() / "l.jsonl"), "");
  std::istringstream skips(slurp(dir.path() / "l.jsonl.skips.jsonl"));
  std::size_t n = 0;
  for (std::string line; std::getline(skips, line);) ++n;
  EXPECT_EQ(n, 3u);
}

TEST(CliTest, EvalDetect) {
  TempDir dir;
  const std::string gold = data("dense_gold_lmsys.labels.jsonl");
  const auto r = run(dir.path(), "eval-detect --gold " + gold + " --pred " + gold + " --label-set fine --out rep.json");
  ASSERT_EQ(r.code, 0);
  const json rep = json::parse(slurp(dir.path() / "rep.json"));
  EXPECT_DOUBLE_EQ(rep["accuracy"].get<double>(), 100.0);

  write_file(dir.path() / "other.jsonl",
             to_line(LabelVector::for_conversation(testing::make_conv_n("zz", 2), {FineLabel::kPos},
                                                   LabelOrigin::kRule)));
  EXPECT_EQ(run(dir.path(), "eval-detect --gold " + gold + " --pred other.jsonl").code, 1);
}

TEST(CliTest, AnalyzeTurnsReproducesFixtureRow) {
  TempDir dir;
  const auto r = run(dir.path(), "analyze turns --labels " + data("dense_gold_lmsys.labels.jsonl"));
  ASSERT_EQ(r.code, 0);
  const json h = json::parse(r.out);
  const std::vector<std::pair<int, int>> expected = {{43, 74}, {26, 32}, {13, 17}, {24, 25}};
  ASSERT_EQ(h["buckets"].size(), 4u);
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_EQ(h["buckets"][b]["feedback"], expected[b].first);
    EXPECT_EQ(h["buckets"][b]["annotated"], expected[b].second);
  }
}

TEST(CliTest, ToxicityConstantScorerFlattensGroups) {
  TempDir dir;
  const auto r = run(dir.path(), "analyze toxicity --input " + data("pipeline_50.jsonl") +
                                     " --scorer constant --constant 0.3 --k 4 --raw-csv raw.csv");
  ASSERT_EQ(r.code, 0);
  const json body = json::parse(r.out);
  for (const char* g : {"neg", "pos", "rand"}) {
    EXPECT_EQ(body[g]["sampled"], 4) << g;
    EXPECT_DOUBLE_EQ(body[g]["scores"]["mean"].get<double>(), 0.3) << g;
    EXPECT_DOUBLE_EQ(body[g]["scores"]["p90"].get<double>(), 0.3) << g;
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "raw.csv"));
}

TEST(CliTest, ToxicityKZeroGivesEmptyGroups) {
  TempDir dir;
  const auto r = run(dir.path(), "analyze toxicity --input " + data("pipeline_50.jsonl") + " --scorer constant --k 0");
  ASSERT_EQ(r.code, 0);
  const json body = json::parse(r.out);
  for (const char* g : {"neg", "pos", "rand"}) {
    EXPECT_EQ(body[g]["sampled"], 0);
    EXPECT_TRUE(body[g]["scores"]["mean"].is_null());
  }
}

TEST(CliTest, BuildPipeline) {
  TempDir dir;
  const std::string in = data("pipeline_50.jsonl");
  auto r = run(dir.path(), "build splits --input " + in + " --out s1.jsonl");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "neg 20\npos 13\nrand 43\n");
  ASSERT_EQ(run(dir.path(), "build splits --input " + in + " --out s2.jsonl").code, 0);
  EXPECT_EQ(slurp(dir.path() / "s1.jsonl"), slurp(dir.path() / "s2.jsonl"));
  ASSERT_EQ(run(dir.path(), "--seed 7 build splits --input " + in + " --out s3.jsonl").code, 0);
  EXPECT_NE(slurp(dir.path() / "s1.jsonl"), slurp(dir.path() / "s3.jsonl"));

  ASSERT_EQ(run(dir.path(), "--set generator.base_url=mock://echo build regen --splits s1.jsonl --out r.jsonl").code, 0);
  std::istringstream regen(slurp(dir.path() / "r.jsonl"));
  std::size_t rows = 0;
  for (std::string line; std::getline(regen, line); ++rows) {
    const json row = json::parse(line);
    EXPECT_EQ(row["m_scra"], row["u_i"]);
  }
  EXPECT_EQ(rows, 76u);

  ASSERT_EQ(run(dir.path(), "build export-sft --regen r.jsonl --out sft.jsonl").code, 0);
  std::istringstream sft(slurp(dir.path() / "sft.jsonl"));
  for (std::string line; std::getline(sft, line);) {
    const json row = json::parse(line);
    ASSERT_EQ(row["messages"].size(), 2u);
    EXPECT_EQ(row["messages"][0]["role"], "user");
    EXPECT_EQ(row["messages"][1]["role"], "assistant");
  }
  ASSERT_EQ(run(dir.path(), "build export-kto --splits s1.jsonl --out kto.jsonl").code, 0);
  std::istringstream kto(slurp(dir.path() / "kto.jsonl"));
  std::size_t good = 0, bad = 0;
  for (std::string line; std::getline(kto, line);) (json::parse(line)["label"].get<bool>() ? good : bad)++;
  EXPECT_EQ(good, 13u);
  EXPECT_EQ(bad, 20u);
}

TEST(CliTest, RegenWithoutEndpointIsConfigError) {
  TempDir dir;
  ASSERT_EQ(run(dir.path(), "build splits --input " + data("pipeline_50.jsonl") + " --out s.jsonl").code, 0);
  EXPECT_EQ(run(dir.path(), "build regen --splits s.jsonl --out r.jsonl").code, 2);
}

TEST(CliTest, WinrateWithLengthMock) {
  TempDir dir;
  ASSERT_EQ(run(dir.path(), "build splits --input " + data("pipeline_50.jsonl") + " --out s.jsonl").code, 0);
  ASSERT_EQ(run(dir.path(), "--set generator.base_url=mock://echo build regen --splits s.jsonl --out r.jsonl").code, 0);
  write_file(dir.path() / "spec.txt", "better_scratch better_semantic\nbetter_semantic better_scratch with-fb\n");
  const auto r = run(dir.path(), "--set reward.base_url=mock://length winrate --records r.jsonl --spec spec.txt "
                                 "--check-antisymmetry --out win.json");
  ASSERT_EQ(r.code, 0);
  const json rep = json::parse(slurp(dir.path() / "win.json"));
  ASSERT_EQ(rep["rows"].size(), 2u);
  // Echoed feedback prompts are longer than echoed questions.
  EXPECT_DOUBLE_EQ(rep["rows"][0]["winrate_pct"].get<double>(), 0.0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "win.json.meta.json"));
}

TEST(CliTest, ConfigFileAndEnvPrecedence) {
  TempDir dir;
  write_file(dir.path() / "run.conf", "seed = 7\nconcurrency = 2\n");
  ASSERT_EQ(run(dir.path(), "--config run.conf build splits --input " + data("pipeline_50.jsonl") + " --out s.jsonl").code,
            0);
  json meta = json::parse(slurp(dir.path() / "s.jsonl.meta.json"));
  EXPECT_EQ(meta["seed"], 7);
  EXPECT_EQ(meta["config"]["concurrency"], 2);
  ASSERT_EQ(run(dir.path(), "--config run.conf --seed 9 build splits --input " + data("pipeline_50.jsonl") +
                                " --out s.jsonl")
                .code,
            0);
  meta = json::parse(slurp(dir.path() / "s.jsonl.meta.json"));
  EXPECT_EQ(meta["seed"], 9);
  EXPECT_EQ(run(dir.path(), "--set nonsense.key=1 build splits --input " + data("pipeline_50.jsonl") +
                                " --out s.jsonl")
                .code,
            2);
}

// Starts `fbmine serve` and returns its pid; the first stdout line is stored in `banner`.
pid_t spawn_server(const std::filesystem::path& dir, const std::vector<std::string>& args, std::string& banner) {
  int fds[2];
  if (pipe(fds) != 0) return -1;
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    if (chdir(dir.c_str()) != 0) _exit(127);
    std::vector<char*> argv;
    static std::string path = FBMINE_CLI_PATH;
    argv.push_back(path.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(path.c_str(), argv.data());
    _exit(127);
  }
  close(fds[1]);
  banner.clear();
  char c;
  while (read(fds[0], &c, 1) == 1 && c != '\n') banner.push_back(c);
  close(fds[0]);
  return pid;
}

int stop_server(pid_t pid) {
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ServeHealthAndStoreDir) {
  TempDir dir;
  std::string corpus;
  corpus += dump_line(to_json(testing::make_conv_n("t1", 3)));
  write_file(dir.path() / "tasks.jsonl", corpus);
  std::string banner;
  const pid_t pid =
      spawn_server(dir.path(), {"serve", "--port", "0", "--store-dir", "st", "--import", "tasks.jsonl"}, banner);
  ASSERT_GT(pid, 0);
  const auto colon = banner.rfind(':');
  ASSERT_NE(colon, std::string::npos) << banner;
  httplib::Client client("127.0.0.1", std::stoi(banner.substr(colon + 1)));
  auto res = client.Get("/api/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");
  res = client.Get("/api/conversations");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body).size(), 1u);
  EXPECT_EQ(stop_server(pid), 0);
  EXPECT_TRUE(std::filesystem::is_directory(dir.path() / "st"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "st" / "tasks.jsonl"));
}

TEST(CliTest, ServePortConflictIsStartupError) {
  TempDir dir;
  httplib::Server blocker;
  const int port = blocker.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  const auto r = run(dir.path(), "serve --host 127.0.0.1 --port " + std::to_string(port) + " --store-dir st");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(slurp(dir.path() / "stderr.txt").find("cannot bind"), std::string::npos);
}

}  // namespace
}  // namespace fbmine
