// Copyright 2026 The trajq Authors. All rights reserved.
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

// Runs the built `trajq` binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using trajq::testing::data_path;

struct Result {
  int status = -1;
  std::string out;
};

// Runs `trajq <args>` through the shell with stderr folded into stdout.
Result run(const std::string& args, const std::string& stdin_text = "",
           const std::string& cwd = "") {
  std::string cmd = std::string(TRAJQ_CLI) + " " + args + " 2>&1";
  if (!cwd.empty()) cmd = "cd " + cwd + " && " + cmd;
  fs::path input;
  if (!stdin_text.empty()) {
    input = fs::temp_directory_path() / "trajq_cli_stdin.txt";
    std::ofstream(input) << stdin_text;
    cmd += " < " + input.string();
  }
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  if (!input.empty()) fs::remove(input);
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("trajq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(CliTest, ReorderGolden) {
  auto r = run("reorder " + data_path("fixtures/facing.conllu") + " --n 3");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, "facing you are side O O side the north house O O house of a white\n");
}

TEST_F(CliTest, ReorderEmptyAndMalformedFiles) {
  auto r = run("reorder " + write("empty.conllu", ""));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "");
  r = run("reorder " + write("bad.conllu", "1\tgo\t_\t_\t_\t_\t0\troot\t_\t_\n2\tnorth\t_\n"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
  r = run("reorder " + (dir_ / "absent.conllu").string());
  EXPECT_EQ(r.status, 2);
}

TEST_F(CliTest, MissingGameIsUsageError) {
  auto cfg = write("run.json", R"({"game": ")" + (dir_ / "nope.json").string() + R"("})");
  auto r = run("train --config " + cfg);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("game file not found"), std::string::npos) << r.out;
  EXPECT_EQ(run("play --game " + (dir_ / "nope.json").string()).status, 2);
  EXPECT_EQ(run("bogus-subcommand").status, 2);
}

TEST_F(CliTest, CorruptCheckpointRejected) {
  auto ck = write("ckpt.bin", "TQDQN1 not really");
  auto r = run("eval --checkpoint " + ck + " --game " + data_path("games/egg.json"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("checkpoint"), std::string::npos) << r.out;
}

TEST_F(CliTest, PlayTranscript) {
  auto r = run("play --game " + data_path("games/egg.json"),
               "go north\ndance\ngo north\nclimb tree\ntake the egg\n");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("Unknown action. Available actions:"), std::string::npos);
  EXPECT_NE(r.out.find("Taken. (Score: 5, Moves: 4)"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainEvalAttentionRoundTrip) {
  auto out = (dir_ / "run").string();
  auto cfg = write("run.json", R"({"game": ")" + data_path("games/egg.json") +
                                   R"(", "encoder": {"filters": 4, "embedding_dim": 8},
      "train": {"preset": "egg", "observation_steps": 200, "epsilon_decay_steps": 2000,
                "eval_period": 400, "eval_episodes": 2, "batch_size": 4}})");
  auto r = run("train --config " + cfg + " --output " + out + " --set train.total_steps=800");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"vocab.txt", "metrics.jsonl", "ckpt-400.bin", "ckpt-800.bin"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  EXPECT_FALSE(fs::exists(fs::path(out) / "metrics.jsonl.tmp"));

  auto ck = (fs::path(out) / "ckpt-800.bin").string();
  r = run("eval --checkpoint " + ck + " --game " + data_path("games/egg.json") + " --episodes 3");
  ASSERT_EQ(r.status, 0) << r.out;
  auto j = nlohmann::json::parse(r.out.substr(r.out.find('{')));
  EXPECT_EQ(j["scores"].size(), 3u);
  EXPECT_EQ(j["checkpoint_step"], 800);

  r = run("eval --checkpoint " + ck + " --game " + data_path("games/troll.json"));
  EXPECT_NE(r.status, 0);

  auto att = (dir_ / "att.jsonl").string();
  r = run("attention --checkpoint " + ck + " --game " + data_path("games/egg.json") +
          " --steps 5 --out " + att);
  ASSERT_EQ(r.status, 0) << r.out;
  std::ifstream in(att);
  std::string line;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    auto rec = nlohmann::json::parse(line);
    EXPECT_EQ(rec["step"], records);
    EXPECT_LE(rec["spans"].size(), 3u);
    EXPECT_GE(rec["spans"].size(), 1u);
    ++records;
  }
  EXPECT_GE(records, 1u);

  auto mean_out = (dir_ / "mean").string();
  r = run("train --config " + cfg + " --output " + mean_out +
          " --set train.total_steps=400 --set encoder.pooling=mean");
  ASSERT_EQ(r.status, 0) << r.out;
  r = run("attention --checkpoint " + mean_out + "/ckpt-400.bin --game " +
          data_path("games/egg.json"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("max-pooling"), std::string::npos) << r.out;
}

TEST_F(CliTest, InspectReplayDump) {
  // Run config paths are relative to the working directory.
  auto r = run("inspect-replay --config runs/egg.json --steps 50", "", TRAJQ_SOURCE_DIR);
  ASSERT_EQ(r.status, 0) << r.out;
  std::istringstream in(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_GE(j["reward"].get<double>(), -1.0);
    EXPECT_LE(j["reward"].get<double>(), 1.0);
    ++n;
  }
  EXPECT_EQ(n, 50u);
}

}  // namespace
