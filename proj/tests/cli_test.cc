/*
 * Copyright 2026 The umix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "umix/commands.hpp"

namespace umix {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "umix");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("umix_cli_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, ParseErrorsAndHelp) {
  EXPECT_EQ(run({}).code, kExitConfig);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"train", "--bogus"}).code, kExitConfig);
  EXPECT_EQ(run({"eval"}).code, kExitConfig);  // --checkpoint is required
}

TEST_F(CliTest, GenDataIsDeterministic) {
  const auto a = run({"gen-data", "--seed", "2", "--n", "6", "--out", path("a")});
  const auto b = run({"gen-data", "--seed", "2", "--n", "6", "--out", path("b")});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(slurp(path("a/dataset.bin")), slurp(path("b/dataset.bin")));
  EXPECT_EQ(slurp(path("a/manifest.txt")), slurp(path("b/manifest.txt")));
  EXPECT_NE(a.out.find("count=6"), std::string::npos);
  EXPECT_EQ(run({"gen-data", "--size", "60x64", "--out", path("c")}).code,
            kExitConfig);
}

TEST_F(CliTest, TrainThenEval) {
  ASSERT_EQ(run({"gen-data", "--n", "10", "--out", path("data")}).code, kExitOk);
  const auto t = run({"train", "--data", path("data"), "--out", path("run"),
                      "--epochs", "1", "--batch", "4"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_NE(t.out.find("epoch=1 loss="), std::string::npos);
  EXPECT_TRUE(fs::exists(path("run/checkpoint.umix")));
  EXPECT_TRUE(fs::exists(path("run/metrics.json")));
  EXPECT_NE(slurp(path("run/metrics.txt")).find("param_hash="), std::string::npos);

  const auto e = run({"eval", "--checkpoint", path("run/checkpoint.umix"),
                      "--data", path("data")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("samples=2\nmiou="), std::string::npos);
  // The training log's final validation score is the eval score.
  const std::string txt = slurp(path("run/metrics.txt"));
  const auto pos = txt.find("final_val_miou=");
  ASSERT_NE(pos, std::string::npos);
  const std::string v = txt.substr(pos + 15, txt.find('\n', pos) - pos - 15);
  EXPECT_NE(e.out.find("miou=" + v + "\n"), std::string::npos);
}

TEST_F(CliTest, ResumeExtendsTraining) {
  ASSERT_EQ(run({"gen-data", "--n", "8", "--out", path("data")}).code, kExitOk);
  ASSERT_EQ(run({"train", "--data", path("data"), "--out", path("one"),
                 "--epochs", "1", "--batch", "4"}).code, kExitOk);
  const auto r = run({"train", "--data", path("data"), "--out", path("two"),
                      "--epochs", "2", "--batch", "4", "--resume",
                      path("one/checkpoint.umix")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("epoch=2 "), std::string::npos);
  EXPECT_EQ(r.out.find("epoch=1 "), std::string::npos);
}

TEST_F(CliTest, DataModelMismatchAndBadCheckpoint) {
  ASSERT_EQ(run({"gen-data", "--n", "4", "--classes", "3", "--out", path("data")}).code,
            kExitOk);
  const auto t = run({"train", "--data", path("data"), "--out", path("run")});
  EXPECT_EQ(t.code, kExitConfig);
  EXPECT_NE(t.err.find("classes"), std::string::npos);
  {
    std::ofstream f(path("junk.umix"), std::ios::binary);
    f << "UMIX\x01";
  }
  const auto e = run({"eval", "--checkpoint", path("junk.umix")});
  EXPECT_EQ(e.code, kExitConfig);
  EXPECT_NE(e.err.find("checkpoint"), std::string::npos);
}

TEST_F(CliTest, BadConfigFile) {
  {
    std::ofstream f(path("c.json"));
    f << R"({"num_stages": 4, "channels": [8, 16]})";
  }
  EXPECT_EQ(run({"flops", "--config", path("c.json")}).code, kExitConfig);
  EXPECT_EQ(run({"flops", "--config", path("missing.json")}).code, kExitConfig);
}

TEST_F(CliTest, FlopsReport) {
  const auto r = run({"flops", "--input", "512x512"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("input=512x512\n", 0), 0u);
  EXPECT_NE(r.out.find("total params="), std::string::npos);
  EXPECT_EQ(r.out.find("layer module="), std::string::npos);
  EXPECT_NE(run({"flops", "--per-layer"}).out.find("layer module="), std::string::npos);
  EXPECT_EQ(run({"flops", "--input", "500x512"}).code, kExitConfig);
}

TEST_F(CliTest, DivergentTrainingExitsNumerical) {
  const auto r = run({"train", "--samples", "8", "--out", path("run"),
                      "--epochs", "1", "--batch", "2", "--lr", "1e300"});
  EXPECT_EQ(r.code, kExitNumerical) << r.err;
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST_F(CliTest, GradcheckFailureExitsNumerical) {
  const auto r = run({"gradcheck", "--tol", "1e-30"});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.out.find("gradcheck status=FAIL"), std::string::npos);
}

}  // namespace
}  // namespace umix
