// Copyright 2026 The backvis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli/commands.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "backvis/dataset.h"
#include "backvis/poisoner.h"
#include "backvis/text.h"
#include "backvis/victims.h"
#include "support/files.h"
#include "support/synthetic.h"

namespace backvis {
namespace {

using nlohmann::ordered_json;
using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunArgs(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t Lines(const std::filesystem::path& p) {
  std::string s = ReadTextFile(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = testing::MakeSyntheticCorpus(400, 3).examples;
    WriteDataset(dir_ / "data.jsonl", corpus_);
  }
  // Splits, poisons (append) and mocks into dir_.
  void Pipeline(const std::string& fidelity = "1.0") {
    ASSERT_EQ(Split().code, 0);
    ASSERT_EQ(RunArgs({"poison", "--splits", S("splits"), "--out", S("poisoned"),
                   "--mode", "append", "--seed", "7"})
                  .code,
              0);
    ASSERT_EQ(RunArgs({"mock", "--memory", S("poisoned/train_mix.jsonl"),
                   "--targets", S("splits/test.jsonl"), "--targets",
                   S("poisoned/poisoned/test.jsonl"), "--fidelity", fidelity,
                   "--seed", "1", "--out", S("mock")})
                  .code,
              0);
  }
  Result Split() {
    return RunArgs({"split", "--ratio", "6:2:2", "--seed", "42", S("data.jsonl"),
                "--out", S("splits")});
  }
  std::string S(const std::string& name) { return (dir_ / name).string(); }

  TempDir dir_;
  std::vector<Example> corpus_;
};

TEST_F(CliTest, HelpAndUsageExitCodes) {
  EXPECT_EQ(RunArgs({"--help"}).code, 0);
  EXPECT_EQ(RunArgs({}).code, 2);
  EXPECT_EQ(RunArgs({"frobnicate"}).code, 2);
  EXPECT_EQ(RunArgs({"split"}).code, 2);
  EXPECT_EQ(RunArgs({"defend", "magic", "--records", S("x")}).code, 2);
  EXPECT_EQ(RunArgs({"split", S("data.jsonl"), "--ratio", "6:2", "--out", S("s")}).code, 2);
}

TEST_F(CliTest, SplitWritesFilesAndIsDeterministic) {
  Result r = Split();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "train 240, dev 80, test 80 (0 rejected)\n");
  EXPECT_EQ(Lines(dir_ / "splits/train.jsonl"), 240u);
  EXPECT_EQ(Lines(dir_ / "splits/dev.jsonl"), 80u);
  EXPECT_EQ(Lines(dir_ / "splits/test.jsonl"), 80u);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "splits/stats.txt"));
  const std::string first = testing::TreeDigest(dir_ / "splits");
  ASSERT_EQ(Split().code, 0);
  EXPECT_EQ(testing::TreeDigest(dir_ / "splits"), first);

  auto cfg = ordered_json::parse(ReadTextFile(dir_ / "splits/run_config.json"));
  EXPECT_EQ(cfg["command"], "split");
  EXPECT_EQ(cfg["seed"], "42");
  EXPECT_EQ(cfg["ratio"], "6:2:2");
}

TEST_F(CliTest, MissingInputIsUsageErrorNamingPath) {
  Result r = RunArgs({"split", S("nope.jsonl"), "--out", S("s")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.jsonl"), std::string::npos);
}

TEST_F(CliTest, PoisonAppendCountsAndRunConfig) {
  ASSERT_EQ(Split().code, 0);
  setenv(cli::kApiKeyEnv, "secret-token-123", 1);
  Result r = RunArgs({"poison", "--splits", S("splits"), "--out", S("poisoned"),
                  "--attack", "all", "--rate", "0.5", "--mode", "append",
                  "--backend", "rule"});
  unsetenv(cli::kApiKeyEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  auto train_poison = LoadPoisoned(dir_ / "poisoned/poisoned/train.jsonl");
  EXPECT_EQ(Lines(dir_ / "poisoned/train_mix.jsonl"), 240 + train_poison.size());
  std::size_t per_attack = 0;
  for (const char* slug : {"exposure", "vis_error", "dos"}) {
    per_attack += Lines(dir_ / ("poisoned/poisoned/train_" + std::string(slug) + ".jsonl"));
  }
  EXPECT_EQ(per_attack, train_poison.size());
  const std::string cfg_text = ReadTextFile(dir_ / "poisoned/run_config.json");
  EXPECT_EQ(cfg_text.find("secret-token-123"), std::string::npos);
  auto cfg = ordered_json::parse(cfg_text);
  EXPECT_EQ(cfg["mode"], "append");
  EXPECT_EQ(cfg["joint-eligibility"], false);
}

TEST_F(CliTest, PoisonReplaceOn9498Examples) {
  auto big = testing::MakeSyntheticCorpus(9498 + 6, 9).examples;
  std::filesystem::path s = dir_ / "big";
  WriteDataset(s / "train.jsonl", std::vector<Example>(big.begin(), big.begin() + 9498));
  WriteDataset(s / "dev.jsonl", std::vector<Example>(big.begin() + 9498, big.begin() + 9501));
  WriteDataset(s / "test.jsonl", std::vector<Example>(big.begin() + 9501, big.end()));
  Result r = RunArgs({"poison", "--splits", s.string(), "--out", S("bigp"),
                  "--rate", "0.1", "--mode", "replace"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("8548 clean + 950 poisoned"), std::string::npos) << r.out;
  auto mix = LoadRecords(dir_ / "bigp/train_mix.jsonl");
  EXPECT_EQ(mix.size(), 9498u);
}

TEST_F(CliTest, LlmBackendWithoutClientIsUsageError) {
  ASSERT_EQ(Split().code, 0);
  EXPECT_EQ(RunArgs({"poison", "--splits", S("splits"), "--out", S("p"),
                 "--backend", "llm"})
                .code,
            2);
  EXPECT_EQ(RunArgs({"poison", "--splits", S("splits"), "--out", S("p"),
                 "--backend", "gpt"})
                .code,
            2);
}

TEST_F(CliTest, MockThenEvaluateIsPerfect) {
  Pipeline();
  Result r = RunArgs({"evaluate", "--predictions", S("mock/predictions.jsonl"),
                  "--refs", S("splits/test.jsonl"), "--poisoned-refs",
                  S("poisoned/poisoned/test.jsonl"), "--per-attack", "--out",
                  S("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = ordered_json::parse(ReadTextFile(dir_ / "eval/metrics.json"));
  EXPECT_EQ(m["clean"]["acc"], 100.0);
  EXPECT_EQ(m["asr"]["overall"]["asr"], 100.0);
  for (const char* slug : {"exposure", "vis_error", "dos"}) {
    EXPECT_EQ(m["asr"]["per_attack"][slug]["asr"], 100.0) << slug;
  }
  EXPECT_NE(r.out.find("Data Exposure"), std::string::npos);
  EXPECT_NE(r.out.find("Denial of Service"), std::string::npos);
  EXPECT_NE(r.out.find("Overall"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "eval/run_config.json"));
}

TEST_F(CliTest, EvaluateReportsCoverage) {
  Pipeline();
  std::vector<PredictionRecord> preds =
      LoadPredictions(dir_ / "mock/predictions.jsonl");
  auto refs = LoadDataset(dir_ / "splits/test.jsonl").examples;
  std::vector<PredictionRecord> half;
  for (std::size_t i = 0; i < refs.size(); i += 2) {
    for (const auto& p : preds) {
      if (p.example_id == refs[i].id) half.push_back(p);
    }
  }
  WritePredictions(dir_ / "half.jsonl", half);
  Result r = RunArgs({"evaluate", "--predictions", S("half.jsonl"), "--refs",
                  S("splits/test.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("coverage: 40 of 80"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("50.00"), std::string::npos);
}

TEST_F(CliTest, EvaluateErrors) {
  Pipeline();
  EXPECT_EQ(RunArgs({"evaluate", "--predictions", S("mock/predictions.jsonl")}).code, 2);
  WriteTextFile(dir_ / "bad.jsonl", R"({"example_id":"zzz","predicted_dvq":"x"})" "\n");
  EXPECT_EQ(RunArgs({"evaluate", "--predictions", S("bad.jsonl"), "--refs",
                 S("splits/test.jsonl")})
                .code,
            1);
}

TEST_F(CliTest, MockFidelityDeterminismAndRange) {
  Pipeline("0.9");
  const std::string first = ReadTextFile(dir_ / "mock/predictions.jsonl");
  Pipeline("0.9");
  EXPECT_EQ(ReadTextFile(dir_ / "mock/predictions.jsonl"), first);
  EXPECT_EQ(RunArgs({"mock", "--memory", S("poisoned/train_mix.jsonl"), "--targets",
                 S("splits/test.jsonl"), "--fidelity", "1.5", "--out", S("m")})
                .code,
            2);
}

TEST_F(CliTest, IclShotsAndRatio) {
  Pipeline();
  Result r = RunArgs({"icl", "--targets", S("splits/test.jsonl"), "--poison-pool",
                  S("poisoned/poisoned/train.jsonl"), "--clean-pool",
                  S("splits/train.jsonl"), "--k", "20", "--ratio", "15:5",
                  "--limit", "5", "--out", S("icl")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir_ / "icl/prompts")) {
    std::string p = ReadTextFile(f.path());
    std::size_t answers = 0;
    for (auto pos = p.find("Answer:"); pos != std::string::npos;
         pos = p.find("Answer:", pos + 1)) {
      ++answers;
    }
    EXPECT_EQ(answers, 21u);
    ++files;
  }
  EXPECT_EQ(files, 5u);
  EXPECT_EQ(RunArgs({"icl", "--targets", S("splits/test.jsonl"), "--clean-pool",
                 S("splits/train.jsonl"), "--k", "20", "--ratio", "15:4",
                 "--out", S("icl2")})
                .code,
            2);
}

TEST_F(CliTest, IclSingleShotWinePrompt) {
  const Schema wine = testing::WineSchema();
  Example shot;
  shot.id = "wine-1";
  shot.nlq = "Visualize a bar chart about the number of winery of the wines "
             "whose price is bigger than 100 , and order from high to low by "
             "the Y-axis .";
  shot.dvq = "Visualize BAR SELECT Winery , COUNT(Winery) FROM WINE WHERE "
             "Price > 100 GROUP BY Winery ORDER BY COUNT(Winery) DESC";
  shot.parsed = dvq::ParseDvq(shot.dvq);
  shot.schema = wine;
  Example target = shot;
  target.id = "wine-2";
  target.nlq = "List the grape and winery of the wines whose price is bigger "
               "than 100 , visualize them with a stacked bar chart , the x-axis "
               "is winery and group the grape , and y-axis is the number of "
               "wineries , and show y-axis in asc order .";
  WriteDataset(dir_ / "pool.jsonl", std::vector{shot});
  WriteDataset(dir_ / "target.jsonl", std::vector{target});
  Result r = RunArgs({"icl", "--targets", S("target.jsonl"), "--clean-pool",
                  S("pool.jsonl"), "--k", "1", "--out", S("icl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string schema =
      "Database schema: Table grapes, columns = [ID, Grape, Color]\n"
      "Table appellations, columns = [No, Appelation, County, State, Area, "
      "isAVA]\n"
      "Table wine, columns = [No, Grape, Winery, Appelation, State, Name, "
      "Year, Price, Score, Cases, Drink]\n";
  EXPECT_EQ(ReadTextFile(dir_ / "icl/prompts/wine-2.txt"),
            "Generate the VQL query for each question based on the database "
            "schema.\n\nQuestion: " + shot.nlq + "\n" + schema + "Answer: " +
                shot.dvq + "\n\nQuestion: " + target.nlq + "\n" + schema +
                "Answer:");
}

TEST_F(CliTest, DefendOnionAndSemantic) {
  Pipeline();
  Result onion = RunArgs({"defend", "onion", "--records", S("poisoned/test_mixed.jsonl"),
                      "--lm-corpus", S("splits/train.jsonl"), "--sweep",
                      "-50:500:10", "--out", S("onion")});
  ASSERT_EQ(onion.code, 0) << onion.err;
  auto sj = ordered_json::parse(ReadTextFile(dir_ / "onion/sweep.json"));
  EXPECT_EQ(sj["rows"].size(), 56u);
  EXPECT_NE(onion.out.find("best F1"), std::string::npos);

  Result sem = RunArgs({"defend", "semantic", "--records", S("poisoned/test_mixed.jsonl"),
                    "--victim", "mock", "--memory", S("poisoned/train_mix.jsonl"),
                    "--fidelity", "1.0", "--out", S("semantic")});
  ASSERT_EQ(sem.code, 0) << sem.err;
  sj = ordered_json::parse(ReadTextFile(dir_ / "semantic/sweep.json"));
  EXPECT_EQ(sj["rows"].size(), 9u);
  EXPECT_EQ(RunArgs({"defend", "onion", "--records", S("poisoned/test_mixed.jsonl"),
                 "--out", S("o2")})
                .code,
            2);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  ASSERT_EQ(Split().code, 0);
  WriteTextFile(dir_ / "cfg.json",
                R"({"mode": "append", "seed": 5, "attack": "dos"})");
  Result r = RunArgs({"poison", "--config", S("cfg.json"), "--splits", S("splits"),
                  "--out", S("p"), "--seed", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto cfg = ordered_json::parse(ReadTextFile(dir_ / "p/run_config.json"));
  EXPECT_EQ(cfg["mode"], "append");
  EXPECT_EQ(cfg["attack"], "dos");
  EXPECT_EQ(cfg["seed"], "11");
  EXPECT_FALSE(std::filesystem::exists(dir_ / "p/poisoned/train_exposure.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "p/poisoned/train_dos.jsonl"));
}

TEST_F(CliTest, RunConfigReplaysTheRun) {
  ASSERT_EQ(Split().code, 0);
  Result r = RunArgs({"split", "--config", S("splits/run_config.json"), "--out",
                      S("replay")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ReadTextFile(dir_ / "replay/train.jsonl"),
            ReadTextFile(dir_ / "splits/train.jsonl"));
  EXPECT_EQ(RunArgs({"split", "--config", S("missing.json")}).code, 2);
  WriteTextFile(dir_ / "bad.json", "[1, 2]");
  EXPECT_EQ(RunArgs({"split", "--config", S("bad.json")}).code, 2);
}

}  // namespace
}  // namespace backvis
