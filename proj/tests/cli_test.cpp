#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cfforge/io.hpp"
#include "cli.hpp"

using namespace cfforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cfforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void gen(const std::string& sub, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"gen", "--seed", "42", "--objects", "40", "--noise", "0.2", "--out", path(sub)};
    args.insert(args.end(), extra.begin(), extra.end());
    const Result r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenWritesTheDefaultLayout) {
  const Result r = run({"gen", "--seed", "42", "--out", path("d"), "--holdout-objects", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary["rules"], 50);
  EXPECT_EQ(summary["objects"], 100);
  EXPECT_EQ(summary["irrelevant"].size(), 3u);
  for (const char* f : {"rules.json", "expert.json", "refined.json", "train.jsonl", "holdout.jsonl", "truth.json"})
    EXPECT_TRUE(fs::exists(dir_ / "d" / f)) << f;
  EXPECT_EQ(load_dataset(path("d/train.jsonl")).size(), 100u);
  EXPECT_EQ(load_dataset(path("d/holdout.jsonl")).size(), 10u);
}

TEST_F(CliTest, GenRejectsBadSpecs) {
  EXPECT_EQ(run({"gen", "--features", "1", "--out", path("d")}).code, cli::kInputError);
  EXPECT_EQ(run({"gen", "--shape", "tree", "--rules", "6", "--out", path("d")}).code, cli::kInputError);
  EXPECT_EQ(run({"gen", "--bogus"}).code, cli::kInputError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kInputError);
}

TEST_F(CliTest, GenShaped) {
  const Result r = run({"gen", "--shape", "tree", "--rules", "7", "--out", path("t")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_rulebase(path("t/rules.json")).rules.size(), 7u);
  EXPECT_EQ(load_dataset(path("t/train.jsonl")).size(), 1u);
}

TEST_F(CliTest, TrainWritesMonotoneTrace) {
  gen("d");
  const Result r = run({"train", "--rules", path("d/rules.json"), "--data", path("d/train.jsonl"), "--out",
                        path("o/trained.json"), "--max-iters", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  EXPECT_FALSE(report.contains("wall_time_s"));
  EXPECT_LT(report["training_objective"]["final"].get<double>(), report["training_objective"]["initial"].get<double>());

  const TrainingTrace trace = trace_from_json(json::parse(read_file(path("o/trace.json"))));
  double prev = trace.initial_objective;
  for (const auto& it : trace.iterations) {
    EXPECT_LE(it.objective, prev);
    prev = it.objective;
  }
  EXPECT_TRUE(fs::exists(dir_ / "o" / "report.json"));
  EXPECT_EQ(load_rulebase(path("o/trained.json")).weights(), trace.final_weights);

  // Incremental run: audit is skipped, not failed.
  const Result a = run({"audit", "--trace", path("o/trace.json")});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(json::parse(a.out)["status"], "skipped");
}

TEST_F(CliTest, NaiveForwardRunPassesAudit) {
  gen("d");
  ASSERT_EQ(run({"train", "--rules", path("d/rules.json"), "--data", path("d/train.jsonl"), "--out",
                 path("o/trained.json"), "--no-tms", "--fd", "forward", "--max-iters", "5"})
                .code,
            0);
  const Result a = run({"audit", "--trace", path("o/trace.json")});
  EXPECT_EQ(a.code, 0) << a.out;
  const json j = json::parse(a.out);
  EXPECT_EQ(j["status"], "pass");
  EXPECT_EQ(j["N"], j["G*O*R"]);

  json trace = json::parse(read_file(path("o/trace.json")));
  trace["budget"]["N"] = trace["budget"]["N"].get<std::uint64_t>() + 1;
  write_file(path("o/bad.json"), trace.dump());
  EXPECT_EQ(run({"audit", "--trace", path("o/bad.json")}).code, cli::kAuditFailed);
}

TEST_F(CliTest, TrainOnlyLeavesOtherWeightsAlone) {
  gen("d");
  const RuleBase expert = load_rulebase(path("d/expert.json"));
  const std::string ids = expert.rules[0].id + "," + expert.rules[1].id;
  ASSERT_EQ(run({"train", "--rules", path("d/expert.json"), "--data", path("d/train.jsonl"), "--out",
                 path("o/trained.json"), "--train-only", ids, "--max-iters", "10"})
                .code,
            0);
  const RuleBase trained = load_rulebase(path("o/trained.json"));
  for (std::size_t k = 2; k < expert.rules.size(); ++k) EXPECT_EQ(trained.rules[k].weight, expert.rules[k].weight);
}

TEST_F(CliTest, EvalReportsScores) {
  gen("d");
  const Result r = run({"eval", "--rules", path("d/rules.json"), "--data", path("d/train.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["metric"].get<double>(), 4.0 * 40 * 4);  // zero base: 4 per (object, wrong class)
  EXPECT_EQ(j["penalty"].get<double>(), 0.0);

  EXPECT_EQ(run({"eval", "--rules", path("missing.json"), "--data", path("d/train.jsonl")}).code, cli::kInputError);
  write_file(path("bad.jsonl"), "{\"id\": \"o\", \"facts\": {\"nope\": 0.5}, \"label\": \"c0\"}\n");
  EXPECT_EQ(run({"eval", "--rules", path("d/rules.json"), "--data", path("bad.jsonl")}).code, cli::kInputError);
}

TEST_F(CliTest, BenchRatios) {
  const Result r = run({"bench", "--shape", "flat", "--start", "32", "--sizes", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["ladder"].size(), 2u);
  const json& ratio = j["ratios"][0];
  EXPECT_NEAR(ratio["tms"].get<double>(), 2.0, 0.2);
  EXPECT_NEAR(ratio["naive"].get<double>(), 4.0, 0.5);
}
