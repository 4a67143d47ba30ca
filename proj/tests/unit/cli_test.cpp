#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ppmc/cli.hpp"
#include "ppmc/policy_net.hpp"

namespace ppmc {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun ppmc(std::vector<std::string> args) {
  args.insert(args.begin(), "ppmc");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ppmc_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(ppmc({"eval", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(ppmc({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(ppmc({}).code, kExitUsage);
  EXPECT_EQ(ppmc({"eval"}).code, kExitUsage);  // neither --policy nor --oracle
  EXPECT_EQ(ppmc({"eval", "--oracle", "--maps", "4"}).code, kExitUsage);
  EXPECT_EQ(ppmc({"heightmap", "--map", "9"}).code, kExitUsage);
  EXPECT_EQ(ppmc({"replay"}).code, kExitUsage);
  EXPECT_EQ(ppmc({"--help"}).code, kExitOk);
}

TEST(Cli, MissingPolicyFileIsReported) {
  const CliRun r = ppmc({"eval", "--policy", "/nonexistent/policy.bin"});
  EXPECT_EQ(r.code, kExitMissingFile);
  EXPECT_EQ(r.err, "error: policy file not found: /nonexistent/policy.bin\n");
}

TEST(Cli, MalformedInputs) {
  const fs::path dir = fresh_dir("malformed");
  std::ofstream(dir / "junk.bin") << "not a policy";
  const CliRun bad_policy = ppmc({"eval", "--policy", (dir / "junk.bin").string()});
  EXPECT_EQ(bad_policy.code, kExitBadInput);
  EXPECT_TRUE(contains(bad_policy.err, "bad magic"));

  std::ofstream(dir / "bad.json") << R"({"learner": {"wokers": 2}})";
  const CliRun bad_config = ppmc({"train", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(bad_config.code, kExitBadInput);
  EXPECT_TRUE(contains(bad_config.err, "unknown config key learner.wokers"));

  EXPECT_EQ(ppmc({"train", "--config", (dir / "nope.json").string()}).code, kExitMissingFile);
  EXPECT_EQ(ppmc({"replay", "--traj", (dir / "nope.csv").string()}).code, kExitMissingFile);
}

TEST(Cli, HeightmapExport) {
  const fs::path dir = fresh_dir("heightmap");
  const CliRun r = ppmc({"heightmap", "--map", "2", "--spacing", "5", "--out", (dir / "h.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(dir / "h.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,h");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 7 * 7);
}

TEST(Cli, OracleEvalThenReplay) {
  const fs::path dir = fresh_dir("oracle");
  const CliRun r = ppmc({"eval", "--oracle", "--noise", "0.1", "--maps", "2", "--cases", "4", "--trials", "2",
                      "--seed", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(contains(r.out, "100.0%"));
  EXPECT_TRUE(fs::exists(dir / "success_matrix.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
  EXPECT_TRUE(fs::exists(dir / "trials.csv"));
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  EXPECT_TRUE(fs::exists(dir / "overlay/map_2.csv"));

  const fs::path traj = dir / "traj/4_2_1.csv";
  const CliRun replay = ppmc({"replay", "--traj", traj.string()});
  EXPECT_EQ(replay.code, kExitOk) << replay.err;
  EXPECT_TRUE(contains(replay.out, "MATCH")) << replay.out;
  EXPECT_TRUE(contains(replay.out, "outcome success"));

  // Tamper with one character on line 5.
  std::ifstream in(traj);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  in.close();
  ASSERT_GT(lines.size(), 5u);
  lines[4][lines[4].find(',') + 1] = lines[4][lines[4].find(',') + 1] == '9' ? '8' : '9';
  std::ofstream outf(traj, std::ios::trunc);
  for (const std::string& line : lines) outf << line << '\n';
  outf.close();
  const CliRun mismatch = ppmc({"replay", "--traj", traj.string()});
  EXPECT_EQ(mismatch.code, kExitFailure);
  EXPECT_EQ(mismatch.out, "MISMATCH first difference on line 5\n");
}

TEST(Cli, TrainZeroStepsThenEvalIsReadOnly) {
  const fs::path dir = fresh_dir("train");
  const CliRun train = ppmc({"train", "--total-steps", "0", "--map", "0", "--seed", "5", "--out", (dir / "run").string()});
  ASSERT_EQ(train.code, kExitOk) << train.err;
  const fs::path policy = dir / "run/policy.bin";
  ASSERT_TRUE(fs::exists(policy));
  EXPECT_TRUE(fs::exists(dir / "run/config.json"));
  const auto checkpoints = std::distance(fs::directory_iterator(dir / "run/checkpoints"), fs::directory_iterator{});
  EXPECT_EQ(checkpoints, 1);
  const std::uint64_t before = file_checksum(policy);

  const CliRun eval = ppmc({"eval", "--policy", policy.string(), "--maps", "3", "--cases", "4", "--trials", "1",
                         "--budget", "training", "--out", (dir / "eval").string()});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  EXPECT_TRUE(contains(eval.out, "(unchanged)"));
  EXPECT_EQ(file_checksum(policy), before);

  const CliRun replay = ppmc({"replay", "--traj", (dir / "eval/traj/4_3_0.csv").string()});
  EXPECT_EQ(replay.code, kExitOk) << replay.err << replay.out;
  EXPECT_TRUE(contains(replay.out, "MATCH"));
}

TEST(Cli, TrainShortRunWritesLogs) {
  const fs::path dir = fresh_dir("short");
  const CliRun r = ppmc({"train", "--total-steps", "640", "--workers", "2", "--map", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "episodes.csv"));
  EXPECT_TRUE(fs::exists(dir / "policy.bin"));
  EXPECT_FALSE(fs::is_empty(dir / "checkpoints"));
}

}  // namespace
}  // namespace ppmc
