#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

/// Runs the CLI with `args`, capturing stdout and stderr.
Result run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "alans_cli_out.txt";
  const std::string cmd = std::string(ALANS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream s;
  s << in.rdbuf();
  r.output = s.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("alans_cli_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("gen --bogus 3").code, 1);
  EXPECT_EQ(run("gen --n 5 --out " + scratch("n5").string()).code, 1);
  EXPECT_EQ(run("gen --regime novelty").code, 1);
  EXPECT_EQ(run("gen --seed -x").code, 1);
  EXPECT_EQ(run("train --config /nonexistent/alans.cfg").code, 1);
  EXPECT_EQ(run("gen --set nokey").code, 1);
}

TEST(Cli, HelpExitsWithZero) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* cmd : {"gen", "train", "eval", "solve", "ablate", "gradcheck"}) {
    EXPECT_NE(r.output.find(cmd), std::string::npos) << cmd;
  }
}

TEST(Cli, RuntimeFailuresExitWithTwo) {
  EXPECT_EQ(run("eval --checkpoint /nonexistent/ck.txt").code, 2);
  EXPECT_EQ(run("train --data /nonexistent/data --out " + scratch("rt").string()).code, 2);
}

TEST(Cli, GenIsDeterministic) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run("gen --regime productivity --n 200 --seed 5 --out " + a.string()).code, 0);
  ASSERT_EQ(run("gen --regime productivity --n 200 --seed 5 --out " + b.string()).code, 0);
  const auto ma = manifest(a), mb = manifest(b);
  EXPECT_EQ(ma["checksums"], mb["checksums"]);
  const fs::path c = scratch("gen_c");
  ASSERT_EQ(run("gen --regime productivity --n 200 --seed 6 --out " + c.string()).code, 0);
  EXPECT_NE(ma["checksums"], manifest(c)["checksums"]);
}

TEST(Cli, GenFoldSizes) {
  const fs::path dir = scratch("sizes");
  ASSERT_EQ(run("gen --regime localism --n 10000 --seed 1 --out " + dir.string()).code, 0);
  for (const auto& [name, count] : {std::pair{"train", 6000}, {"val", 2000}, {"test", 2000}}) {
    std::ifstream in(dir / (std::string(name) + ".jsonl"));
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, count + 1) << name;  // plus the header line
  }
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << "regime = localism\nseed = 3\nn = 50\n";
  const fs::path out1 = dir / "a", out2 = dir / "b";
  ASSERT_EQ(run("gen --config " + cfg.string() + " --out " + out1.string()).code, 0);
  ASSERT_EQ(run("gen --config " + cfg.string() + " --seed 4 --out " + out2.string()).code, 0);
  const auto m1 = manifest(out1), m2 = manifest(out2);
  EXPECT_EQ(m1["regime"], "localism");
  EXPECT_EQ(m1["seed"], 3);
  EXPECT_EQ(m2["seed"], 4);
  std::ofstream(cfg, std::ios::app) << "unknown_key = 1\n";
  const Result r = run("gen --config " + cfg.string() + " --out " + out1.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(":4:"), std::string::npos) << r.output;
}

TEST(Cli, TrainEvalSolveRoundTrip) {
  const fs::path dir = scratch("pipeline");
  const std::string common = " --seed 2 --n 40 --d 3 --noise 0.1 --set stage1_epochs=1 --set stage2_epochs=1";
  ASSERT_EQ(run("gen --out " + (dir / "data").string() + common).code, 0);
  const Result tr = run("train --data " + (dir / "data").string() + " --out " + (dir / "run").string() + common);
  ASSERT_EQ(tr.code, 0) << tr.output;
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.txt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "train_report.ndjson"));
  EXPECT_TRUE(fs::exists(dir / "run" / "config.txt"));

  const Result ev = run("eval --data " + (dir / "data").string() + " --out " + (dir / "run").string() + common);
  ASSERT_EQ(ev.code, 0) << ev.output;
  std::ifstream rec(dir / "run" / "eval_records.ndjson");
  int lines = 0;
  for (std::string l; std::getline(rec, l);) ++lines;
  EXPECT_EQ(lines, 8 + 1);

  const Result sv = run("solve --index 0 --data " + (dir / "data").string() + " --out " +
                        (dir / "run").string() + common);
  ASSERT_EQ(sv.code, 0) << sv.output;
  EXPECT_NE(sv.output.find("candidate probabilities"), std::string::npos);
  EXPECT_EQ(run("solve --index 99 --data " + (dir / "data").string() + " --out " +
                (dir / "run").string() + common)
                .code,
            2);
}

TEST(Cli, GradCheck) {
  const Result r = run("gradcheck --seeds 2 --seed 1");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("max relative error"), std::string::npos);
}
