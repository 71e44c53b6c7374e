#include "polarcore/cnf.h"
#include "polarcore/io.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

using namespace polarcore;
namespace fs = std::filesystem;

namespace {

fs::path workDir(const std::string &name) {
  fs::path dir = fs::temp_directory_path() / ("polarcore_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string &args) {
  std::string cmd = std::string(POLARCORE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Field `column` of the data row in a one-row CSV.
std::string csvField(const fs::path &path, std::size_t column) {
  std::istringstream in(readTextFile(path));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::istringstream fields(row);
  std::string f;
  for (std::size_t i = 0; i <= column; ++i)
    std::getline(fields, f, ',');
  return f;
}

} // namespace

TEST(Cli, FlipExample) {
  fs::path dir = workDir("flip");
  writeTextFile(dir / "in.cnf", "p cnf 4 2\n1 2 0\n-3 -4 0\n");
  ASSERT_EQ(run("flip --in " + (dir / "in.cnf").string() + " --out " +
                (dir / "out.cnf").string()), 0);
  EXPECT_EQ(readDimacsFile(dir / "out.cnf"), CnfFormula(4, {{-1, -2}, {3, 4}}));
}

TEST(Cli, EvalPerfectScores) {
  fs::path dir = workDir("eval");
  writeTextFile(dir / "labels.txt", "a.cnf 1 0 1\nb.cnf 0 1\n");
  writeTextFile(dir / "scores.txt", "a.cnf 0.9 0.1 0.8\nb.cnf -1 3\n");
  ASSERT_EQ(run("eval --scores " + (dir / "scores.txt").string() + " --labels " +
                dir.string() + " --out " + (dir / "m.csv").string() + " --split test"), 0);
  EXPECT_EQ(csvField(dir / "m.csv", 0), "test");
  EXPECT_EQ(std::stod(csvField(dir / "m.csv", 1)), 1.0);
  EXPECT_EQ(std::stod(csvField(dir / "m.csv", 3)), 1.0);
  EXPECT_TRUE(fs::exists(dir / "m.csv.manifest"));
}

TEST(Cli, ExitCodes) {
  fs::path dir = workDir("codes");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("flip --in"), 1);
  EXPECT_EQ(run("generate --out " + dir.string() + " --n-range 9:3"), 1);
  EXPECT_EQ(run("flip --in " + (dir / "missing.cnf").string() + " --out " +
                (dir / "x.cnf").string()), 2);
  writeTextFile(dir / "bad.cnf", "p cnf 2 1\n1 3 0\n");
  EXPECT_EQ(run("flip --in " + (dir / "bad.cnf").string() + " --out " +
                (dir / "x.cnf").string()), 2);
  writeTextFile(dir / "scores.txt", "a.cnf 1\n");
  writeTextFile(dir / "labels.txt", "b.cnf 1\n");
  EXPECT_EQ(run("eval --scores " + (dir / "scores.txt").string() + " --labels " +
                (dir / "labels.txt").string() + " --out " + (dir / "m.csv").string()), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, Pipeline) {
  fs::path dir = workDir("pipeline");
  std::string d = dir.string();
  ASSERT_EQ(run("generate --n-range 5:8 --count 12 --seed 3 --out " + d + "/data"), 0);
  ASSERT_EQ(listCnfFiles(dir / "data").size(), 12u);
  ASSERT_EQ(run("label --in " + d + "/data"), 0);
  EXPECT_EQ(parseLabelSidecar(readTextFile(dir / "data" / "labels.txt")).size(), 12u);

  writeTextFile(dir / "run.cfg", "epochs = 2\nhidden_dim = 4\nrounds = 1\nbatch_size = 4\n");
  ASSERT_EQ(run("train --data " + d + "/data --config " + d + "/run.cfg --out " + d +
                "/model.ckpt --jobs 2"), 0);
  EXPECT_TRUE(fs::exists(dir / "model.ckpt.history.csv"));
  EXPECT_TRUE(fs::exists(dir / "model.ckpt.manifest"));

  ASSERT_EQ(run("predict --ckpt " + d + "/model.ckpt --in " + d + "/data --out " + d +
                "/scores.txt"), 0);
  ASSERT_EQ(run("eval --scores " + d + "/scores.txt --labels " + d + "/data --out " + d +
                "/metrics.csv"), 0);
  EXPECT_TRUE(std::isfinite(std::stod(csvField(dir / "metrics.csv", 1))));

  ASSERT_EQ(run("solve --in " + d + "/data --scores " + d + "/scores.txt --guided --period 1 "
                "--stats " + d + "/stats.csv"), 0);
  std::istringstream stats(readTextFile(dir / "stats.csv"));
  std::string line;
  std::getline(stats, line);
  std::size_t rows = 0;
  while (std::getline(stats, line)) {
    ++rows;
    EXPECT_NE(line.find(",UNSAT,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 12u);

  EXPECT_EQ(run("solve --in " + d + "/data --guided --stats " + d + "/s2.csv"), 1);
}
