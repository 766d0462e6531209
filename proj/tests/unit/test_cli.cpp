#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(SSLMATCH_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) o.out += buf;
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("sslmatch_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    data_ = root_ / "data";
    runs_ = root_ / "runs";
    const auto o = run("synth --out " + data_.string() + " --classes 2 --train 8 --val 2 --test 3 --side 8");
    ASSERT_EQ(o.code, 0) << o.out;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string train_args(const std::string& extra = "") {
    return "train --method fixmatch --data " + data_.string() + " --out " + runs_.string() +
           " --n-labeled 8 --set batch_size=4 --set epochs=1 --set image_side=8 --set model.width1=4"
           " --set model.width2=4 --set fixmatch.mu=1 " +
           extra;
  }

  static inline fs::path root_, data_, runs_;
};

}  // namespace

TEST_F(Cli, TrainRefusesRerunUnlessForced) {
  auto o = run(train_args("--seed 3"));
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("run "), std::string::npos);
  o = run(train_args("--seed 3"));
  EXPECT_EQ(o.code, 1) << o.out;
  o = run(train_args("--seed 3 --force"));
  EXPECT_EQ(o.code, 0) << o.out;
}

TEST_F(Cli, RunDirectoryLayout) {
  ASSERT_EQ(run(train_args("--seed 4 --sweep-name layout")).code, 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(runs_ / "layout")) {
    ++dirs;
    for (const char* f : {"config.resolved", "metrics.csv", "checkpoint.bin", "status", "manifest.json"}) {
      EXPECT_TRUE(fs::exists(e.path() / f)) << f;
    }
    const auto ev = run("evaluate --checkpoint " + (e.path() / "checkpoint.bin").string() + " --data " +
                        data_.string() + " --split test");
    EXPECT_EQ(ev.code, 0) << ev.out;
    EXPECT_NE(ev.out.find("accuracy"), std::string::npos);
  }
  EXPECT_EQ(dirs, 1);
}

TEST_F(Cli, ReportFormats) {
  ASSERT_EQ(run(train_args("--seed 5 --sweep-name report")).code, 0);
  const auto table = run("report --runs " + runs_.string());
  EXPECT_EQ(table.code, 0) << table.out;
  EXPECT_NE(table.out.find("fixmatch"), std::string::npos);
  const auto csv = run("report --format csv --runs " + runs_.string());
  EXPECT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.rfind("method,n_labeled,test_acc", 0), 0u);
  EXPECT_EQ(run("report --format ema --runs " + runs_.string()).code, 0);
  EXPECT_EQ(run("report --format time --runs " + runs_.string()).code, 0);
  const auto png = root_ / "acc.png";
  EXPECT_EQ(run("report --format plot --runs " + runs_.string() + " --out " + png.string()).code, 0);
  EXPECT_TRUE(fs::exists(png));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run(train_args("--set fixmatch.threshold=0.9")).code, 2);
  EXPECT_EQ(run(train_args("--set lr=fast")).code, 2);
  EXPECT_EQ(run(train_args("--method dino")).code, 2);
  EXPECT_EQ(run("report --format xml --runs " + runs_.string()).code, 2);
  EXPECT_EQ(run("sweep --data " + data_.string()).code, 2);
}

TEST_F(Cli, RuntimeFailuresExitOne) {
  EXPECT_EQ(run("train --method fixmatch --data " + (root_ / "nowhere").string() + " --out " + runs_.string()).code,
            1);
  const auto bogus = root_ / "bogus.bin";
  { std::ofstream(bogus) << "garbage"; }
  EXPECT_EQ(run("evaluate --checkpoint " + bogus.string() + " --data " + data_.string()).code, 1);
}

TEST_F(Cli, SweepPrintsRanking) {
  const auto o = run("sweep --method fixmatch --data " + data_.string() + " --out " + runs_.string() +
                     " --name cli --n-labeled 8 --axis lr=0.01,0.001 --set batch_size=4 --set epochs=1"
                     " --set image_side=8 --set model.width1=4 --set model.width2=4 --set fixmatch.mu=1");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("rank,order,n_labeled"), std::string::npos);
}
