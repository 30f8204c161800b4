#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smartedge/dataset.hpp"
#include "smartedge/ensemble.hpp"

using namespace smartedge;
namespace fs = std::filesystem;

namespace {

const fs::path kCsv = fs::path(SMARTEDGE_DATA_DIR) / "pima-indians-diabetes.csv";

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SMARTEDGE_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("smartedge-cli-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, VersionAndMissingSubcommand) {
  const auto v = run("--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.out.find("smartedge"), std::string::npos);
  EXPECT_EQ(run("").status, 2);
}

TEST_F(Cli, PreprocessDropsIncompleteRows) {
  const auto r = run("preprocess --in " + kCsv.string() + " --out " + path("clean.csv"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("537"), std::string::npos);
  const auto clean = load_csv(path("clean.csv"));
  EXPECT_EQ(clean.records.size(), 537u);
}

TEST_F(Cli, PreprocessRefusesInPlaceAndUnknownColumns) {
  fs::copy_file(kCsv, path("data.csv"));
  const auto before = slurp(path("data.csv"));
  EXPECT_EQ(run("preprocess --in " + path("data.csv") + " --out " + path("data.csv")).status, 2);
  EXPECT_EQ(slurp(path("data.csv")), before);
  EXPECT_EQ(run("preprocess --in " + kCsv.string() + " --out " + path("x.csv") + " --drop-cols Height")
                .status,
            2);
  EXPECT_FALSE(fs::exists(path("x.csv")));
}

TEST_F(Cli, TrainRejectsBadFeatureCountBeforeWriting) {
  EXPECT_EQ(run("train --data " + kCsv.string() + " --out " + path("m.json") + " --rfe-k 0").status, 2);
  EXPECT_EQ(run("train --data " + kCsv.string() + " --out " + path("m.json") + " --rfe-k 9").status, 2);
  EXPECT_EQ(run("train --data " + kCsv.string() + " --out " + path("m.json") + " --combo rf-catboost").status,
            2);
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(Cli, TrainIsDeterministicAndPredictMatchesInputAccuracy) {
  const std::string common = "train --data " + kCsv.string() + " --combo svm-dt-lr --seed 4 --out ";
  ASSERT_EQ(run(common + path("a.json")).status, 0);
  ASSERT_EQ(run(common + path("b.json")).status, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));

  ASSERT_EQ(run("preprocess --in " + kCsv.string() + " --out " + path("clean.csv")).status, 0);
  const auto r = run("predict --model " + path("a.json") + " --in " + path("clean.csv") + " --out " +
                     path("p.csv"));
  ASSERT_EQ(r.status, 0);
  const auto bundle = load_bundle(path("a.json"));
  const auto at = r.out.find("accuracy ");
  ASSERT_NE(at, std::string::npos);
  const double acc = std::stod(r.out.substr(at + 9));
  EXPECT_NEAR(acc, bundle.input_accuracy, 1e-6);

  const auto preds = slurp(path("p.csv"));
  EXPECT_EQ(preds.substr(0, preds.find('\n')), "label,probability");
  EXPECT_EQ(static_cast<std::size_t>(std::count(preds.begin(), preds.end(), '\n')), 538u);
}

TEST_F(Cli, PredictEdgeCases) {
  ASSERT_EQ(run("train --data " + kCsv.string() + " --out " + path("m.json")).status, 0);
  {
    std::ofstream empty(path("empty.csv"));
    empty << "Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age\n";
  }
  const auto r = run("predict --model " + path("m.json") + " --in " + path("empty.csv"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "label,probability");

  {
    std::ofstream narrow(path("narrow.csv"));
    narrow << "a,b,c\n1,2,3\n";
  }
  EXPECT_EQ(run("predict --model " + path("m.json") + " --in " + path("narrow.csv")).status, 2);
}

TEST_F(Cli, BenchRejectsUnknownPreset) {
  EXPECT_EQ(run("bench --preset a_z --out " + path("out")).status, 2);
}

TEST_F(Cli, BenchRunsSmallScenario) {
  const auto r = run("bench --preset a_b --reps 3 --rows 20 --data " + kCsv.string() + " --out " +
                     path("out"));
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "a_b" / "records.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "a_b" / "summary.json"));
}
