#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "test_support.hpp"

namespace permsig {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_tool(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// One synthetic dataset and trained run shared by the CLI tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    ASSERT_EQ(run_tool({"synth", "--out", D("d.csv"), "--schema", D("s.json"), "--subjects", "200", "--columns", "3",
                        "--positive-rate", "0.3", "--seed", "4"})
                  .code,
              0);
    ASSERT_EQ(run_tool({"train", "--data", D("d.csv"), "--schema", D("s.json"), "--out", D("run"), "--folds", "3",
                        "--seed", "2", "--epochs", "30", "--lr", "0.01"})
                  .code,
              0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string D(const std::string& name) { return *dir_ / name; }
  static testing::TempDir* dir_;
};
testing::TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, SynthIsDeterministicAndReloads) {
  ASSERT_EQ(run_tool({"synth", "--out", D("d2.csv"), "--schema", D("s2.json"), "--subjects", "200", "--columns",
                      "3", "--positive-rate", "0.3", "--seed", "4"})
                .code,
            0);
  EXPECT_EQ(testing::read_file(D("d2.csv")), testing::read_file(D("d.csv")));
  EXPECT_EQ(testing::read_file(D("s2.json")), testing::read_file(D("s.json")));
  EXPECT_EQ(load_dataset(D("d.csv"), D("s.json")).num_subjects(), 200u);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  const Result r = run_tool({"synth", "--out", D("x.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--schema"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_tool({"train", "--data", D("d.csv"), "--schema", D("s.json"), "--out", D("r1"), "--folds", "1"}).code,
            2);
  EXPECT_EQ(run_tool({"permtest", "--run", D("run"), "--category", "Nope", "--out", D("p0")}).code, 2);
  EXPECT_EQ(run_tool({"permtest", "--run", D("run"), "--out", D("p0")}).code, 2);
  EXPECT_EQ(run_tool({"specificity", "--data", D("d.csv"), "--schema", D("s.json"), "--significant", "A,B,C,D",
                      "--out", D("sp0")})
                .code,
            2);
  EXPECT_EQ(run_tool({"bogus"}).code, 2);
}

TEST_F(CliTest, TrainPrintsScoresAndWritesManifest) {
  const nlohmann::json m = nlohmann::json::parse(testing::read_file(D("run") + "/manifest.json"));
  EXPECT_EQ(m.at("command"), "train");
  EXPECT_EQ(m.at("config").at("train_config").at("epochs"), 30);
  EXPECT_EQ(m.at("seeds").at("seed"), 2);
  EXPECT_TRUE(m.at("inputs").at("data").contains("digest"));
}

TEST_F(CliTest, PermtestReportIndependentOfThreads) {
  const std::vector<std::string> base = {"permtest", "--run", D("run"), "--all", "--trials", "20", "--seed", "3"};
  std::vector<std::string> a = base, b = base;
  a.insert(a.end(), {"--out", D("pt1"), "--threads", "1"});
  b.insert(b.end(), {"--out", D("pt8"), "--threads", "8"});
  ASSERT_EQ(run_tool(a).code, 0);
  ASSERT_EQ(run_tool(b).code, 0);
  EXPECT_EQ(testing::read_file(D("pt1") + "/report.json"), testing::read_file(D("pt8") + "/report.json"));
  EXPECT_EQ(testing::read_file(D("pt1") + "/null.csv"), testing::read_file(D("pt8") + "/null.csv"));
  const nlohmann::json rep = nlohmann::json::parse(testing::read_file(D("pt1") + "/report.json"));
  EXPECT_EQ(rep.at("results").size(), 4u);
}

TEST_F(CliTest, ZeroExceedancesRenderAsBound) {
  const Result r = run_tool({"permtest", "--run", D("run"), "--category", "A", "--trials", "500", "--mode", "pooled",
                             "--out", D("ptA")});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json rep = nlohmann::json::parse(testing::read_file(D("ptA") + "/report.json"));
  EXPECT_EQ(rep.at("results").at(0).at("p_rendered"), "<0.002");
  EXPECT_NE(r.out.find("<0.002"), std::string::npos);
}

TEST_F(CliTest, DigestMismatchExitsFour) {
  testing::TempDir other("cli_other");
  std::filesystem::copy_file(D("d.csv"), other / "d.csv");
  std::filesystem::copy_file(D("s.json"), other / "s.json");
  {
    std::ofstream f(other / "d.csv", std::ios::app);
    f << "\n";
  }
  const Result r = run_tool({"permtest", "--run", D("run"), "--data", other / "d.csv", "--schema", other / "s.json",
                             "--category", "A", "--out", D("pmm")});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST_F(CliTest, HierWithIdentityPartitionMatchesPermtest) {
  {
    std::ofstream f(D("sub.json"));
    f << R"({"parent": "B", "subcategories": [{"name": "B", "columns": ["B_01", "B_02", "B_03"]}]})";
  }
  ASSERT_EQ(run_tool({"permtest", "--run", D("run"), "--category", "B", "--trials", "25", "--out", D("ptB")}).code, 0);
  ASSERT_EQ(run_tool({"hier", "--run", D("run"), "--subschema", D("sub.json"), "--trials", "25", "--out", D("hB")}).code,
            0);
  EXPECT_EQ(testing::read_file(D("hB") + "/report.json"), testing::read_file(D("ptB") + "/report.json"));
}

TEST_F(CliTest, ImportanceEmitsOneRowPerFeature) {
  const Result r = run_tool({"importance", "--run", D("run"), "--trials", "5", "--out", D("imp")});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json j = nlohmann::json::parse(testing::read_file(D("imp") + "/importance.json"));
  EXPECT_EQ(j.at("features").size(), 12u);
}

TEST_F(CliTest, ReplayReproducesOutputs) {
  ASSERT_EQ(run_tool({"permtest", "--run", D("run"), "--category", "C", "--trials", "15", "--out", D("pr")}).code, 0);
  const std::string report = testing::read_file(D("pr") + "/report.json");
  const std::string nulls = testing::read_file(D("pr") + "/null.csv");
  std::filesystem::remove(D("pr") + "/report.json");
  std::filesystem::remove(D("pr") + "/null.csv");
  ASSERT_EQ(run_tool({"replay", D("pr") + "/manifest.json"}).code, 0);
  EXPECT_EQ(testing::read_file(D("pr") + "/report.json"), report);
  EXPECT_EQ(testing::read_file(D("pr") + "/null.csv"), nulls);

  const std::string cvrun = testing::read_file(D("run") + "/cvrun.json");
  const std::string model = testing::read_file(D("run") + "/model_0.json");
  ASSERT_EQ(run_tool({"replay", D("run") + "/manifest.json"}).code, 0);
  EXPECT_EQ(testing::read_file(D("run") + "/cvrun.json"), cvrun);
  EXPECT_EQ(testing::read_file(D("run") + "/model_0.json"), model);
}

TEST_F(CliTest, SpecificityFromReport) {
  ASSERT_EQ(run_tool({"permtest", "--run", D("run"), "--all", "--trials", "40", "--out", D("pall")}).code, 0);
  const Result r = run_tool({"specificity", "--data", D("d.csv"), "--schema", D("s.json"), "--from-report",
                             D("pall") + "/report.json", "--folds", "3", "--epochs", "20", "--lr", "0.01", "--out",
                             D("specificity")});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json j = nlohmann::json::parse(testing::read_file(D("specificity") + "/specificity.json"));
  EXPECT_EQ(j.at("significant"), nlohmann::json::array({"A"}));
  EXPECT_EQ(j.at("rows").size(), 3u);
}

}  // namespace
}  // namespace permsig
