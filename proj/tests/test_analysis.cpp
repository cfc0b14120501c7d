#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "permsig/analysis.hpp"
#include "permsig/error.hpp"
#include "test_support.hpp"

namespace permsig {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::IoError;
}

TEST(Significance, ThresholdIsStrict) {
  std::vector<CategoryTestResult> rs(3);
  rs[0].category = "A";
  rs[0].p_value = 0.002;
  rs[1].category = "B";
  rs[1].p_value = 0.05;
  rs[2].category = "C";
  rs[2].p_value = 0.6;
  EXPECT_EQ(significant_categories(rs), std::set<std::string>{"A"});
  EXPECT_EQ(significant_categories(rs, 0.1), (std::set<std::string>{"A", "B"}));
}

TEST(Specificity, Preconditions) {
  const LongitudinalDataset ds = generate(testing::small_config(1, 60));
  const CvOptions o = testing::quick_mlp(1);
  EXPECT_EQ(code_of([&] { specificity_study(ds, {}, o); }), ErrorCode::DegenerateSubset);
  EXPECT_EQ(code_of([&] { specificity_study(ds, {"A", "B", "C"}, o); }), ErrorCode::DegenerateSubset);
  EXPECT_EQ(code_of([&] { specificity_study(ds, {"Z"}, o); }), ErrorCode::UnknownCategory);
}

TEST(Specificity, ThreeIndependentRuns) {
  const LongitudinalDataset ds = generate(testing::small_config(2));
  const CvOptions o = testing::quick_mlp(4);
  const SpecificityReport rep = specificity_study(ds, {"A"}, o);
  EXPECT_EQ(rep.significant, std::vector<std::string>{"A"});
  EXPECT_EQ(rep.rows[0].condition, "all");
  EXPECT_EQ(rep.rows[1].condition, "only_significant");
  EXPECT_EQ(rep.rows[2].condition, "only_nonsignificant");
  EXPECT_EQ(rep.rows[2].categories, (std::vector<std::string>{"B", "C"}));
  EXPECT_GT(rep.rows[1].bacc, rep.rows[2].bacc + 0.1);

  // The only_significant row depends on the significant columns alone.
  const std::vector<std::string> keep = {"A", "B"};
  const SpecificityReport fewer = specificity_study(restrict_to_categories(ds, keep), {"A"}, o);
  EXPECT_EQ(fewer.rows[1].bacc, rep.rows[1].bacc);
  EXPECT_EQ(fewer.rows[1].f1, rep.rows[1].f1);

  const nlohmann::json j = specificity_to_json(rep);
  EXPECT_EQ(j.at("rows").size(), 3u);
  for (const auto& row : j.at("rows")) {
    EXPECT_TRUE(row.contains("bacc"));
    EXPECT_TRUE(row.contains("f1"));
  }
}

class HierarchyTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    panel_ = new SubjectPanel(panel_for(generate(testing::small_config(13)), Architecture::Mlp));
    run_ = new CvRun(run_cv(*panel_, testing::quick_mlp(2)));
  }
  static void TearDownTestSuite() {
    delete run_;
    delete panel_;
  }
  static SubjectPanel* panel_;
  static CvRun* run_;
};
SubjectPanel* HierarchyTest::panel_ = nullptr;
CvRun* HierarchyTest::run_ = nullptr;

TEST_F(HierarchyTest, SubSchemaValidation) {
  const CategorySchema& s = panel_->schema;
  EXPECT_NO_THROW((SubSchema{"A", {{"x", {"A_01", "A_02"}}, {"y", {"A_03", "A_04"}}}}.validate(s)));
  EXPECT_EQ(code_of([&] { SubSchema{"A", {{"x", {"A_01", "A_02"}}}}.validate(s); }), ErrorCode::InvalidSubSchema);
  EXPECT_EQ(code_of([&] { SubSchema{"A", {{"x", {"A_01", "A_02", "A_03", "A_04", "B_01"}}}}.validate(s); }),
            ErrorCode::InvalidSubSchema);
  EXPECT_EQ(code_of([&] { SubSchema{"A", {{"x", {"A_01", "A_02"}}, {"x", {"A_03", "A_04"}}}}.validate(s); }),
            ErrorCode::InvalidSubSchema);
  EXPECT_EQ(code_of([&] { SubSchema{"Q", {{"x", {"A_01"}}}}.validate(s); }), ErrorCode::InvalidSubSchema);
  const SubSchema sub{"A", {{"x", {"A_01", "A_02"}}, {"y", {"A_03", "A_04"}}}};
  const SubSchema back = SubSchema::from_json(sub.to_json());
  EXPECT_EQ(back.parent, "A");
  EXPECT_EQ(back.subcategories, sub.subcategories);
}

TEST_F(HierarchyTest, IdentityPartitionReproducesParent) {
  PermutationPlan plan;
  plan.category = "A";
  plan.n_trials = 50;
  plan.seed = 5;
  const NullDistribution parent_null = null_distribution(*run_, *panel_, plan);
  const CategoryTestResult parent = p_value(parent_null, parent_null.psi_true);
  // listed out of order on purpose
  const SubSchema identity{"A", {{"whole", {"A_03", "A_01", "A_04", "A_02"}}}};
  const auto results = hierarchical_test(*run_, *panel_, identity, plan);
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].category, "whole");
  EXPECT_EQ(results[0].psi_true, parent.psi_true);
  EXPECT_EQ(results[0].null_mean, parent.null_mean);
  EXPECT_EQ(results[0].null_std, parent.null_std);
  EXPECT_EQ(results[0].p_value, parent.p_value);
  EXPECT_EQ(results[0].exceedances, parent.exceedances);
}

TEST_F(HierarchyTest, ReportsDifference) {
  PermutationPlan plan;
  plan.n_trials = 30;
  const SubSchema sub{"A", {{"x", {"A_01", "A_02"}}, {"y", {"A_03", "A_04"}}}};
  const auto results = hierarchical_test(*run_, *panel_, sub, plan);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[0].category, "x");
  EXPECT_EQ(results[0].difference(), results[0].null_mean - results[0].psi_true);
  EXPECT_LT(results[0].difference(), 0.0);
}

TEST_F(HierarchyTest, FeatureImportanceRanksEveryColumn) {
  const FeatureImportance fi = feature_importance(*run_, *panel_, 20, 3);
  ASSERT_EQ(fi.ranked.size(), 12u);
  for (std::size_t i = 1; i < fi.ranked.size(); ++i) EXPECT_GE(fi.ranked[i - 1].importance, fi.ranked[i].importance);
  EXPECT_EQ(fi.ranked[0].feature.substr(0, 2), "A_");
  const FeatureImportance again = feature_importance(*run_, *panel_, 20, 3, MetricKind::BalancedAccuracy, 4);
  for (std::size_t i = 0; i < fi.ranked.size(); ++i) {
    EXPECT_EQ(again.ranked[i].column, fi.ranked[i].column);
    EXPECT_EQ(again.ranked[i].importance, fi.ranked[i].importance);
  }
  std::ostringstream csv;
  write_importance_csv(fi, csv);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
}

TEST(PermutationImportance, ConstantColumnScoresZero) {
  LongitudinalDataset ds = generate(testing::small_config(4));
  for (SubjectRecord& s : ds.subjects) s.visits.col(11).setConstant(0.25);
  const SubjectPanel panel = panel_for(ds, Architecture::Mlp);
  const CvRun run = run_cv(panel, testing::quick_mlp(3));
  const FeatureImportance fi = feature_importance(run, panel, 15, 1);
  const auto it = std::find_if(fi.ranked.begin(), fi.ranked.end(), [](const FeatureScore& f) { return f.column == 11; });
  ASSERT_NE(it, fi.ranked.end());
  EXPECT_EQ(it->importance, 0.0);
}

}  // namespace
}  // namespace permsig
