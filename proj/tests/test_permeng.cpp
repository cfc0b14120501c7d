#include <gtest/gtest.h>

#include <functional>
#include <algorithm>
#include <numeric>
#include <sstream>

#include "permsig/error.hpp"
#include "permsig/permeng.hpp"
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

SubjectPanel three_subjects() {
  SubjectPanel p;
  p.schema = CategorySchema({{"X", {"x"}}, {"Y", {"y"}}});
  p.rows.resize(3, 2);
  p.rows << 1, 10, 2, 20, 3, 30;
  p.offsets = {0, 1, 2, 3};
  p.labels = {0, 1, 0};
  p.subject_ids = {"a", "b", "c"};
  return p;
}

NullDistribution null_of(std::vector<double> values, std::size_t trials) {
  NullDistribution n;
  n.n_trials = trials;
  for (std::size_t i = 0; i < values.size(); ++i) n.samples.push_back({i, -1, values[i]});
  return n;
}

// ---------------------------------------------------------------------------
// permute_category

TEST(PermuteCategory, HandAppliedPermutation) {
  const SubjectPanel p = three_subjects();
  const std::vector<std::size_t> pi = {1, 2, 0};
  const SubjectPanel q = permute_category(p, "X", pi);
  EXPECT_EQ(q.rows.col(0), Eigen::Vector3d(3, 1, 2));
  EXPECT_EQ(q.rows.col(1), p.rows.col(1));
  EXPECT_EQ(p.rows(0, 0), 1.0);  // input untouched
}

TEST(PermuteCategory, IdentityAndConstantAreNoOps) {
  SubjectPanel p = three_subjects();
  const std::vector<std::size_t> id = {0, 1, 2};
  EXPECT_EQ(permute_category(p, "Y", id).rows, p.rows);
  p.rows.col(1).setConstant(4.5);
  const std::vector<std::size_t> pi = {2, 0, 1};
  EXPECT_EQ(permute_category(p, "Y", pi).rows, p.rows);
}

TEST(PermuteCategory, Errors) {
  const SubjectPanel p = three_subjects();
  const std::vector<std::size_t> dup = {0, 0, 1};
  const std::vector<std::size_t> short_perm = {0, 1};
  const std::vector<std::size_t> id = {0, 1, 2};
  EXPECT_EQ(code_of([&] { permute_category(p, "X", dup); }), ErrorCode::NotAPermutation);
  EXPECT_EQ(code_of([&] { permute_category(p, "X", short_perm); }), ErrorCode::NotAPermutation);
  EXPECT_EQ(code_of([&] { permute_category(p, "Q", id); }), ErrorCode::UnknownCategory);
}

TEST(PermuteCategory, PreservesColumnMultisets) {
  const SubjectPanel p = panel_for(generate(testing::small_config(3, 60)), Architecture::Mlp);
  Stream rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const auto pi = draw_permutation(rng, p.num_subjects());
    const SubjectPanel q = permute_category(p, "B", pi);
    for (Eigen::Index c = 0; c < p.rows.cols(); ++c) {
      std::vector<double> a(p.rows.col(c).begin(), p.rows.col(c).end());
      std::vector<double> b(q.rows.col(c).begin(), q.rows.col(c).end());
      if (c < 4 || c >= 8) {
        EXPECT_EQ(a, b);
      } else {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
      }
    }
  }
}

TEST(PermuteCategory, TrajectoriesMoveAsUnits) {
  SubjectPanel p;
  p.schema = CategorySchema({{"X", {"x"}}, {"Y", {"y"}}});
  p.rows.resize(5, 2);
  // subject 0: 2 visits, subject 1: 3 visits
  p.rows << 1, 0, 2, 0, 5, 0, 6, 0, 7, 0;
  p.offsets = {0, 2, 5};
  p.labels = {0, 1};
  p.subject_ids = {"a", "b"};
  const std::vector<std::size_t> swap = {1, 0};
  const SubjectPanel q = permute_category(p, "X", swap);
  // b receives a's two visits end-aligned, its first visit repeating a's first
  EXPECT_EQ(q.rows.col(0).tail(3), Eigen::Vector3d(1, 1, 2));
  // a receives b's last two visits
  EXPECT_EQ(q.rows.col(0).head(2), Eigen::Vector2d(6, 7));
}

// ---------------------------------------------------------------------------
// p_value

TEST(PValue, HandCountAtLeast) {
  const CategoryTestResult r = p_value(null_of({0.5, 0.6, 0.7, 0.8}, 4), 0.65);
  EXPECT_EQ(r.p_value, 0.5);
  EXPECT_EQ(r.exceedances, 2u);
  EXPECT_FALSE(r.p_is_bound);
  EXPECT_DOUBLE_EQ(r.null_mean, 0.65);
}

TEST(PValue, TiesCountUnlessStrict) {
  const NullDistribution n = null_of({0.7, 0.7, 0.7}, 3);
  EXPECT_EQ(p_value(n, 0.7).p_value, 1.0);
  const CategoryTestResult strict = p_value(n, 0.7, {Exceedance::Strictly, false});
  EXPECT_TRUE(strict.p_is_bound);
  EXPECT_EQ(strict.null_std, 0.0);
  EXPECT_EQ(strict.null_mean, 0.7);
}

TEST(PValue, ZeroExceedancesIsABound) {
  const CategoryTestResult r = p_value(null_of(std::vector<double>(500, 0.5), 500), 0.9);
  EXPECT_TRUE(r.p_is_bound);
  EXPECT_EQ(r.p_value, 1.0 / 500);
  EXPECT_EQ(r.rendered_p(), "<0.002");
}

TEST(PValue, SmoothingAndRendering) {
  const CategoryTestResult r = p_value(null_of({0.1, 0.2, 0.3}, 3), 0.25, {Exceedance::AtLeast, true});
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 4.0);
  EXPECT_EQ(render_p_value(0.036, false), "0.036");
  EXPECT_EQ(render_p_value(0.5, false), "0.500");
  EXPECT_EQ(render_p_value(0.0004, true), "<0.0004");
}

TEST(PValue, EmptyNullRejected) {
  EXPECT_EQ(code_of([] { p_value(NullDistribution{}, 0.5); }), ErrorCode::EmptyNull);
}

TEST(PValue, NonIncreasingInPsi) {
  Stream rng(5);
  std::vector<double> v(200);
  for (double& x : v) x = std::round(rng.uniform() * 40) / 40;
  const NullDistribution n = null_of(v, 200);
  double prev = 2.0;
  for (double psi = -0.05; psi <= 1.05; psi += 0.0125) {
    const double p = p_value(n, psi).p_value;
    EXPECT_LE(p, prev) << psi;
    prev = p;
  }
}

TEST(Permutations, NthMatchesLexicographicOrder) {
  std::vector<std::size_t> cur = {0, 1, 2, 3, 4};
  std::uint64_t i = 0;
  do {
    EXPECT_EQ(nth_permutation(5, i++), cur);
  } while (std::next_permutation(cur.begin(), cur.end()));
  EXPECT_EQ(i, 120u);
}

// ---------------------------------------------------------------------------
// null_distribution on a trained run

class EngineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthConfig cfg = testing::small_config(31);
    cfg.schema = CategorySchema({{"A", {"a1", "a2", "a3"}}, {"B", {"b1", "b2"}}, {"K", {"k1", "k2"}}});
    LongitudinalDataset ds = generate(cfg);
    for (SubjectRecord& s : ds.subjects) s.visits.col(6).setConstant(2.5);  // k2 constant
    for (SubjectRecord& s : ds.subjects) s.visits.col(5).setConstant(-1.0);  // k1 constant
    panel_ = new SubjectPanel(panel_for(ds, Architecture::Mlp));
    run_ = new CvRun(run_cv(*panel_, testing::quick_mlp(8)));
  }
  static void TearDownTestSuite() {
    delete run_;
    delete panel_;
  }
  static PermutationPlan plan(const std::string& category, std::size_t trials = 40) {
    PermutationPlan p;
    p.category = category;
    p.n_trials = trials;
    p.seed = 99;
    return p;
  }
  static SubjectPanel* panel_;
  static CvRun* run_;
};
SubjectPanel* EngineTest::panel_ = nullptr;
CvRun* EngineTest::run_ = nullptr;

TEST_F(EngineTest, ConstantCategoryLeavesScoreUnchanged) {
  for (PermutationMode mode : {PermutationMode::PerFold, PermutationMode::Pooled}) {
    PermutationPlan p = plan("K");
    p.mode = mode;
    const NullDistribution n = null_distribution(*run_, *panel_, p);
    const CategoryTestResult r = p_value(n, n.psi_true);
    if (mode == PermutationMode::Pooled) {
      for (const NullSample& s : n.samples) EXPECT_EQ(s.psi_hat, n.psi_true);
      EXPECT_EQ(r.null_mean, r.psi_true);
      EXPECT_EQ(r.p_value, 1.0);
    } else {
      for (const NullSample& s : n.samples) {
        EXPECT_EQ(s.psi_hat, run_->fold_psi[static_cast<std::size_t>(s.fold)].at(MetricKind::BalancedAccuracy));
      }
    }
  }
}

TEST_F(EngineTest, PsiTrueMatchesTheRun) {
  const NullDistribution n = null_distribution(*run_, *panel_, plan("A", 2));
  EXPECT_EQ(n.psi_true, run_->pooled_psi(MetricKind::BalancedAccuracy));
}

TEST_F(EngineTest, SampleCountsPerMode) {
  PermutationPlan p = plan("B", 7);
  EXPECT_EQ(null_distribution(*run_, *panel_, p).samples.size(), 21u);
  p.mode = PermutationMode::Pooled;
  EXPECT_EQ(null_distribution(*run_, *panel_, p).samples.size(), 7u);
}

TEST_F(EngineTest, ThreadCountDoesNotChangeTheNull) {
  for (PermutationMode mode : {PermutationMode::PerFold, PermutationMode::Pooled}) {
    PermutationPlan p = plan("A", 30);
    p.mode = mode;
    const NullDistribution one = null_distribution(*run_, *panel_, p, 1);
    EXPECT_EQ(null_distribution(*run_, *panel_, p, 2).samples, one.samples);
    EXPECT_EQ(null_distribution(*run_, *panel_, p, 8).samples, one.samples);
  }
}

TEST_F(EngineTest, SeedControlsTheDraws) {
  PermutationPlan p = plan("A", 30);
  const NullDistribution a = null_distribution(*run_, *panel_, p);
  EXPECT_EQ(null_distribution(*run_, *panel_, p).samples, a.samples);
  p.seed = 100;
  EXPECT_NE(null_distribution(*run_, *panel_, p).samples, a.samples);
}

TEST_F(EngineTest, ModelsStayFrozen) {
  std::vector<std::uint64_t> before;
  for (const Predictor& m : run_->models) before.push_back(parameter_checksum(m));
  test_all_categories(*run_, *panel_, plan("", 10), 2);
  for (std::size_t t = 0; t < before.size(); ++t) EXPECT_EQ(parameter_checksum(run_->models[t]), before[t]);
}

TEST_F(EngineTest, InformativeCategoryRanksFirst) {
  const auto results = test_all_categories(*run_, *panel_, plan("", 100));
  ASSERT_EQ(results.size(), 3u);
  EXPECT_EQ(results[0].category, "A");
  EXPECT_LT(results[0].p_value, 0.01);
  EXPECT_LT(results[0].null_mean, results[0].psi_true - 0.05);
  for (std::size_t i = 1; i < results.size(); ++i) EXPECT_LE(results[i - 1].p_value, results[i].p_value);
}

TEST_F(EngineTest, PooledScoringMatchesPermuteThenPredict) {
  const CategoryScorer scorer(*run_, *panel_, panel_->schema.column_indices("A"), MetricKind::BalancedAccuracy);
  CategoryScorer::Workspace ws = scorer.make_workspace();
  Stream rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pi = draw_permutation(rng, panel_->num_subjects());
    const SubjectPanel permuted = permute_category(*panel_, "A", pi);
    std::vector<int> pred(panel_->num_subjects());
    for (std::size_t t = 0; t < run_->num_folds(); ++t) {
      const auto test = run_->folds.test_subjects(t);
      const Labels lab = predict(run_->models[t], standardized_subset(permuted, test, run_->standardizers[t]));
      for (std::size_t j = 0; j < test.size(); ++j) pred[test[j]] = lab[j];
    }
    EXPECT_EQ(scorer.score_pooled(pi, ws), evaluate(MetricKind::BalancedAccuracy, panel_->labels, pred));
  }
}

TEST_F(EngineTest, MismatchedDataRejected) {
  SubjectPanel other = *panel_;
  other.labels[0] = 1 - other.labels[0];
  EXPECT_EQ(code_of([&] { null_distribution(*run_, other, plan("A")); }), ErrorCode::MismatchedRun);
  SubjectPanel shifted = *panel_;
  shifted.rows.array() += 3.0;
  EXPECT_EQ(code_of([&] { null_distribution(*run_, shifted, plan("A")); }), ErrorCode::MismatchedRun);
  EXPECT_EQ(code_of([&] { null_distribution(*run_, *panel_, plan("nope")); }), ErrorCode::UnknownCategory);
  PermutationPlan p = plan("A");
  p.exhaustive = true;
  EXPECT_EQ(code_of([&] { null_distribution(*run_, *panel_, p); }), ErrorCode::InfeasiblePlan);
}

TEST_F(EngineTest, ReportAndNullDump) {
  PermutationPlan p = plan("B", 3);
  p.mode = PermutationMode::Pooled;
  const NullDistribution n = null_distribution(*run_, *panel_, p);
  std::ostringstream csv;
  write_null_csv(std::span<const NullDistribution>(&n, 1), csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "category,trial,fold,psi_hat");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("B,0,pooled,", 0), 0u) << line;

  const CategoryTestResult r = p_value(n, n.psi_true);
  const nlohmann::json j = report_to_json(std::span<const CategoryTestResult>(&r, 1));
  const auto& row = j.at("results").at(0);
  for (const char* key : {"psi_true", "null_mean", "null_std", "p_value", "p_is_bound", "n_trials", "mode", "seed"}) {
    EXPECT_TRUE(row.contains(key)) << key;
  }
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration against a brute-force reimplementation

class ExhaustiveTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const SubjectPanel big = panel_for(generate(testing::small_config(41, 200)), Architecture::Mlp);
    std::vector<std::size_t> all(big.num_subjects());
    std::iota(all.begin(), all.end(), std::size_t{0});
    TrainConfig cfg = testing::quick_mlp(1).train;
    cfg.seed = 5;
    const Predictor model = train(Architecture::Mlp, standardized_subset(big, all, fit_standardizer(big.rows, all)), cfg);
    std::vector<std::size_t> pick;
    for (std::size_t i = 0, pos = 0, neg = 0; i < big.num_subjects() && pick.size() < 5; ++i) {
      if (big.labels[i] == 1 && pos < 2) { pick.push_back(i); ++pos; }
      if (big.labels[i] == 0 && neg < 3) { pick.push_back(i); ++neg; }
    }
    small = big.select(pick);
    run = testing::single_fold_run(small, model);
  }

  // Applies every permutation by hand and scores it with the definitional BACC.
  std::vector<double> brute_force(const std::vector<std::size_t>& cols, double& psi_true) const {
    auto score = [&](const std::vector<std::size_t>& pi) {
      RowMatrix raw = small.rows;
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c : cols) raw(static_cast<Eigen::Index>(pi[i]), static_cast<Eigen::Index>(c)) =
            small.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      }
      SubjectPanel p = small;
      p.rows = apply_standardizer(run.standardizers[0], raw);
      const Labels pred = predict(run.models[0], p);
      double tp = 0, tn = 0, pos = 0, neg = 0;
      for (std::size_t i = 0; i < 5; ++i) {
        if (small.labels[i] == 1) { ++pos; tp += pred[i]; } else { ++neg; tn += 1 - pred[i]; }
      }
      return (tp / pos + tn / neg) / 2;
    };
    std::vector<std::size_t> pi = {0, 1, 2, 3, 4};
    psi_true = score(pi);
    std::vector<double> out;
    do out.push_back(score(pi));
    while (std::next_permutation(pi.begin(), pi.end()));
    return out;
  }

  SubjectPanel small;
  CvRun run;
};

TEST_F(ExhaustiveTest, MatchesBruteForce) {
  const std::vector<std::size_t> cols = small.schema.column_indices("A");
  double psi = 0.0;
  std::vector<double> expected = brute_force(cols, psi);
  std::sort(expected.begin(), expected.end());
  const double expected_p =
      static_cast<double>(std::count_if(expected.begin(), expected.end(), [&](double v) { return v >= psi; })) / 120.0;

  for (PermutationMode mode : {PermutationMode::PerFold, PermutationMode::Pooled}) {
    PermutationPlan plan;
    plan.category = "A";
    plan.exhaustive = true;
    plan.mode = mode;
    const NullDistribution n = null_distribution(run, small, plan);
    ASSERT_EQ(n.samples.size(), 120u);
    EXPECT_EQ(n.psi_true, psi);
    std::vector<double> got = n.values();
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expected);
    EXPECT_EQ(p_value(n, n.psi_true).p_value, expected_p);
  }
}

TEST_F(ExhaustiveTest, SampledModeOverAllPermutationsAgrees) {
  PermutationPlan plan;
  plan.category = "A";
  plan.exhaustive = true;
  plan.mode = PermutationMode::Pooled;
  std::vector<double> exhaustive = null_distribution(run, small, plan).values();

  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> pi = {0, 1, 2, 3, 4};
  do perms.push_back(pi);
  while (std::next_permutation(pi.begin(), pi.end()));
  Stream rng(3);
  rng.shuffle(std::span<std::vector<std::size_t>>(perms));
  plan.exhaustive = false;
  std::vector<double> sampled = null_distribution_from(run, small, plan, perms, 3).values();
  std::sort(exhaustive.begin(), exhaustive.end());
  std::sort(sampled.begin(), sampled.end());
  EXPECT_EQ(sampled, exhaustive);
}

}  // namespace
}  // namespace permsig
