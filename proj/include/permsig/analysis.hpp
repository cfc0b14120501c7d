#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "permsig/crossval.hpp"
#include "permsig/dataset.hpp"
#include "permsig/permeng.hpp"

namespace permsig {

// Names of the categories whose p-value is below `threshold`.
std::set<std::string> significant_categories(std::span<const CategoryTestResult> results,
                                             double threshold = 0.05);

// ---------------------------------------------------------------------------
// Specificity: retrain on the significant categories only, and on the rest.

struct SpecificityRow {
  std::string condition;  // "all", "only_significant", "only_nonsignificant"
  std::vector<std::string> categories;
  double bacc = 0.0;
  double f1 = 0.0;
};

struct SpecificityReport {
  std::vector<std::string> significant;  // schema order
  std::array<SpecificityRow, 3> rows;
};

// Three independent run_cv calls with the same options. Throws
// DegenerateSubset (empty significant set or no complement), UnknownCategory.
SpecificityReport specificity_study(const LongitudinalDataset& ds, const std::set<std::string>& significant,
                                    const CvOptions& options);

nlohmann::json specificity_to_json(const SpecificityReport& report);
void print_specificity_table(const SpecificityReport& report, std::ostream& out);

// ---------------------------------------------------------------------------
// Hierarchical testing of sub-blocks of one category against the same frozen run.

struct SubSchema {
  std::string parent;
  std::vector<Category> subcategories;

  // Throws InvalidSubSchema unless the sub-categories exactly partition the
  // parent's columns.
  void validate(const CategorySchema& schema) const;

  static SubSchema from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

SubSchema load_subschema(const std::filesystem::path& path);

// One result per sub-category, in sub-schema order. `plan` supplies trials,
// mode, metric and seed; its category is ignored.
std::vector<CategoryTestResult> hierarchical_test(const CvRun& cv, const SubjectPanel& data,
                                                  const SubSchema& sub, const PermutationPlan& plan,
                                                  std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Single-column permutation importance.

struct FeatureScore {
  std::string feature;
  std::size_t column = 0;
  double importance = 0.0;  // psi_true - mean psi_hat
  double null_mean = 0.0;
};

struct FeatureImportance {
  MetricKind metric = MetricKind::BalancedAccuracy;
  double psi_true = 0.0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  std::vector<FeatureScore> ranked;  // importance descending, ties by column
};

// Pooled-mode nulls, one per column.
FeatureImportance feature_importance(const CvRun& cv, const SubjectPanel& data, std::size_t n_trials,
                                     std::uint64_t seed, MetricKind metric = MetricKind::BalancedAccuracy,
                                     std::size_t threads = 1);

nlohmann::json importance_to_json(const FeatureImportance& fi);
// rank,feature,column,importance,null_mean
void write_importance_csv(const FeatureImportance& fi, std::ostream& out);
void print_importance_table(const FeatureImportance& fi, std::ostream& out, std::size_t limit = 20);

}  // namespace permsig
