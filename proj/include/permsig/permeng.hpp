#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "permsig/crossval.hpp"
#include "permsig/dataset.hpp"
#include "permsig/metrics.hpp"

namespace permsig {

enum class PermutationMode { PerFold, Pooled };

std::string_view to_string(PermutationMode mode);
// Accepts "per-fold" / "per_fold" / "pooled". Throws InvalidConfig.
PermutationMode parse_permutation_mode(std::string_view text);

enum class Exceedance { AtLeast, Strictly };  // count psi_hat >= psi, or psi_hat > psi

struct PValueOptions {
  Exceedance exceedance = Exceedance::AtLeast;
  bool smoothing = false;  // (c + 1) / (N + 1)
};

struct PermutationPlan {
  std::string category;              // schema category name
  std::vector<std::size_t> columns;  // explicit column set; overrides `category` when non-empty
  std::size_t n_trials = 500;        // per fold in per-fold mode
  PermutationMode mode = PermutationMode::PerFold;
  MetricKind metric = MetricKind::BalancedAccuracy;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  PValueOptions p_options;

  // Throws InvalidConfig.
  void validate() const;
};

// Largest null an exhaustive plan may enumerate (10!).
inline constexpr std::uint64_t kMaxExhaustiveSamples = 3628800;

struct NullSample {
  std::size_t trial = 0;
  int fold = -1;  // -1 in pooled mode
  double psi_hat = 0.0;

  friend bool operator==(const NullSample&, const NullSample&) = default;
};

struct NullDistribution {
  std::string category;
  std::vector<std::size_t> columns;
  PermutationMode mode = PermutationMode::PerFold;
  MetricKind metric = MetricKind::BalancedAccuracy;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  std::size_t n_trials = 0;  // trials per fold (per-fold) or in total (pooled, exhaustive)
  double psi_true = 0.0;     // unpermuted pooled score of the same frozen pipelines
  std::vector<NullSample> samples;  // ordered by (fold, trial)

  std::vector<double> values() const;
};

struct CategoryTestResult {
  std::string category;
  double psi_true = 0.0;
  double null_mean = 0.0;
  double null_std = 0.0;  // sample standard deviation
  double p_value = 1.0;
  bool p_is_bound = false;  // no exceedances: p_value is the bound 1 / n_trials
  std::size_t exceedances = 0;
  std::size_t null_size = 0;
  std::size_t n_trials = 0;
  PermutationMode mode = PermutationMode::PerFold;
  MetricKind metric = MetricKind::BalancedAccuracy;
  std::uint64_t seed = 0;

  // Accuracy change caused by the permutation, null_mean - psi_true.
  double difference() const noexcept { return null_mean - psi_true; }
  // "0.036", or "<0.002" for a bound.
  std::string rendered_p() const;
};

std::string render_p_value(double p, bool is_bound);

// Moves subject i's values for `columns` to subject perm[i]. For stacked
// visit panels the whole trajectory moves; when donor and recipient have
// different visit counts the donor's trajectory is end-aligned (earliest
// visits dropped, or the first visit repeated). Throws NotAPermutation,
// DimensionMismatch.
SubjectPanel permute_columns(const SubjectPanel& data, std::span<const std::size_t> columns,
                             std::span<const std::size_t> perm);
// Throws UnknownCategory, NotAPermutation.
SubjectPanel permute_category(const SubjectPanel& data, std::string_view category,
                              std::span<const std::size_t> perm);

// Uniform permutation of [0, n) from the stream (Fisher-Yates).
std::vector<std::size_t> draw_permutation(Stream& rng, std::size_t n);
// index-th permutation of [0, n) in lexicographic order.
std::vector<std::size_t> nth_permutation(std::size_t n, std::uint64_t index);

// Scores the frozen pipelines of a CvRun on data whose column block has been
// permuted. Raw values are permuted, then each fold's standardizer is applied.
// Holds one pre-standardized copy of every test fold; safe for concurrent use
// through separate Workspace objects.
class CategoryScorer {
 public:
  struct Workspace {
    std::vector<RowMatrix> fold_rows;
  };

  // Throws MismatchedRun, UnknownCategory, InvalidConfig.
  CategoryScorer(const CvRun& cv, const SubjectPanel& data, std::vector<std::size_t> columns,
                 MetricKind metric);

  Workspace make_workspace() const;
  std::size_t num_folds() const noexcept { return fold_subjects_.size(); }
  std::size_t num_subjects() const noexcept { return data_->num_subjects(); }
  const std::vector<std::size_t>& fold_subjects(std::size_t fold) const { return fold_subjects_[fold]; }
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

  // Pooled score with no permutation applied.
  double psi_true() const;
  // `perm` over all subjects; every fold scored, metric on the pooled confusion.
  double score_pooled(std::span<const std::size_t> perm, Workspace& ws) const;
  // `perm` over the fold's test subjects (local indices); metric on that fold only.
  double score_fold(std::size_t fold, std::span<const std::size_t> perm, Workspace& ws) const;

 private:
  ConfusionMatrix fold_confusion(std::size_t fold, std::span<const std::size_t> donors,
                                 Workspace& ws) const;

  const CvRun* cv_;
  const SubjectPanel* data_;
  std::vector<std::size_t> columns_;
  MetricKind metric_;
  std::vector<std::vector<std::size_t>> fold_subjects_;
  std::vector<std::vector<std::size_t>> fold_offsets_;
  std::vector<RowMatrix> fold_standardized_;
  std::vector<Labels> fold_labels_;
};

// Column indices a plan permutes. Throws UnknownCategory, InvalidConfig.
std::vector<std::size_t> resolve_columns(const PermutationPlan& plan, const CategorySchema& schema,
                                         std::size_t num_features);

// Throws MismatchedRun, UnknownCategory, InvalidConfig, InfeasiblePlan.
NullDistribution null_distribution(const CvRun& cv, const SubjectPanel& data,
                                   const PermutationPlan& plan, std::size_t threads = 1);

// Null built from caller-supplied permutations over all subjects (pooled scoring).
NullDistribution null_distribution_from(const CvRun& cv, const SubjectPanel& data,
                                        const PermutationPlan& plan,
                                        std::span<const std::vector<std::size_t>> perms,
                                        std::size_t threads = 1);

// Throws EmptyNull.
CategoryTestResult p_value(const NullDistribution& null, double psi_true,
                           const PValueOptions& options = {});

// One result per schema category, sorted by p ascending (ties keep schema order).
std::vector<CategoryTestResult> test_all_categories(const CvRun& cv, const SubjectPanel& data,
                                                    const PermutationPlan& base_plan,
                                                    std::size_t threads = 1);

nlohmann::json result_to_json(const CategoryTestResult& result);
nlohmann::json report_to_json(std::span<const CategoryTestResult> results);
void write_report(std::span<const CategoryTestResult> results, const std::filesystem::path& path);
// category,trial,fold,psi_hat
void write_null_csv(std::span<const NullDistribution> nulls, std::ostream& out);
void print_results_table(std::span<const CategoryTestResult> results, std::ostream& out);

}  // namespace permsig
