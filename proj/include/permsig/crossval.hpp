#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "permsig/dataset.hpp"
#include "permsig/metrics.hpp"
#include "permsig/models.hpp"

namespace permsig {

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per subject, in [0, k)

  std::vector<std::size_t> test_subjects(std::size_t fold) const;
  std::vector<std::size_t> train_subjects(std::size_t fold) const;
};

// Shuffles each class with the seeded stream and deals it round-robin into the
// folds; negatives continue dealing where positives stopped so fold sizes stay
// within one of each other. Throws InvalidConfig (k < 2), TooFewSubjects.
FoldAssignment stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed);

struct CvOptions {
  Architecture architecture = Architecture::Mlp;
  TrainConfig train = TrainConfig::cross_sectional_defaults();
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // folds trained in parallel
};

// A frozen cross-validation run: the exact pipelines (standardizer + model)
// that produced each subject's out-of-fold prediction.
struct CvRun {
  FoldAssignment folds;
  Architecture architecture = Architecture::Mlp;
  TrainConfig train_config;  // seed field holds the base seed; fold t trains with fold_seed(t)
  std::uint64_t seed = 0;
  std::vector<Predictor> models;
  std::vector<Standardizer> standardizers;
  std::vector<double> class_weights;  // R used by each fold's training
  std::vector<std::string> subject_ids;
  Labels labels;
  std::vector<double> oof_probs;
  std::map<MetricKind, double> psi;                     // pooled over all subjects
  std::vector<std::map<MetricKind, double>> fold_psi;  // per test fold

  // Provenance filled in by the CLI.
  std::string data_path;
  std::string schema_path;
  std::string dataset_digest;
  CategorySchema schema;

  std::size_t num_folds() const noexcept { return folds.k; }
  double pooled_psi(MetricKind kind) const;
  double fold_averaged_psi(MetricKind kind) const;
  std::uint64_t fold_seed(std::size_t fold) const;
};

// Model-ready view of a dataset: visit means for the MLP, full visit
// sequences for the GRU.
SubjectPanel panel_for(const LongitudinalDataset& ds, Architecture arch);

// Subset of `data` standardized with `s`; the one code path that builds model
// inputs for scoring, shared with the permutation engine.
SubjectPanel standardized_subset(const SubjectPanel& data, std::span<const std::size_t> subjects,
                                 const Standardizer& s);

// Psi for every metric kind that is defined on these labels.
std::map<MetricKind, double> score_all(std::span<const int> y, std::span<const int> y_pred);

CvRun run_cv(const SubjectPanel& data, const CvOptions& options);

// Directory layout: cvrun.json, model_<t>.json, folds.csv, oof.csv.
void save_cv_run(const CvRun& run, const std::filesystem::path& dir);
CvRun load_cv_run(const std::filesystem::path& dir);

}  // namespace permsig
