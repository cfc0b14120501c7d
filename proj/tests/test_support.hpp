#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "permsig/crossval.hpp"
#include "permsig/synth.hpp"

namespace permsig::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("permsig_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline SynthConfig small_config(std::uint64_t seed, std::size_t n = 240) {
  SynthConfig cfg;
  cfg.n_subjects = n;
  cfg.schema = uniform_schema(3, 4);
  cfg.informative_categories = {"A"};
  cfg.positive_rate = 0.3;
  cfg.seed = seed;
  return cfg;
}

// Quick MLP run for tests that only need some frozen pipelines.
inline CvOptions quick_mlp(std::uint64_t seed, std::size_t folds = 3) {
  CvOptions o;
  o.architecture = Architecture::Mlp;
  o.train = TrainConfig::cross_sectional_defaults();
  o.train.epochs = 40;
  o.train.learning_rate = 0.01;
  o.train.hidden1 = 16;
  o.train.hidden2 = 8;
  o.folds = folds;
  o.seed = seed;
  return o;
}

// A hand-built one-fold run: `model` scores every subject of `data`, with a
// standardizer fitted on `data` itself.
inline CvRun single_fold_run(const SubjectPanel& data, Predictor model) {
  CvRun run;
  run.folds.k = 1;
  run.folds.fold_of.assign(data.num_subjects(), 0);
  run.architecture = architecture_of(model);
  run.models.push_back(std::move(model));
  std::vector<std::size_t> rows(static_cast<std::size_t>(data.rows.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  run.standardizers.push_back(fit_standardizer(data.rows, rows));
  run.labels = data.labels;
  run.subject_ids = data.subject_ids;
  run.schema = data.schema;
  return run;
}

}  // namespace permsig::testing
