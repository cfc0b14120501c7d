#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "permsig/dataset.hpp"
#include "permsig/nn.hpp"
#include "permsig/rng.hpp"

namespace permsig {

// Three fully connected layers, ReLU + inverted dropout after each hidden
// layer, one logit out.
class MlpPredictor {
 public:
  enum Slot : std::size_t { kW1, kB1, kW2, kB2, kW3, kB3 };

  struct Cache {
    RowMatrix input;
    RowMatrix pre1, post1;  // post includes the dropout mask
    RowMatrix pre2, post2;
    RowMatrix keep1, keep2;  // dropout multipliers (0 or 1/(1-p))
    std::uint64_t version = 0;
    bool valid = false;
  };

  MlpPredictor(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, double dropout_rate);

  // Glorot-uniform weights, zero biases.
  void initialize(Stream& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden1() const noexcept { return hidden1_; }
  std::size_t hidden2() const noexcept { return hidden2_; }
  double dropout_rate() const noexcept { return dropout_rate_; }

  const ParameterList& parameters() const noexcept { return params_; }
  ParameterList& mutable_parameters() noexcept {
    ++version_;
    return params_;
  }

  // Inference: one logit per row, dropout off. Throws DimensionMismatch.
  Eigen::VectorXd logits(const RowMatrix& X) const;
  // Train mode: dropout masks drawn from `mask_rng` (row-major, layer by layer).
  Eigen::VectorXd forward_train(const RowMatrix& X, Stream& mask_rng, Cache& cache) const;
  // Gradients of sum_i dlogits[i] * logit_i. Throws StaleCache.
  GradientList backward(const Cache& cache, const Eigen::VectorXd& dlogits) const;

 private:
  std::size_t input_dim_, hidden1_, hidden2_;
  double dropout_rate_;
  ParameterList params_;
  std::uint64_t version_ = 0;
};

// Single GRU layer (r, z, n gate layout as in PyTorch) over the visit
// sequence, then FC -> ReLU -> FC on the last hidden state.
class GruPredictor {
 public:
  enum Slot : std::size_t { kWih, kWhh, kBih, kBhh, kWfc1, kBfc1, kWfc2, kBfc2 };

  struct StepCache {
    Eigen::VectorXd h_prev, r, z, n, gh_n;
  };
  struct SequenceCache {
    std::size_t row_begin = 0;
    std::vector<StepCache> steps;
    Eigen::VectorXd h_last, fc_pre, fc_post;
  };
  struct Cache {
    RowMatrix input;
    std::vector<SequenceCache> sequences;
    std::uint64_t version = 0;
    bool valid = false;
  };

  GruPredictor(std::size_t input_dim, std::size_t hidden, std::size_t fc_hidden);

  void initialize(Stream& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t fc_hidden() const noexcept { return fc_hidden_; }

  const ParameterList& parameters() const noexcept { return params_; }
  ParameterList& mutable_parameters() noexcept {
    ++version_;
    return params_;
  }

  // One logit per subject; subject i owns rows [offsets[i], offsets[i+1]).
  // Throws DimensionMismatch, EmptySequence.
  Eigen::VectorXd logits(const RowMatrix& rows, std::span<const std::size_t> offsets) const;
  Eigen::VectorXd forward_train(const RowMatrix& rows, std::span<const std::size_t> offsets,
                                Cache& cache) const;
  GradientList backward(const Cache& cache, const Eigen::VectorXd& dlogits) const;

 private:
  std::size_t input_dim_, hidden_, fc_hidden_;
  ParameterList params_;
  std::uint64_t version_ = 0;
};

enum class Architecture { Mlp, Gru };

std::string_view to_string(Architecture arch);
// Accepts "mlp" / "gru". Throws InvalidConfig.
Architecture parse_architecture(std::string_view text);

// Uniform handle over both networks. Inference is const and thread-safe.
using Predictor = std::variant<MlpPredictor, GruPredictor>;

Architecture architecture_of(const Predictor& model);
const ParameterList& parameters(const Predictor& model);
ParameterList& mutable_parameters(Predictor& model);
std::size_t input_dim(const Predictor& model);
double l1_penalty(const Predictor& model, double lambda);
std::uint64_t parameter_checksum(const Predictor& model);

Eigen::VectorXd predict_logits(const Predictor& model, const RowMatrix& rows,
                               std::span<const std::size_t> offsets);
Eigen::VectorXd predict_logits(const Predictor& model, const SubjectPanel& panel);
std::vector<double> predict_proba(const Predictor& model, const SubjectPanel& panel);
// Label = probability >= threshold.
Labels predict(const Predictor& model, const SubjectPanel& panel, double threshold = 0.5);
Labels threshold_probabilities(std::span<const double> probabilities, double threshold = 0.5);

struct TrainConfig {
  std::size_t epochs = 55;
  double learning_rate = 1e-3;
  double l1_lambda = 1e-4;
  std::optional<double> class_weight_R;  // unset: N_negative / N_positive of the training rows
  double dropout_rate = 0.2;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t hidden1 = 64;  // MLP
  std::size_t hidden2 = 32;  // MLP
  std::size_t gru_hidden = 32;
  std::size_t gru_fc_hidden = 32;

  static TrainConfig cross_sectional_defaults();
  static TrainConfig longitudinal_defaults();
  static TrainConfig defaults_for(Architecture arch);

  // Throws InvalidConfig.
  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

// Freshly initialized network for `input_dim` features, weights drawn from config.seed.
Predictor init_predictor(Architecture arch, std::size_t input_dim, const TrainConfig& config);

// N_negative / N_positive. Throws SingleClassTrainingSet.
double class_weight_ratio(std::span<const int> labels);

// Mean weighted BCE over the batch plus the L1 penalty, in train mode (dropout
// masks drawn from `mask_key`), together with its exact gradient.
struct ObjectiveValue {
  double loss = 0.0;
  GradientList gradients;
};
ObjectiveValue objective_and_gradient(const Predictor& model, const SubjectPanel& batch, double R,
                                      double l1_lambda, std::uint64_t mask_key);
double objective(const Predictor& model, const SubjectPanel& batch, double R, double l1_lambda,
                 std::uint64_t mask_key);

// Sum of weighted BCE over all subjects, inference mode.
double total_weighted_loss(const Predictor& model, const SubjectPanel& panel, double R);

// Full training loop on already standardized inputs: seeded shuffling, dropout
// masks, Adam, L1. Throws SingleClassTrainingSet, NonFiniteLoss.
Predictor train(Architecture arch, const SubjectPanel& train_data, const TrainConfig& config);

// Versioned JSON model files.
nlohmann::json predictor_to_json(const Predictor& model);
Predictor predictor_from_json(const nlohmann::json& doc);
void save_predictor(const Predictor& model, const std::filesystem::path& path);
Predictor load_predictor(const std::filesystem::path& path);

}  // namespace permsig
