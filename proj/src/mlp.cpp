#include <cmath>

#include "permsig/error.hpp"
#include "permsig/models.hpp"

namespace permsig {

namespace {

RowMatrix affine(const RowMatrix& in, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
  RowMatrix out = in * w.transpose();
  out.rowwise() += b.col(0).transpose();
  return out;
}

RowMatrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Stream& rng) {
  if (p <= 0.0) return RowMatrix::Ones(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  RowMatrix mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform() >= p ? keep_scale : 0.0;
  }
  return mask;
}

}  // namespace

MlpPredictor::MlpPredictor(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
                           double dropout_rate)
    : input_dim_(input_dim), hidden1_(hidden1), hidden2_(hidden2), dropout_rate_(dropout_rate) {
  if (input_dim == 0 || hidden1 == 0 || hidden2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "MLP dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
  const auto m = static_cast<Eigen::Index>(input_dim);
  const auto h1 = static_cast<Eigen::Index>(hidden1);
  const auto h2 = static_cast<Eigen::Index>(hidden2);
  params_ = {
      {"fc1.weight", Eigen::MatrixXd::Zero(h1, m), true},
      {"fc1.bias", Eigen::MatrixXd::Zero(h1, 1), false},
      {"fc2.weight", Eigen::MatrixXd::Zero(h2, h1), true},
      {"fc2.bias", Eigen::MatrixXd::Zero(h2, 1), false},
      {"fc3.weight", Eigen::MatrixXd::Zero(1, h2), true},
      {"fc3.bias", Eigen::MatrixXd::Zero(1, 1), false},
  };
}

void MlpPredictor::initialize(Stream& rng) {
  ++version_;
  for (Parameter& p : params_) {
    if (p.penalized) {
      glorot_uniform(p.value, rng);
    } else {
      p.value.setZero();
    }
  }
}

Eigen::VectorXd MlpPredictor::logits(const RowMatrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "MLP expects " + std::to_string(input_dim_) +
                                                  " features, got " + std::to_string(X.cols()));
  }
  RowMatrix h1 = affine(X, params_[kW1].value, params_[kB1].value).cwiseMax(0.0);
  RowMatrix h2 = affine(h1, params_[kW2].value, params_[kB2].value).cwiseMax(0.0);
  RowMatrix out = affine(h2, params_[kW3].value, params_[kB3].value);
  return out.col(0);
}

Eigen::VectorXd MlpPredictor::forward_train(const RowMatrix& X, Stream& mask_rng,
                                            Cache& cache) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "MLP expects " + std::to_string(input_dim_) +
                                                  " features, got " + std::to_string(X.cols()));
  }
  cache.input = X;
  cache.pre1 = affine(X, params_[kW1].value, params_[kB1].value);
  cache.keep1 = dropout_mask(X.rows(), cache.pre1.cols(), dropout_rate_, mask_rng);
  cache.post1 = cache.pre1.cwiseMax(0.0).cwiseProduct(cache.keep1);
  cache.pre2 = affine(cache.post1, params_[kW2].value, params_[kB2].value);
  cache.keep2 = dropout_mask(X.rows(), cache.pre2.cols(), dropout_rate_, mask_rng);
  cache.post2 = cache.pre2.cwiseMax(0.0).cwiseProduct(cache.keep2);
  RowMatrix out = affine(cache.post2, params_[kW3].value, params_[kB3].value);
  cache.version = version_;
  cache.valid = true;
  return out.col(0);
}

GradientList MlpPredictor::backward(const Cache& cache, const Eigen::VectorXd& dlogits) const {
  if (!cache.valid || cache.version != version_) {
    throw Error(ErrorCode::StaleCache, "backward needs a train-mode forward on current parameters");
  }
  if (dlogits.size() != cache.input.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "dlogits length differs from batch size");
  }
  GradientList g = zeros_like(params_);

  // fc3
  g[kW3] = dlogits.transpose() * cache.post2;
  g[kB3](0, 0) = dlogits.sum();
  RowMatrix d2 = dlogits * params_[kW3].value;  // n x h2
  d2 = d2.cwiseProduct(cache.keep2).cwiseProduct(
      (cache.pre2.array() > 0.0).cast<double>().matrix());

  // fc2
  g[kW2] = d2.transpose() * cache.post1;
  g[kB2] = d2.colwise().sum().transpose();
  RowMatrix d1 = d2 * params_[kW2].value;  // n x h1
  d1 = d1.cwiseProduct(cache.keep1).cwiseProduct(
      (cache.pre1.array() > 0.0).cast<double>().matrix());

  // fc1
  g[kW1] = d1.transpose() * cache.input;
  g[kB1] = d1.colwise().sum().transpose();
  return g;
}

}  // namespace permsig
