#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "permsig/rng.hpp"

namespace permsig {

// A named trainable tensor. `penalized` marks weight matrices (L1 applies);
// biases are left unpenalized.
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  bool penalized = false;
};

using ParameterList = std::vector<Parameter>;
using GradientList = std::vector<Eigen::MatrixXd>;

GradientList zeros_like(const ParameterList& params);

// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), drawn row by row.
void glorot_uniform(Eigen::MatrixXd& w, Stream& rng);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// -[R*y*log(sigmoid(z)) + (1-y)*log(1-sigmoid(z))] in log-sum-exp form.
inline double weighted_bce(double logit, int y, double R) {
  return y == 1 ? R * softplus(-logit) : softplus(logit);
}

// d weighted_bce / d logit.
inline double weighted_bce_grad(double logit, int y, double R) {
  const double p = sigmoid(logit);
  return y == 1 ? R * (p - 1.0) : p;
}

// lambda * sum |w| over penalized tensors.
double l1_penalty(const ParameterList& params, double lambda);
// Adds lambda * sign(w) (sign(0) = 0) to the penalized entries of grads.
void add_l1_subgradient(const ParameterList& params, double lambda, GradientList& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  GradientList first_moment;
  GradientList second_moment;
  std::int64_t step = 0;

  static AdamState for_parameters(const ParameterList& params);
};

// Bias-corrected Adam. Throws ShapeMismatch.
void adam_step(ParameterList& params, const GradientList& grads, AdamState& state,
               const AdamConfig& config);

// FNV-1a over names, shapes and raw bytes of every tensor.
std::uint64_t parameter_checksum(const ParameterList& params);

}  // namespace permsig
