#include "permsig/nn.hpp"

#include <cstring>

#include "permsig/error.hpp"
#include "permsig/rng.hpp"

namespace permsig {

GradientList zeros_like(const ParameterList& params) {
  GradientList out;
  out.reserve(params.size());
  for (const Parameter& p : params) out.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
  return out;
}

void glorot_uniform(Eigen::MatrixXd& w, Stream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
  }
}

double l1_penalty(const ParameterList& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double total = 0.0;
  for (const Parameter& p : params) {
    if (p.penalized) total += p.value.cwiseAbs().sum();
  }
  return lambda * total;
}

void add_l1_subgradient(const ParameterList& params, double lambda, GradientList& grads) {
  if (lambda == 0.0) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].penalized) continue;
    grads[i] += lambda * params[i].value.unaryExpr([](double w) {
      return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
    });
  }
}

AdamState AdamState::for_parameters(const ParameterList& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

void adam_step(ParameterList& params, const GradientList& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient/state count differs from parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd& p = params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
        state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols() ||
        state.second_moment[i].rows() != p.rows() || state.second_moment[i].cols() != p.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "shape mismatch for parameter '" + params[i].name + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& m = state.first_moment[i];
    Eigen::MatrixXd& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].value.array() -=
        config.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + config.epsilon);
  }
}

std::uint64_t parameter_checksum(const ParameterList& params) {
  std::uint64_t h = 0;
  for (const Parameter& p : params) {
    const auto* name = reinterpret_cast<const unsigned char*>(p.name.data());
    h = derive_key({h, fnv1a64({name, p.name.size()}), static_cast<std::uint64_t>(p.value.rows()),
                    static_cast<std::uint64_t>(p.value.cols())});
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
    h = derive_key({h, fnv1a64({bytes, static_cast<std::size_t>(p.value.size()) * sizeof(double)})});
  }
  return h;
}

}  // namespace permsig
