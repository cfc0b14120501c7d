#include <cmath>

#include "permsig/error.hpp"
#include "permsig/models.hpp"

namespace permsig {

namespace {

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

void check_layout(const RowMatrix& rows, std::span<const std::size_t> offsets, std::size_t m) {
  if (static_cast<std::size_t>(rows.cols()) != m) {
    throw Error(ErrorCode::DimensionMismatch, "GRU expects " + std::to_string(m) +
                                                  " features, got " + std::to_string(rows.cols()));
  }
  if (offsets.empty() || offsets.front() != 0 ||
      offsets.back() != static_cast<std::size_t>(rows.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "sequence offsets do not cover the input rows");
  }
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
    if (offsets[i + 1] <= offsets[i]) {
      throw Error(ErrorCode::EmptySequence, "subject " + std::to_string(i) + " has no visits");
    }
  }
}

}  // namespace

GruPredictor::GruPredictor(std::size_t input_dim, std::size_t hidden, std::size_t fc_hidden)
    : input_dim_(input_dim), hidden_(hidden), fc_hidden_(fc_hidden) {
  if (input_dim == 0 || hidden == 0 || fc_hidden == 0) {
    throw Error(ErrorCode::InvalidConfig, "GRU dimensions must be positive");
  }
  const auto m = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto f = static_cast<Eigen::Index>(fc_hidden);
  params_ = {
      {"gru.weight_ih", Eigen::MatrixXd::Zero(3 * h, m), true},
      {"gru.weight_hh", Eigen::MatrixXd::Zero(3 * h, h), true},
      {"gru.bias_ih", Eigen::MatrixXd::Zero(3 * h, 1), false},
      {"gru.bias_hh", Eigen::MatrixXd::Zero(3 * h, 1), false},
      {"fc1.weight", Eigen::MatrixXd::Zero(f, h), true},
      {"fc1.bias", Eigen::MatrixXd::Zero(f, 1), false},
      {"fc2.weight", Eigen::MatrixXd::Zero(1, f), true},
      {"fc2.bias", Eigen::MatrixXd::Zero(1, 1), false},
  };
}

void GruPredictor::initialize(Stream& rng) {
  ++version_;
  const auto h = static_cast<Eigen::Index>(hidden_);
  for (Parameter& p : params_) {
    if (!p.penalized) {
      p.value.setZero();
      continue;
    }
    if (p.name.rfind("gru.", 0) == 0) {
      // Each gate block is initialized as its own H x fan_in matrix.
      for (Eigen::Index gate = 0; gate < 3; ++gate) {
        Eigen::MatrixXd block(h, p.value.cols());
        glorot_uniform(block, rng);
        p.value.middleRows(gate * h, h) = block;
      }
    } else {
      glorot_uniform(p.value, rng);
    }
  }
}

Eigen::VectorXd GruPredictor::logits(const RowMatrix& rows,
                                     std::span<const std::size_t> offsets) const {
  check_layout(rows, offsets, input_dim_);
  const auto H = static_cast<Eigen::Index>(hidden_);
  const Eigen::MatrixXd& Whh = params_[kWhh].value;
  const Eigen::VectorXd bhh = params_[kBhh].value.col(0);
  RowMatrix gi = rows * params_[kWih].value.transpose();
  gi.rowwise() += params_[kBih].value.col(0).transpose();

  const std::size_t n = offsets.size() - 1;
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  Eigen::VectorXd h(H), gh(3 * H);
  for (std::size_t s = 0; s < n; ++s) {
    h.setZero();
    for (std::size_t t = offsets[s]; t < offsets[s + 1]; ++t) {
      const Eigen::VectorXd x_gates = gi.row(static_cast<Eigen::Index>(t)).transpose();
      gh = Whh * h + bhh;
      const Eigen::VectorXd r = sigmoid_vec(x_gates.head(H) + gh.head(H));
      const Eigen::VectorXd z = sigmoid_vec(x_gates.segment(H, H) + gh.segment(H, H));
      const Eigen::VectorXd cand =
          (x_gates.tail(H) + r.cwiseProduct(gh.tail(H))).array().tanh().matrix();
      h = (1.0 - z.array()).matrix().cwiseProduct(cand) + z.cwiseProduct(h);
    }
    const Eigen::VectorXd fc = (params_[kWfc1].value * h + params_[kBfc1].value.col(0)).cwiseMax(0.0);
    out(static_cast<Eigen::Index>(s)) = (params_[kWfc2].value * fc)(0) + params_[kBfc2].value(0, 0);
  }
  return out;
}

Eigen::VectorXd GruPredictor::forward_train(const RowMatrix& rows,
                                            std::span<const std::size_t> offsets,
                                            Cache& cache) const {
  check_layout(rows, offsets, input_dim_);
  const auto H = static_cast<Eigen::Index>(hidden_);
  const Eigen::MatrixXd& Wih = params_[kWih].value;
  const Eigen::MatrixXd& Whh = params_[kWhh].value;
  const Eigen::VectorXd bih = params_[kBih].value.col(0);
  const Eigen::VectorXd bhh = params_[kBhh].value.col(0);

  const std::size_t n = offsets.size() - 1;
  cache.input = rows;
  cache.sequences.assign(n, {});
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    SequenceCache& sc = cache.sequences[s];
    sc.row_begin = offsets[s];
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
    for (std::size_t t = offsets[s]; t < offsets[s + 1]; ++t) {
      StepCache step;
      step.h_prev = h;
      const Eigen::VectorXd gi = Wih * rows.row(static_cast<Eigen::Index>(t)).transpose() + bih;
      const Eigen::VectorXd gh = Whh * h + bhh;
      step.r = sigmoid_vec(gi.head(H) + gh.head(H));
      step.z = sigmoid_vec(gi.segment(H, H) + gh.segment(H, H));
      step.gh_n = gh.tail(H);
      step.n = (gi.tail(H) + step.r.cwiseProduct(step.gh_n)).array().tanh().matrix();
      h = (1.0 - step.z.array()).matrix().cwiseProduct(step.n) + step.z.cwiseProduct(h);
      sc.steps.push_back(std::move(step));
    }
    sc.h_last = h;
    sc.fc_pre = params_[kWfc1].value * h + params_[kBfc1].value.col(0);
    sc.fc_post = sc.fc_pre.cwiseMax(0.0);
    out(static_cast<Eigen::Index>(s)) =
        (params_[kWfc2].value * sc.fc_post)(0) + params_[kBfc2].value(0, 0);
  }
  cache.version = version_;
  cache.valid = true;
  return out;
}

GradientList GruPredictor::backward(const Cache& cache, const Eigen::VectorXd& dlogits) const {
  if (!cache.valid || cache.version != version_) {
    throw Error(ErrorCode::StaleCache, "backward needs a train-mode forward on current parameters");
  }
  if (dlogits.size() != static_cast<Eigen::Index>(cache.sequences.size())) {
    throw Error(ErrorCode::DimensionMismatch, "dlogits length differs from batch size");
  }
  const auto H = static_cast<Eigen::Index>(hidden_);
  const Eigen::MatrixXd& Whh = params_[kWhh].value;
  GradientList g = zeros_like(params_);

  for (std::size_t s = 0; s < cache.sequences.size(); ++s) {
    const SequenceCache& sc = cache.sequences[s];
    const double dl = dlogits(static_cast<Eigen::Index>(s));

    g[kWfc2] += dl * sc.fc_post.transpose();
    g[kBfc2](0, 0) += dl;
    const Eigen::VectorXd dfc =
        (dl * params_[kWfc2].value.row(0).transpose())
            .cwiseProduct((sc.fc_pre.array() > 0.0).cast<double>().matrix());
    g[kWfc1] += dfc * sc.h_last.transpose();
    g[kBfc1] += dfc;
    Eigen::VectorXd dh = params_[kWfc1].value.transpose() * dfc;

    // Backpropagation through time.
    Eigen::VectorXd dgi(3 * H), dgh(3 * H);
    for (std::size_t k = sc.steps.size(); k-- > 0;) {
      const StepCache& st = sc.steps[k];
      const Eigen::VectorXd x = cache.input.row(static_cast<Eigen::Index>(sc.row_begin + k)).transpose();
      const Eigen::ArrayXd z = st.z.array();
      const Eigen::ArrayXd r = st.r.array();
      const Eigen::ArrayXd cand = st.n.array();

      const Eigen::ArrayXd d_cand_pre = dh.array() * (1.0 - z) * (1.0 - cand * cand);
      const Eigen::ArrayXd d_z_pre = dh.array() * (st.h_prev.array() - cand) * z * (1.0 - z);
      const Eigen::ArrayXd d_r_pre = d_cand_pre * st.gh_n.array() * r * (1.0 - r);

      dgi << d_r_pre.matrix(), d_z_pre.matrix(), d_cand_pre.matrix();
      dgh << d_r_pre.matrix(), d_z_pre.matrix(), (d_cand_pre * r).matrix();

      g[kWih] += dgi * x.transpose();
      g[kBih] += dgi;
      g[kWhh] += dgh * st.h_prev.transpose();
      g[kBhh] += dgh;
      dh = (dh.array() * z).matrix() + Whh.transpose() * dgh;
    }
  }
  return g;
}

}  // namespace permsig
