#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "permsig/error.hpp"
#include "permsig/models.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kInitTag = 0x696E6974ULL;      // "init"
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;   // "shuf"
constexpr std::uint64_t kDropoutTag = 0x64726F70ULL;   // "drop"
constexpr int kModelFormatVersion = 1;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string_view to_string(Architecture arch) { return arch == Architecture::Mlp ? "mlp" : "gru"; }

Architecture parse_architecture(std::string_view text) {
  if (text == "mlp") return Architecture::Mlp;
  if (text == "gru") return Architecture::Gru;
  throw Error(ErrorCode::InvalidConfig, "unknown architecture '" + std::string(text) + "'");
}

Architecture architecture_of(const Predictor& model) {
  return std::holds_alternative<MlpPredictor>(model) ? Architecture::Mlp : Architecture::Gru;
}

const ParameterList& parameters(const Predictor& model) {
  return std::visit([](const auto& m) -> const ParameterList& { return m.parameters(); }, model);
}

ParameterList& mutable_parameters(Predictor& model) {
  return std::visit([](auto& m) -> ParameterList& { return m.mutable_parameters(); }, model);
}

std::size_t input_dim(const Predictor& model) {
  return std::visit([](const auto& m) { return m.input_dim(); }, model);
}

double l1_penalty(const Predictor& model, double lambda) {
  return l1_penalty(parameters(model), lambda);
}

std::uint64_t parameter_checksum(const Predictor& model) {
  return parameter_checksum(parameters(model));
}

Eigen::VectorXd predict_logits(const Predictor& model, const RowMatrix& rows,
                               std::span<const std::size_t> offsets) {
  return std::visit(Overloaded{
                        [&](const MlpPredictor& m) -> Eigen::VectorXd {
                          if (offsets.size() != static_cast<std::size_t>(rows.rows()) + 1) {
                            throw Error(ErrorCode::DimensionMismatch,
                                        "the MLP takes exactly one row per subject");
                          }
                          return m.logits(rows);
                        },
                        [&](const GruPredictor& m) -> Eigen::VectorXd { return m.logits(rows, offsets); },
                    },
                    model);
}

Eigen::VectorXd predict_logits(const Predictor& model, const SubjectPanel& panel) {
  return predict_logits(model, panel.rows, panel.offsets);
}

std::vector<double> predict_proba(const Predictor& model, const SubjectPanel& panel) {
  const Eigen::VectorXd z = predict_logits(model, panel);
  std::vector<double> p(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) p[static_cast<std::size_t>(i)] = sigmoid(z(i));
  return p;
}

Labels threshold_probabilities(std::span<const double> probabilities, double threshold) {
  Labels out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
  return out;
}

Labels predict(const Predictor& model, const SubjectPanel& panel, double threshold) {
  return threshold_probabilities(predict_proba(model, panel), threshold);
}

// ---------------------------------------------------------------------------
// TrainConfig

TrainConfig TrainConfig::cross_sectional_defaults() {
  TrainConfig c;
  c.epochs = 55;
  c.learning_rate = 1e-3;
  c.dropout_rate = 0.2;
  c.batch_size = 0;
  return c;
}

TrainConfig TrainConfig::longitudinal_defaults() {
  TrainConfig c;
  c.epochs = 30;
  c.learning_rate = 1e-4;
  c.dropout_rate = 0.0;
  c.batch_size = 32;
  return c;
}

TrainConfig TrainConfig::defaults_for(Architecture arch) {
  return arch == Architecture::Mlp ? cross_sectional_defaults() : longitudinal_defaults();
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be >= 0");
  if (!(l1_lambda >= 0.0) || !std::isfinite(l1_lambda)) fail("l1 lambda must be >= 0");
  if (class_weight_R && !(*class_weight_R > 0.0 && std::isfinite(*class_weight_R))) {
    fail("class weight R must be > 0");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout rate must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail("Adam epsilon must be > 0");
  if (hidden1 == 0 || hidden2 == 0 || gru_hidden == 0 || gru_fc_hidden == 0) {
    fail("hidden widths must be positive");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {
      {"epochs", epochs},
      {"learning_rate", learning_rate},
      {"l1_lambda", l1_lambda},
      {"dropout_rate", dropout_rate},
      {"batch_size", batch_size},
      {"seed", seed},
      {"beta1", beta1},
      {"beta2", beta2},
      {"epsilon", epsilon},
      {"hidden1", hidden1},
      {"hidden2", hidden2},
      {"gru_hidden", gru_hidden},
      {"gru_fc_hidden", gru_fc_hidden},
  };
  j["class_weight_R"] = class_weight_R ? nlohmann::json(*class_weight_R) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.l1_lambda = j.at("l1_lambda").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.hidden1 = j.at("hidden1").get<std::size_t>();
    c.hidden2 = j.at("hidden2").get<std::size_t>();
    c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
    c.gru_fc_hidden = j.at("gru_fc_hidden").get<std::size_t>();
    if (!j.at("class_weight_R").is_null()) c.class_weight_R = j.at("class_weight_R").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training

Predictor init_predictor(Architecture arch, std::size_t input_dim, const TrainConfig& config) {
  Stream rng(derive_key({config.seed, kInitTag}));
  if (arch == Architecture::Mlp) {
    MlpPredictor m(input_dim, config.hidden1, config.hidden2, config.dropout_rate);
    m.initialize(rng);
    return m;
  }
  GruPredictor g(input_dim, config.gru_hidden, config.gru_fc_hidden);
  g.initialize(rng);
  return g;
}

double class_weight_ratio(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::SingleClassTrainingSet,
                "training set needs both classes (positives " + std::to_string(pos) +
                    ", negatives " + std::to_string(neg) + ")");
  }
  return static_cast<double>(neg) / static_cast<double>(pos);
}

namespace {

struct ForwardResult {
  Eigen::VectorXd logits;
  std::variant<MlpPredictor::Cache, GruPredictor::Cache> cache;
};

ForwardResult forward_train(const Predictor& model, const SubjectPanel& batch, std::uint64_t mask_key) {
  return std::visit(
      Overloaded{
          [&](const MlpPredictor& m) -> ForwardResult {
            if (!batch.one_row_per_subject()) {
              throw Error(ErrorCode::DimensionMismatch, "the MLP takes exactly one row per subject");
            }
            Stream masks(mask_key);
            MlpPredictor::Cache cache;
            Eigen::VectorXd z = m.forward_train(batch.rows, masks, cache);
            return {std::move(z), std::move(cache)};
          },
          [&](const GruPredictor& m) -> ForwardResult {
            GruPredictor::Cache cache;
            Eigen::VectorXd z = m.forward_train(batch.rows, batch.offsets, cache);
            return {std::move(z), std::move(cache)};
          },
      },
      model);
}

}  // namespace

ObjectiveValue objective_and_gradient(const Predictor& model, const SubjectPanel& batch, double R,
                                      double l1_lambda, std::uint64_t mask_key) {
  ForwardResult fwd = forward_train(model, batch, mask_key);
  const auto n = fwd.logits.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double data_loss = 0.0;
  Eigen::VectorXd dlogits(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    data_loss += weighted_bce(fwd.logits(i), y, R);
    dlogits(i) = weighted_bce_grad(fwd.logits(i), y, R) * inv_n;
  }
  ObjectiveValue out;
  out.loss = data_loss * inv_n + l1_penalty(model, l1_lambda);
  out.gradients = std::visit(
      Overloaded{
          [&](const MlpPredictor& m) { return m.backward(std::get<MlpPredictor::Cache>(fwd.cache), dlogits); },
          [&](const GruPredictor& m) { return m.backward(std::get<GruPredictor::Cache>(fwd.cache), dlogits); },
      },
      model);
  add_l1_subgradient(parameters(model), l1_lambda, out.gradients);
  return out;
}

double objective(const Predictor& model, const SubjectPanel& batch, double R, double l1_lambda,
                 std::uint64_t mask_key) {
  const ForwardResult fwd = forward_train(model, batch, mask_key);
  double data_loss = 0.0;
  for (Eigen::Index i = 0; i < fwd.logits.size(); ++i) {
    data_loss += weighted_bce(fwd.logits(i), batch.labels[static_cast<std::size_t>(i)], R);
  }
  return data_loss / static_cast<double>(fwd.logits.size()) + l1_penalty(model, l1_lambda);
}

double total_weighted_loss(const Predictor& model, const SubjectPanel& panel, double R) {
  const Eigen::VectorXd z = predict_logits(model, panel);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += weighted_bce(z(i), panel.labels[static_cast<std::size_t>(i)], R);
  }
  return total;
}

Predictor train(Architecture arch, const SubjectPanel& train_data, const TrainConfig& config) {
  config.validate();
  // Always computed so single-class data is rejected even when R is overridden.
  const double computed_R = class_weight_ratio(train_data.labels);
  const double R = config.class_weight_R.value_or(computed_R);

  Predictor model = init_predictor(arch, train_data.num_features(), config);
  AdamState state = AdamState::for_parameters(parameters(model));
  const AdamConfig adam = config.adam();

  const std::size_t n = train_data.num_subjects();
  const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Stream shuffler(derive_key({config.seed, kShuffleTag, epoch}));
    shuffler.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const std::size_t stop = std::min(start + batch, n);
      const SubjectPanel mb =
          train_data.select(std::span<const std::size_t>(order.data() + start, stop - start));
      ObjectiveValue obj = objective_and_gradient(model, mb, R, config.l1_lambda,
                                                  derive_key({config.seed, kDropoutTag, epoch, b}));
      if (!std::isfinite(obj.loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " +
                                                  std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      adam_step(mutable_parameters(model), obj.gradients, state, adam);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json predictor_to_json(const Predictor& model) {
  nlohmann::json doc = {{"format", "permsig-model"}, {"version", kModelFormatVersion}};
  doc["architecture"] = std::string(to_string(architecture_of(model)));
  std::visit(Overloaded{
                 [&](const MlpPredictor& m) {
                   doc["input_dim"] = m.input_dim();
                   doc["hidden"] = {m.hidden1(), m.hidden2()};
                   doc["dropout_rate"] = m.dropout_rate();
                 },
                 [&](const GruPredictor& m) {
                   doc["input_dim"] = m.input_dim();
                   doc["hidden"] = {m.hidden(), m.fc_hidden()};
                   doc["dropout_rate"] = 0.0;
                 },
             },
             model);
  nlohmann::json params = nlohmann::json::array();
  for (const Parameter& p : parameters(model)) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) values.push_back(p.value(r, c));
    }
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}});
  }
  doc["parameters"] = std::move(params);
  return doc;
}

Predictor predictor_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "permsig-model") throw Error(ErrorCode::ParseError, "not a model file");
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported model format version");
    }
    const Architecture arch = parse_architecture(doc.at("architecture").get<std::string>());
    const auto m = doc.at("input_dim").get<std::size_t>();
    const auto hidden = doc.at("hidden").get<std::vector<std::size_t>>();
    if (hidden.size() != 2) throw Error(ErrorCode::ParseError, "expected two hidden widths");
    Predictor model = arch == Architecture::Mlp
                          ? Predictor(MlpPredictor(m, hidden[0], hidden[1], doc.at("dropout_rate").get<double>()))
                          : Predictor(GruPredictor(m, hidden[0], hidden[1]));
    ParameterList& params = mutable_parameters(model);
    const auto& stored = doc.at("parameters");
    if (stored.size() != params.size()) throw Error(ErrorCode::ParseError, "parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = stored[i];
      Parameter& p = params[i];
      if (entry.at("name").get<std::string>() != p.name ||
          entry.at("rows").get<Eigen::Index>() != p.value.rows() ||
          entry.at("cols").get<Eigen::Index>() != p.value.cols()) {
        throw Error(ErrorCode::ParseError, "parameter '" + p.name + "' has unexpected name or shape");
      }
      const auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(p.value.size())) {
        throw Error(ErrorCode::ParseError, "parameter '" + p.name + "' has wrong element count");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = values[k++];
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model file: ") + e.what());
  }
}

void save_predictor(const Predictor& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << predictor_to_json(model).dump() << '\n';
}

Predictor load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return predictor_from_json(doc);
}

}  // namespace permsig
