#include "permsig/crossval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "permsig/csv.hpp"
#include "permsig/error.hpp"
#include "permsig/parallel.hpp"
#include "permsig/rng.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kFoldTag = 0x666F6C64ULL;  // "fold"
constexpr int kCvFormatVersion = 1;

nlohmann::json metric_map_to_json(const std::map<MetricKind, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [kind, value] : m) j[std::string(to_string(kind))] = value;
  return j;
}

std::map<MetricKind, double> metric_map_from_json(const nlohmann::json& j) {
  std::map<MetricKind, double> m;
  for (const auto& [key, value] : j.items()) m[parse_metric(key)] = value.get<double>();
  return m;
}

nlohmann::json row_vector_to_json(const Eigen::RowVectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::RowVectorXd row_vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

}  // namespace

std::vector<std::size_t> FoldAssignment::test_subjects(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_subjects(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldAssignment stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "k-fold needs k >= 2, got " + std::to_string(k));
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < k || neg.size() < k) {
    throw Error(ErrorCode::TooFewSubjects, std::to_string(k) + " folds need at least " +
                                               std::to_string(k) + " subjects per class (positives " +
                                               std::to_string(pos.size()) + ", negatives " +
                                               std::to_string(neg.size()) + ")");
  }
  Stream rng(derive_key({seed, kFoldTag}));
  rng.shuffle(std::span<std::size_t>(pos));
  rng.shuffle(std::span<std::size_t>(neg));

  FoldAssignment out;
  out.k = k;
  out.fold_of.assign(y.size(), 0);
  std::size_t slot = 0;
  for (std::size_t i : pos) out.fold_of[i] = slot++ % k;
  for (std::size_t i : neg) out.fold_of[i] = slot++ % k;
  return out;
}

double CvRun::pooled_psi(MetricKind kind) const {
  auto it = psi.find(kind);
  if (it == psi.end()) {
    throw Error(ErrorCode::UndefinedMetric, "run has no pooled " + std::string(to_string(kind)));
  }
  return it->second;
}

double CvRun::fold_averaged_psi(MetricKind kind) const {
  double total = 0.0;
  for (const auto& fold : fold_psi) {
    auto it = fold.find(kind);
    if (it == fold.end()) {
      throw Error(ErrorCode::UndefinedMetric, "a fold has no " + std::string(to_string(kind)));
    }
    total += it->second;
  }
  return total / static_cast<double>(fold_psi.size());
}

std::uint64_t CvRun::fold_seed(std::size_t fold) const { return derive_key({seed, fold}); }

SubjectPanel panel_for(const LongitudinalDataset& ds, Architecture arch) {
  return arch == Architecture::Mlp ? to_panel(collapse_cross_sectional(ds)) : to_panel(ds);
}

SubjectPanel standardized_subset(const SubjectPanel& data, std::span<const std::size_t> subjects,
                                 const Standardizer& s) {
  SubjectPanel out = data.select(subjects);
  out.rows = apply_standardizer(s, out.rows);
  return out;
}

std::map<MetricKind, double> score_all(std::span<const int> y, std::span<const int> y_pred) {
  const ConfusionMatrix cm = confusion(y, y_pred);
  std::map<MetricKind, double> out;
  for (MetricKind kind : {MetricKind::BalancedAccuracy, MetricKind::F1, MetricKind::Accuracy}) {
    try {
      out[kind] = evaluate(kind, cm);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedMetric) throw;
    }
  }
  return out;
}

CvRun run_cv(const SubjectPanel& data, const CvOptions& options) {
  options.train.validate();
  CvRun run;
  run.architecture = options.architecture;
  run.train_config = options.train;
  run.train_config.seed = options.seed;
  run.seed = options.seed;
  run.subject_ids = data.subject_ids;
  run.labels = data.labels;
  run.schema = data.schema;
  run.folds = stratified_kfold(data.labels, options.folds, options.seed);

  const std::size_t k = run.folds.k;
  std::vector<std::optional<Predictor>> models(k);
  run.standardizers.resize(k);
  run.class_weights.resize(k);
  run.fold_psi.resize(k);
  run.oof_probs.assign(data.num_subjects(), 0.0);

  parallel_for(k, options.threads, [&](std::size_t, std::size_t t) {
    const std::vector<std::size_t> train_idx = run.folds.train_subjects(t);
    const std::vector<std::size_t> test_idx = run.folds.test_subjects(t);
    const std::vector<std::size_t> train_rows = data.rows_of(train_idx);
    Standardizer s = fit_standardizer(data.rows, train_rows);
    const SubjectPanel train_panel = standardized_subset(data, train_idx, s);

    TrainConfig cfg = options.train;
    cfg.seed = run.fold_seed(t);
    run.class_weights[t] = cfg.class_weight_R.value_or(class_weight_ratio(train_panel.labels));
    Predictor model = train(options.architecture, train_panel, cfg);

    const SubjectPanel test_panel = standardized_subset(data, test_idx, s);
    const std::vector<double> probs = predict_proba(model, test_panel);
    for (std::size_t j = 0; j < test_idx.size(); ++j) run.oof_probs[test_idx[j]] = probs[j];
    run.fold_psi[t] = score_all(test_panel.labels, threshold_probabilities(probs));
    run.standardizers[t] = std::move(s);
    models[t] = std::move(model);
  });

  run.models.reserve(k);
  for (auto& m : models) run.models.push_back(std::move(*m));
  run.psi = score_all(run.labels, threshold_probabilities(run.oof_probs));
  return run;
}

void save_cv_run(const CvRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc = {{"format", "permsig-cvrun"}, {"version", kCvFormatVersion}};
  doc["architecture"] = std::string(to_string(run.architecture));
  doc["k"] = run.folds.k;
  doc["seed"] = run.seed;
  doc["train_config"] = run.train_config.to_json();
  doc["dataset"] = {{"data_path", run.data_path},
                    {"schema_path", run.schema_path},
                    {"digest", run.dataset_digest}};
  doc["schema"] = run.schema.to_json();
  doc["class_weights"] = run.class_weights;
  nlohmann::json stds = nlohmann::json::array();
  for (const Standardizer& s : run.standardizers) {
    stds.push_back({{"mean", row_vector_to_json(s.mean)}, {"scale", row_vector_to_json(s.scale)}});
  }
  doc["standardizers"] = std::move(stds);
  doc["psi"] = metric_map_to_json(run.psi);
  nlohmann::json fold_psi = nlohmann::json::array();
  for (const auto& f : run.fold_psi) fold_psi.push_back(metric_map_to_json(f));
  doc["fold_psi"] = std::move(fold_psi);
  {
    std::ofstream out(dir / "cvrun.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "cvrun.json").string());
    out << doc.dump(2) << '\n';
  }
  for (std::size_t t = 0; t < run.models.size(); ++t) {
    save_predictor(run.models[t], dir / ("model_" + std::to_string(t) + ".json"));
  }
  {
    std::ofstream out(dir / "folds.csv", std::ios::binary);
    out << "subject_id,fold\n";
    for (std::size_t i = 0; i < run.subject_ids.size(); ++i) {
      out << csv_quote(run.subject_ids[i]) << ',' << run.folds.fold_of[i] << '\n';
    }
  }
  {
    std::ofstream out(dir / "oof.csv", std::ios::binary);
    out << "subject_id,fold,probability,label\n";
    for (std::size_t i = 0; i < run.subject_ids.size(); ++i) {
      out << csv_quote(run.subject_ids[i]) << ',' << run.folds.fold_of[i] << ','
          << format_double(run.oof_probs[i]) << ',' << run.labels[i] << '\n';
    }
  }
}

CvRun load_cv_run(const std::filesystem::path& dir) {
  std::ifstream in(dir / "cvrun.json");
  if (!in) throw Error(ErrorCode::IoError, "no cvrun.json in " + dir.string());
  CvRun run;
  try {
    nlohmann::json doc;
    in >> doc;
    if (doc.at("format") != "permsig-cvrun" || doc.at("version").get<int>() != kCvFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported cvrun format");
    }
    run.architecture = parse_architecture(doc.at("architecture").get<std::string>());
    run.folds.k = doc.at("k").get<std::size_t>();
    run.seed = doc.at("seed").get<std::uint64_t>();
    run.train_config = TrainConfig::from_json(doc.at("train_config"));
    run.data_path = doc.at("dataset").at("data_path").get<std::string>();
    run.schema_path = doc.at("dataset").at("schema_path").get<std::string>();
    run.dataset_digest = doc.at("dataset").at("digest").get<std::string>();
    run.schema = CategorySchema::from_json(doc.at("schema"));
    run.class_weights = doc.at("class_weights").get<std::vector<double>>();
    for (const auto& s : doc.at("standardizers")) {
      run.standardizers.push_back({row_vector_from_json(s.at("mean")), row_vector_from_json(s.at("scale"))});
    }
    run.psi = metric_map_from_json(doc.at("psi"));
    for (const auto& f : doc.at("fold_psi")) run.fold_psi.push_back(metric_map_from_json(f));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cvrun.json: ") + e.what());
  }
  for (std::size_t t = 0; t < run.folds.k; ++t) {
    run.models.push_back(load_predictor(dir / ("model_" + std::to_string(t) + ".json")));
  }

  std::ifstream oof(dir / "oof.csv");
  if (!oof) throw Error(ErrorCode::IoError, "no oof.csv in " + dir.string());
  std::string line;
  std::getline(oof, line);
  while (std::getline(oof, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 4) throw Error(ErrorCode::ParseError, "malformed oof.csv line: " + line);
    run.subject_ids.push_back(f[0]);
    run.folds.fold_of.push_back(std::stoul(f[1]));
    double p = 0.0;
    std::from_chars(f[2].data(), f[2].data() + f[2].size(), p);
    run.oof_probs.push_back(p);
    run.labels.push_back(std::stoi(f[3]));
  }
  if (run.models.size() != run.folds.k || run.standardizers.size() != run.folds.k) {
    throw Error(ErrorCode::ParseError, "cvrun directory is incomplete");
  }
  return run;
}

}  // namespace permsig
