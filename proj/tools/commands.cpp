#include "commands.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "permsig/analysis.hpp"
#include "permsig/crossval.hpp"
#include "permsig/dataset.hpp"
#include "permsig/permeng.hpp"
#include "permsig/rng.hpp"
#include "permsig/synth.hpp"

#ifndef PERMSIG_VERSION
#define PERMSIG_VERSION "0.0.0"
#endif

namespace permsig::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::SingleClassTrainingSet:
    case ErrorCode::UndefinedMetric:
    case ErrorCode::EmptyNull:
    case ErrorCode::EmptySequence:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::LengthMismatch:
      return kExitNumerical;
    case ErrorCode::MismatchedRun:
    case ErrorCode::StaleCache:
      return kExitMismatch;
    default:
      return kExitUsage;
  }
}

std::string file_digest(const std::vector<fs::path>& paths) {
  std::string bytes;
  for (const fs::path& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
    bytes.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    bytes.push_back('\0');
  }
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64({data, bytes.size()})));
  return buf;
}

namespace {

struct TrainFlags {
  std::string arch = "mlp";
  std::size_t folds = 5;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> l1;
  std::optional<double> dropout;
  std::optional<std::size_t> batch_size;
  std::optional<double> class_weight;
  std::optional<std::size_t> hidden1, hidden2, gru_hidden, gru_fc_hidden;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--arch", f.arch, "Model architecture: mlp (visit means) or gru (visit sequences)")
      ->check(CLI::IsMember({"mlp", "gru"}))
      ->capture_default_str();
  sub->add_option("--folds", f.folds, "Cross-validation folds (k >= 2)")->capture_default_str();
  sub->add_option("--epochs", f.epochs, "Training epochs (mlp 55, gru 30)");
  sub->add_option("--lr", f.lr, "Adam learning rate (mlp 0.001, gru 0.0001)");
  sub->add_option("--l1", f.l1, "L1 penalty on weights (1e-4)");
  sub->add_option("--dropout", f.dropout, "Dropout rate (mlp 0.2, gru 0)");
  sub->add_option("--batch-size", f.batch_size, "Mini-batch size, 0 = full batch (mlp 0, gru 32)");
  sub->add_option("--class-weight", f.class_weight, "Positive-class weight R (default N_neg / N_pos)");
  sub->add_option("--hidden1", f.hidden1, "MLP first hidden width (64)");
  sub->add_option("--hidden2", f.hidden2, "MLP second hidden width (32)");
  sub->add_option("--gru-hidden", f.gru_hidden, "GRU hidden size (32)");
  sub->add_option("--gru-fc-hidden", f.gru_fc_hidden, "GRU head hidden width (32)");
}

CvOptions cv_options(const TrainFlags& f, std::uint64_t seed, std::size_t threads) {
  CvOptions o;
  o.architecture = parse_architecture(f.arch);
  o.train = TrainConfig::defaults_for(o.architecture);
  if (f.epochs) o.train.epochs = *f.epochs;
  if (f.lr) o.train.learning_rate = *f.lr;
  if (f.l1) o.train.l1_lambda = *f.l1;
  if (f.dropout) o.train.dropout_rate = *f.dropout;
  if (f.batch_size) o.train.batch_size = *f.batch_size;
  if (f.class_weight) o.train.class_weight_R = *f.class_weight;
  if (f.hidden1) o.train.hidden1 = *f.hidden1;
  if (f.hidden2) o.train.hidden2 = *f.hidden2;
  if (f.gru_hidden) o.train.gru_hidden = *f.gru_hidden;
  if (f.gru_fc_hidden) o.train.gru_fc_hidden = *f.gru_fc_hidden;
  o.folds = f.folds;
  o.seed = seed;
  o.threads = threads;
  return o;
}

struct PlanFlags {
  std::size_t trials = 500;
  std::string mode = "per-fold";
  std::string metric = "bacc";
  std::uint64_t seed = 0;
  bool exhaustive = false;
  bool strict = false;
  bool smoothing = false;
};

void add_plan_flags(CLI::App* sub, PlanFlags& f) {
  sub->add_option("--trials", f.trials, "Permutations per fold (per-fold) or in total (pooled)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--mode", f.mode, "per-fold or pooled")
      ->check(CLI::IsMember({"per-fold", "per_fold", "pooled"}))
      ->capture_default_str();
  sub->add_option("--metric", f.metric, "bacc, f1 or accuracy")
      ->check(CLI::IsMember({"bacc", "f1", "accuracy"}))
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "Permutation seed")->capture_default_str();
  sub->add_flag("--exhaustive", f.exhaustive, "Enumerate every permutation (small folds only)");
  sub->add_flag("--strict", f.strict, "Count only null scores strictly above psi");
  sub->add_flag("--smoothing", f.smoothing, "Report (c + 1) / (N + 1)");
}

PermutationPlan make_plan(const PlanFlags& f) {
  PermutationPlan p;
  p.n_trials = f.trials;
  p.mode = parse_permutation_mode(f.mode);
  p.metric = parse_metric(f.metric);
  p.seed = f.seed;
  p.exhaustive = f.exhaustive;
  p.p_options.exceedance = f.strict ? Exceedance::Strictly : Exceedance::AtLeast;
  p.p_options.smoothing = f.smoothing;
  return p;
}

void add_threads(CLI::App* sub, std::size_t& threads) {
  sub->add_option("--threads", threads, "Worker threads")
      ->envname("PERMSIG_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

json option_values(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "--threads") continue;
    if (opt->count() > 0) {
      j[name] = opt->results();
    } else if (!opt->get_default_str().empty()) {
      j[name] = std::vector<std::string>{opt->get_default_str()};
    }
  }
  return j;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  json seeds = json::object();
  json inputs = json::object();
  std::vector<std::string> outputs;
};

void write_manifest(const Manifest& m, const fs::path& path) {
  json doc = {{"format", "permsig-manifest"},
              {"version", 1},
              {"tool_version", PERMSIG_VERSION},
              {"command", m.command},
              {"argv", m.argv},
              {"config", m.config},
              {"seeds", m.seeds},
              {"inputs", m.inputs},
              {"outputs", m.outputs}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// Loads the dataset a run was trained on and checks it is byte-for-byte the same.
SubjectPanel load_for_run(const CvRun& cv, std::string data, std::string schema, json& inputs) {
  if (data.empty()) data = cv.data_path;
  if (schema.empty()) schema = cv.schema_path;
  const std::string digest = file_digest({data, schema});
  if (!cv.dataset_digest.empty() && digest != cv.dataset_digest) {
    throw Error(ErrorCode::MismatchedRun, "dataset digest " + digest + " does not match the run's " +
                                              cv.dataset_digest);
  }
  inputs["data"] = {{"path", data}, {"digest", digest}};
  return panel_for(load_dataset(data, schema), cv.architecture);
}

void print_cv_summary(const CvRun& run, std::ostream& out) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-8s  %8s  %8s\n", "fold", "bacc", "f1");
  out << buf;
  auto get = [](const std::map<MetricKind, double>& m, MetricKind k) {
    auto it = m.find(k);
    return it == m.end() ? std::nan("") : it->second;
  };
  for (std::size_t t = 0; t < run.fold_psi.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%-8zu  %8.4f  %8.4f\n", t, get(run.fold_psi[t], MetricKind::BalancedAccuracy),
                  get(run.fold_psi[t], MetricKind::F1));
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-8s  %8.4f  %8.4f\n", "pooled", get(run.psi, MetricKind::BalancedAccuracy),
                get(run.psi, MetricKind::F1));
  out << buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation significance testing of feature categories", "permsig"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", PERMSIG_VERSION);

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic cohort with planted signal");
  synth->set_config("--config", "", "TOML/INI file with option values");
  std::string synth_out, synth_schema, synth_template, synth_manifest;
  SynthConfig scfg;
  std::size_t n_categories = 4, columns_per = 10;
  std::vector<std::string> informative = {"A"};
  synth->add_option("--out", synth_out, "Dataset CSV to write")->required();
  synth->add_option("--schema", synth_schema, "Schema JSON to write")->required();
  synth->add_option("--from-schema", synth_template, "Use this schema instead of a uniform one")
      ->check(CLI::ExistingFile);
  synth->add_option("--manifest", synth_manifest, "Manifest path (default <out>.manifest.json)");
  synth->add_option("--subjects", scfg.n_subjects, "Number of subjects")->capture_default_str();
  synth->add_option("--categories", n_categories, "Categories in the uniform schema")->capture_default_str();
  synth->add_option("--columns", columns_per, "Columns per category")->capture_default_str();
  synth->add_option("--informative", informative, "Categories carrying signal")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_option("--visits-min", scfg.visits_min, "Fewest visits per subject")->capture_default_str();
  synth->add_option("--visits-max", scfg.visits_max, "Most visits per subject")->capture_default_str();
  synth->add_option("--signal", scfg.signal_strength, "Class mean shift of informative features")
      ->capture_default_str();
  synth->add_option("--positive-rate", scfg.positive_rate, "Fraction of positives")->capture_default_str();
  synth->add_option("--noise", scfg.noise_std, "Per-visit noise std")->capture_default_str();
  synth->add_flag("--temporal", scfg.temporal_signal, "Add a label-dependent drift across visits");
  synth->add_option("--seed", scfg.seed, "Seed")->capture_default_str();

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "Cross-validate a model and save the frozen run");
  std::string train_data, train_schema, train_out;
  std::uint64_t train_seed = 0;
  std::size_t train_threads = 1;
  TrainFlags train_flags;
  train_cmd->add_option("--data", train_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--schema", train_schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Run directory to write")->required();
  train_cmd->add_option("--seed", train_seed, "Seed for folds, initialization, shuffling, dropout")
      ->capture_default_str();
  add_train_flags(train_cmd, train_flags);
  add_threads(train_cmd, train_threads);

  // permtest
  CLI::App* permtest = app.add_subcommand("permtest", "Permutation test of one or all categories");
  std::string pt_run, pt_data, pt_schema, pt_category, pt_out;
  bool pt_all = false;
  std::size_t pt_threads = 1;
  PlanFlags pt_plan;
  permtest->add_option("--run", pt_run, "Run directory from `train`")->required()->check(CLI::ExistingDirectory);
  permtest->add_option("--data", pt_data, "Dataset CSV (default: the run's)");
  permtest->add_option("--schema", pt_schema, "Schema JSON (default: the run's)");
  auto* cat_opt = permtest->add_option("--category", pt_category, "Category to test");
  auto* all_opt = permtest->add_flag("--all", pt_all, "Test every category");
  cat_opt->excludes(all_opt);
  permtest->add_option("--out", pt_out, "Output directory")->required();
  add_plan_flags(permtest, pt_plan);
  add_threads(permtest, pt_threads);

  // hier
  CLI::App* hier = app.add_subcommand("hier", "Test the sub-categories of one category");
  std::string hr_run, hr_data, hr_schema, hr_sub, hr_out;
  std::size_t hr_threads = 1;
  PlanFlags hr_plan;
  hier->add_option("--run", hr_run, "Run directory from `train`")->required()->check(CLI::ExistingDirectory);
  hier->add_option("--data", hr_data, "Dataset CSV (default: the run's)");
  hier->add_option("--schema", hr_schema, "Schema JSON (default: the run's)");
  hier->add_option("--subschema", hr_sub, "Sub-category partition JSON")->required()->check(CLI::ExistingFile);
  hier->add_option("--out", hr_out, "Output directory")->required();
  add_plan_flags(hier, hr_plan);
  add_threads(hier, hr_threads);

  // specificity
  CLI::App* specificity_cmd = app.add_subcommand("specificity", "Retrain on significant and non-significant categories");
  std::string sp_data, sp_schema, sp_report, sp_out;
  std::vector<std::string> sp_significant;
  double sp_threshold = 0.05;
  std::uint64_t sp_seed = 0;
  std::size_t sp_threads = 1;
  TrainFlags sp_flags;
  specificity_cmd->add_option("--data", sp_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  specificity_cmd->add_option("--schema", sp_schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  auto* sig_opt = specificity_cmd->add_option("--significant", sp_significant, "Significant categories")->delimiter(',');
  auto* rep_opt = specificity_cmd->add_option("--from-report", sp_report, "Take the significant set from a permtest report")
                      ->check(CLI::ExistingFile);
  sig_opt->excludes(rep_opt);
  specificity_cmd->add_option("--threshold", sp_threshold, "p-value threshold used with --from-report")->capture_default_str();
  specificity_cmd->add_option("--seed", sp_seed, "Training seed")->capture_default_str();
  specificity_cmd->add_option("--out", sp_out, "Output directory")->required();
  add_train_flags(specificity_cmd, sp_flags);
  add_threads(specificity_cmd, sp_threads);

  // importance
  CLI::App* imp = app.add_subcommand("importance", "Single-column permutation importance");
  std::string im_run, im_data, im_schema, im_out, im_metric = "bacc";
  std::size_t im_trials = 100, im_threads = 1;
  std::uint64_t im_seed = 0;
  imp->add_option("--run", im_run, "Run directory from `train`")->required()->check(CLI::ExistingDirectory);
  imp->add_option("--data", im_data, "Dataset CSV (default: the run's)");
  imp->add_option("--schema", im_schema, "Schema JSON (default: the run's)");
  imp->add_option("--trials", im_trials, "Permutations per column")->check(CLI::PositiveNumber)->capture_default_str();
  imp->add_option("--metric", im_metric, "bacc, f1 or accuracy")
      ->check(CLI::IsMember({"bacc", "f1", "accuracy"}))
      ->capture_default_str();
  imp->add_option("--seed", im_seed, "Permutation seed")->capture_default_str();
  imp->add_option("--out", im_out, "Output directory")->required();
  add_threads(imp, im_threads);

  // replay
  CLI::App* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  std::string rp_manifest;
  replay->add_option("manifest", rp_manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Manifest manifest;
  manifest.argv = args;
  try {
    if (*synth) {
      scfg.schema = synth_template.empty() ? uniform_schema(n_categories, columns_per) : load_schema(synth_template);
      scfg.informative_categories = informative;
      const LongitudinalDataset ds = generate(scfg);
      save_dataset(ds, synth_out, synth_schema);
      manifest.command = "synth";
      manifest.config = option_values(synth);
      manifest.seeds["seed"] = scfg.seed;
      manifest.outputs = {synth_out, synth_schema};
      write_manifest(manifest, synth_manifest.empty() ? synth_out + ".manifest.json" : synth_manifest);
      out << "wrote " << ds.num_subjects() << " subjects, " << ds.num_features() << " features to " << synth_out
          << "\n";
      return kExitOk;
    }

    if (*train_cmd) {
      const CvOptions options = cv_options(train_flags, train_seed, train_threads);
      const SubjectPanel panel = panel_for(load_dataset(train_data, train_schema), options.architecture);
      CvRun cv = run_cv(panel, options);
      cv.data_path = train_data;
      cv.schema_path = train_schema;
      cv.dataset_digest = file_digest({train_data, train_schema});
      save_cv_run(cv, train_out);
      manifest.command = "train";
      manifest.config = option_values(train_cmd);
      manifest.config["train_config"] = cv.train_config.to_json();
      manifest.seeds["seed"] = train_seed;
      for (std::size_t t = 0; t < cv.num_folds(); ++t) manifest.seeds["fold_" + std::to_string(t)] = cv.fold_seed(t);
      manifest.inputs["data"] = {{"path", train_data}, {"digest", cv.dataset_digest}};
      manifest.outputs = {(fs::path(train_out) / "cvrun.json").string()};
      write_manifest(manifest, fs::path(train_out) / "manifest.json");
      print_cv_summary(cv, out);
      return kExitOk;
    }

    if (*permtest) {
      if (pt_category.empty() && !pt_all) {
        err << "permtest: one of --category or --all is required\n";
        return kExitUsage;
      }
      const CvRun cv = load_cv_run(pt_run);
      const SubjectPanel panel = load_for_run(cv, pt_data, pt_schema, manifest.inputs);
      PermutationPlan plan = make_plan(pt_plan);
      std::vector<std::string> names;
      if (pt_all) {
        for (const Category& c : panel.schema.categories()) names.push_back(c.name);
      } else {
        panel.schema.index_of(pt_category);
        names.push_back(pt_category);
      }
      std::vector<CategoryTestResult> results;
      std::vector<NullDistribution> nulls;
      for (const std::string& name : names) {
        plan.category = name;
        nulls.push_back(null_distribution(cv, panel, plan, pt_threads));
        results.push_back(p_value(nulls.back(), nulls.back().psi_true, plan.p_options));
      }
      std::stable_sort(results.begin(), results.end(),
                       [](const auto& a, const auto& b) { return a.p_value < b.p_value; });
      fs::create_directories(pt_out);
      write_report(results, fs::path(pt_out) / "report.json");
      {
        std::ofstream null_csv(fs::path(pt_out) / "null.csv", std::ios::binary);
        write_null_csv(nulls, null_csv);
      }
      manifest.command = "permtest";
      manifest.config = option_values(permtest);
      manifest.seeds["seed"] = plan.seed;
      manifest.inputs["run"] = {{"path", pt_run}, {"digest", file_digest({fs::path(pt_run) / "cvrun.json"})}};
      manifest.outputs = {(fs::path(pt_out) / "report.json").string(), (fs::path(pt_out) / "null.csv").string()};
      write_manifest(manifest, fs::path(pt_out) / "manifest.json");
      print_results_table(results, out);
      return kExitOk;
    }

    if (*hier) {
      const CvRun cv = load_cv_run(hr_run);
      const SubjectPanel panel = load_for_run(cv, hr_data, hr_schema, manifest.inputs);
      const SubSchema sub = load_subschema(hr_sub);
      const std::vector<CategoryTestResult> results =
          hierarchical_test(cv, panel, sub, make_plan(hr_plan), hr_threads);
      fs::create_directories(hr_out);
      write_report(results, fs::path(hr_out) / "report.json");
      manifest.command = "hier";
      manifest.config = option_values(hier);
      manifest.seeds["seed"] = hr_plan.seed;
      manifest.inputs["run"] = {{"path", hr_run}, {"digest", file_digest({fs::path(hr_run) / "cvrun.json"})}};
      manifest.inputs["subschema"] = {{"path", hr_sub}, {"digest", file_digest({hr_sub})}};
      manifest.outputs = {(fs::path(hr_out) / "report.json").string()};
      write_manifest(manifest, fs::path(hr_out) / "manifest.json");
      out << "parent category: " << sub.parent << "\n";
      print_results_table(results, out);
      return kExitOk;
    }

    if (*specificity_cmd) {
      std::set<std::string> significant(sp_significant.begin(), sp_significant.end());
      if (!sp_report.empty()) {
        std::ifstream in(sp_report);
        json doc;
        try {
          in >> doc;
          for (const auto& r : doc.at("results")) {
            if (r.at("p_value").get<double>() < sp_threshold) significant.insert(r.at("category").get<std::string>());
          }
        } catch (const json::exception& e) {
          throw Error(ErrorCode::ParseError, sp_report + ": " + e.what());
        }
      } else if (sp_significant.empty()) {
        err << "specificity: one of --significant or --from-report is required\n";
        return kExitUsage;
      }
      const CvOptions options = cv_options(sp_flags, sp_seed, sp_threads);
      const SpecificityReport report = specificity_study(load_dataset(sp_data, sp_schema), significant, options);
      fs::create_directories(sp_out);
      write_json(specificity_to_json(report), fs::path(sp_out) / "specificity.json");
      manifest.command = "specificity";
      manifest.config = option_values(specificity_cmd);
      manifest.seeds["seed"] = sp_seed;
      manifest.inputs["data"] = {{"path", sp_data}, {"digest", file_digest({sp_data, sp_schema})}};
      manifest.outputs = {(fs::path(sp_out) / "specificity.json").string()};
      write_manifest(manifest, fs::path(sp_out) / "manifest.json");
      print_specificity_table(report, out);
      return kExitOk;
    }

    if (*imp) {
      const CvRun cv = load_cv_run(im_run);
      const SubjectPanel panel = load_for_run(cv, im_data, im_schema, manifest.inputs);
      const FeatureImportance fi =
          feature_importance(cv, panel, im_trials, im_seed, parse_metric(im_metric), im_threads);
      fs::create_directories(im_out);
      write_json(importance_to_json(fi), fs::path(im_out) / "importance.json");
      {
        std::ofstream csv(fs::path(im_out) / "importance.csv", std::ios::binary);
        write_importance_csv(fi, csv);
      }
      manifest.command = "importance";
      manifest.config = option_values(imp);
      manifest.seeds["seed"] = im_seed;
      manifest.inputs["run"] = {{"path", im_run}, {"digest", file_digest({fs::path(im_run) / "cvrun.json"})}};
      manifest.outputs = {(fs::path(im_out) / "importance.json").string(),
                          (fs::path(im_out) / "importance.csv").string()};
      write_manifest(manifest, fs::path(im_out) / "manifest.json");
      print_importance_table(fi, out);
      return kExitOk;
    }

    if (*replay) {
      std::ifstream in(rp_manifest);
      json doc;
      std::vector<std::string> argv;
      try {
        in >> doc;
        if (doc.at("format") != "permsig-manifest") throw Error(ErrorCode::ParseError, "not a manifest");
        argv = doc.at("argv").get<std::vector<std::string>>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, rp_manifest + ": " + e.what());
      }
      if (!argv.empty() && argv.front() == "replay") {
        throw Error(ErrorCode::InvalidConfig, "manifest records a replay");
      }
      return run(argv, out, err);
    }
  } catch (const Error& e) {
    err << "permsig: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "permsig: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace permsig::cli
