#include "permsig/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include "permsig/csv.hpp"
#include "permsig/error.hpp"

namespace permsig {

std::set<std::string> significant_categories(std::span<const CategoryTestResult> results, double threshold) {
  std::set<std::string> out;
  for (const CategoryTestResult& r : results) {
    if (r.p_value < threshold) out.insert(r.category);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Specificity

SpecificityReport specificity_study(const LongitudinalDataset& ds, const std::set<std::string>& significant,
                                    const CvOptions& options) {
  for (const std::string& name : significant) ds.schema.index_of(name);
  std::vector<std::string> all, sig, rest;
  for (const Category& c : ds.schema.categories()) {
    all.push_back(c.name);
    (significant.count(c.name) ? sig : rest).push_back(c.name);
  }
  if (sig.empty()) throw Error(ErrorCode::DegenerateSubset, "no significant categories given");
  if (rest.empty()) throw Error(ErrorCode::DegenerateSubset, "every category is significant; no complement to train on");

  auto run = [&](const std::string& condition, const std::vector<std::string>& keep) {
    const LongitudinalDataset subset = restrict_to_categories(ds, keep);
    const CvRun cv = run_cv(panel_for(subset, options.architecture), options);
    SpecificityRow row;
    row.condition = condition;
    row.categories = keep;
    row.bacc = cv.pooled_psi(MetricKind::BalancedAccuracy);
    row.f1 = cv.pooled_psi(MetricKind::F1);
    return row;
  };

  SpecificityReport report;
  report.significant = sig;
  report.rows[0] = run("all", all);
  report.rows[1] = run("only_significant", sig);
  report.rows[2] = run("only_nonsignificant", rest);
  return report;
}

nlohmann::json specificity_to_json(const SpecificityReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SpecificityRow& r : report.rows) {
    rows.push_back({{"condition", r.condition}, {"categories", r.categories}, {"bacc", r.bacc}, {"f1", r.f1}});
  }
  return {{"format", "permsig-specificity"}, {"version", 1}, {"significant", report.significant},
          {"rows", std::move(rows)}};
}

void print_specificity_table(const SpecificityReport& report, std::ostream& out) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-20s  %8s  %8s\n", "condition", "bacc", "f1");
  out << buf;
  for (const SpecificityRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-20s  %8.4f  %8.4f\n", r.condition.c_str(), r.bacc, r.f1);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Hierarchical

void SubSchema::validate(const CategorySchema& schema) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSubSchema, msg); };
  const std::optional<std::size_t> idx = schema.find(parent);
  if (!idx) fail("parent category '" + parent + "' is not in the schema");
  if (subcategories.empty()) fail("no sub-categories given");
  std::set<std::string> names;
  std::vector<std::string> listed;
  for (const Category& c : subcategories) {
    if (c.name.empty() || !names.insert(c.name).second) fail("sub-category names must be unique and non-empty");
    if (c.columns.empty()) fail("sub-category '" + c.name + "' has no columns");
    listed.insert(listed.end(), c.columns.begin(), c.columns.end());
  }
  std::vector<std::string> expected = schema.categories()[*idx].columns;
  std::sort(listed.begin(), listed.end());
  std::sort(expected.begin(), expected.end());
  if (listed != expected) fail("sub-categories do not partition the columns of '" + parent + "'");
}

SubSchema SubSchema::from_json(const nlohmann::json& doc) {
  SubSchema s;
  try {
    s.parent = doc.at("parent").get<std::string>();
    for (const auto& c : doc.at("subcategories")) {
      s.subcategories.push_back({c.at("name").get<std::string>(), c.at("columns").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("sub-schema: ") + e.what());
  }
  return s;
}

nlohmann::json SubSchema::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const Category& c : subcategories) subs.push_back({{"name", c.name}, {"columns", c.columns}});
  return {{"parent", parent}, {"subcategories", std::move(subs)}};
}

SubSchema load_subschema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return SubSchema::from_json(doc);
}

std::vector<CategoryTestResult> hierarchical_test(const CvRun& cv, const SubjectPanel& data,
                                                  const SubSchema& sub, const PermutationPlan& plan,
                                                  std::size_t threads) {
  sub.validate(data.schema);
  std::map<std::string, std::size_t> column_index;
  const std::vector<std::string> names = data.schema.ordered_columns();
  for (std::size_t i = 0; i < names.size(); ++i) column_index[names[i]] = i;

  std::vector<CategoryTestResult> out;
  for (const Category& c : sub.subcategories) {
    PermutationPlan p = plan;
    p.category = c.name;
    p.columns.clear();
    for (const std::string& col : c.columns) p.columns.push_back(column_index.at(col));
    std::sort(p.columns.begin(), p.columns.end());
    const NullDistribution null = null_distribution(cv, data, p, threads);
    out.push_back(p_value(null, null.psi_true, p.p_options));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature importance

FeatureImportance feature_importance(const CvRun& cv, const SubjectPanel& data, std::size_t n_trials,
                                     std::uint64_t seed, MetricKind metric, std::size_t threads) {
  FeatureImportance fi;
  fi.metric = metric;
  fi.n_trials = n_trials;
  fi.seed = seed;
  const std::vector<std::string> names = data.schema.ordered_columns();
  for (std::size_t j = 0; j < data.num_features(); ++j) {
    PermutationPlan plan;
    plan.category = j < names.size() ? names[j] : "column " + std::to_string(j);
    plan.columns = {j};
    plan.n_trials = n_trials;
    plan.mode = PermutationMode::Pooled;
    plan.metric = metric;
    plan.seed = seed;
    const NullDistribution null = null_distribution(cv, data, plan, threads);
    const CategoryTestResult r = p_value(null, null.psi_true);
    fi.psi_true = r.psi_true;
    fi.ranked.push_back({plan.category, j, r.psi_true - r.null_mean, r.null_mean});
  }
  std::stable_sort(fi.ranked.begin(), fi.ranked.end(),
                   [](const FeatureScore& a, const FeatureScore& b) { return a.importance > b.importance; });
  return fi;
}

nlohmann::json importance_to_json(const FeatureImportance& fi) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < fi.ranked.size(); ++i) {
    const FeatureScore& f = fi.ranked[i];
    rows.push_back({{"rank", i + 1},
                    {"feature", f.feature},
                    {"column", f.column},
                    {"importance", f.importance},
                    {"null_mean", f.null_mean}});
  }
  return {{"format", "permsig-importance"}, {"version", 1}, {"metric", std::string(to_string(fi.metric))},
          {"psi_true", fi.psi_true}, {"n_trials", fi.n_trials}, {"seed", fi.seed}, {"features", std::move(rows)}};
}

void write_importance_csv(const FeatureImportance& fi, std::ostream& out) {
  out << "rank,feature,column,importance,null_mean\n";
  for (std::size_t i = 0; i < fi.ranked.size(); ++i) {
    const FeatureScore& f = fi.ranked[i];
    out << i + 1 << ',' << csv_quote(f.feature) << ',' << f.column << ',' << format_double(f.importance) << ','
        << format_double(f.null_mean) << '\n';
  }
}

void print_importance_table(const FeatureImportance& fi, std::ostream& out, std::size_t limit) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%4s  %-24s  %10s\n", "rank", "feature", "importance");
  out << buf;
  for (std::size_t i = 0; i < fi.ranked.size() && i < limit; ++i) {
    std::snprintf(buf, sizeof(buf), "%4zu  %-24s  %10.4f\n", i + 1, fi.ranked[i].feature.c_str(),
                  fi.ranked[i].importance);
    out << buf;
  }
  if (fi.ranked.size() > limit) out << "(" << fi.ranked.size() - limit << " more in the report)\n";
}

}  // namespace permsig
