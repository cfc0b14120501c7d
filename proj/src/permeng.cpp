#include "permsig/permeng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "permsig/csv.hpp"
#include "permsig/error.hpp"
#include "permsig/nn.hpp"
#include "permsig/parallel.hpp"
#include "permsig/rng.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kPooledTag = 0x706F6F6CULL;  // "pool"
constexpr int kReportFormatVersion = 1;

void check_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) {
    throw Error(ErrorCode::NotAPermutation, "permutation has " + std::to_string(perm.size()) +
                                                " entries for " + std::to_string(n) + " subjects");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t v : perm) {
    if (v >= n || seen[v]) {
      throw Error(ErrorCode::NotAPermutation, "not a bijection on [0, " + std::to_string(n) + ")");
    }
    seen[v] = true;
  }
}

std::vector<std::size_t> inverse(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

// Donor visit feeding recipient visit `t` when trajectories are end-aligned.
std::size_t aligned_visit(std::size_t t, std::size_t donor_visits, std::size_t recipient_visits) {
  if (donor_visits >= recipient_visits) return t + (donor_visits - recipient_visits);
  const std::size_t shift = recipient_visits - donor_visits;
  return t < shift ? 0 : t - shift;
}

// Key material for a column set, so that the same columns always draw the same permutations.
std::uint64_t column_set_key(std::uint64_t seed, std::span<const std::size_t> columns) {
  std::vector<std::uint64_t> words(columns.begin(), columns.end());
  std::sort(words.begin(), words.end());
  const auto* bytes = reinterpret_cast<const unsigned char*>(words.data());
  return derive_key({seed, fnv1a64({bytes, words.size() * sizeof(std::uint64_t)})});
}

std::uint64_t factorial_capped(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) {
    if (f > kMaxExhaustiveSamples) return kMaxExhaustiveSamples + 1;
    f *= i;
  }
  return f;
}

std::string label_for(const PermutationPlan& plan, std::span<const std::size_t> columns) {
  if (!plan.category.empty()) return plan.category;
  std::string s = "columns:";
  for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + std::to_string(columns[i]);
  return s;
}

}  // namespace

std::string_view to_string(PermutationMode mode) {
  return mode == PermutationMode::PerFold ? "per-fold" : "pooled";
}

PermutationMode parse_permutation_mode(std::string_view text) {
  if (text == "per-fold" || text == "per_fold") return PermutationMode::PerFold;
  if (text == "pooled") return PermutationMode::Pooled;
  throw Error(ErrorCode::InvalidConfig, "unknown permutation mode '" + std::string(text) + "'");
}

void PermutationPlan::validate() const {
  if (n_trials < 1 && !exhaustive) throw Error(ErrorCode::InvalidConfig, "n_trials must be >= 1");
  if (category.empty() && columns.empty()) {
    throw Error(ErrorCode::InvalidConfig, "plan names no category and no columns");
  }
}

std::vector<double> NullDistribution::values() const {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const NullSample& s : samples) v.push_back(s.psi_hat);
  return v;
}

std::string render_p_value(double p, bool is_bound) {
  char buf[32];
  if (is_bound || p < 0.001) {
    std::snprintf(buf, sizeof(buf), "%.3g", p);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", p);
  }
  return (is_bound ? "<" : "") + std::string(buf);
}

std::string CategoryTestResult::rendered_p() const { return render_p_value(p_value, p_is_bound); }

SubjectPanel permute_columns(const SubjectPanel& data, std::span<const std::size_t> columns,
                             std::span<const std::size_t> perm) {
  const std::size_t n = data.num_subjects();
  check_permutation(perm, n);
  for (std::size_t c : columns) {
    if (c >= data.num_features()) {
      throw Error(ErrorCode::DimensionMismatch, "column " + std::to_string(c) + " out of range");
    }
  }
  SubjectPanel out = data;
  for (std::size_t donor = 0; donor < n; ++donor) {
    const std::size_t recipient = perm[donor];
    const std::size_t lr = data.visits_of(recipient);
    const std::size_t ld = data.visits_of(donor);
    for (std::size_t t = 0; t < lr; ++t) {
      const auto r = static_cast<Eigen::Index>(data.offsets[recipient] + t);
      const auto d = static_cast<Eigen::Index>(data.offsets[donor] + aligned_visit(t, ld, lr));
      for (std::size_t c : columns) {
        out.rows(r, static_cast<Eigen::Index>(c)) = data.rows(d, static_cast<Eigen::Index>(c));
      }
    }
  }
  return out;
}

SubjectPanel permute_category(const SubjectPanel& data, std::string_view category,
                              std::span<const std::size_t> perm) {
  return permute_columns(data, data.schema.column_indices(category), perm);
}

std::vector<std::size_t> draw_permutation(Stream& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

std::vector<std::size_t> nth_permutation(std::size_t n, std::uint64_t index) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::uint64_t> fact(n + 1, 1);
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = n; i > 0; --i) {
    const std::uint64_t f = fact[i - 1];
    const auto pick = static_cast<std::size_t>(index / f);
    index %= f;
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CategoryScorer

CategoryScorer::CategoryScorer(const CvRun& cv, const SubjectPanel& data,
                               std::vector<std::size_t> columns, MetricKind metric)
    : cv_(&cv), data_(&data), columns_(std::move(columns)), metric_(metric) {
  auto mismatch = [](const std::string& msg) { throw Error(ErrorCode::MismatchedRun, msg); };
  const std::size_t n = data.num_subjects();
  const std::size_t k = cv.folds.k;
  if (cv.labels.size() != n || cv.folds.fold_of.size() != n) {
    mismatch("run covers " + std::to_string(cv.labels.size()) + " subjects, dataset has " +
             std::to_string(n));
  }
  if (cv.labels != data.labels) mismatch("run labels differ from the dataset's");
  if (!cv.subject_ids.empty() && cv.subject_ids != data.subject_ids) {
    mismatch("run subject ids differ from the dataset's");
  }
  if (cv.models.size() != k || cv.standardizers.size() != k) mismatch("run is missing fold pipelines");
  for (std::size_t t = 0; t < k; ++t) {
    if (cv.standardizers[t].num_features() != data.num_features() ||
        input_dim(cv.models[t]) != data.num_features()) {
      mismatch("fold " + std::to_string(t) + " expects " + std::to_string(input_dim(cv.models[t])) +
               " features, dataset has " + std::to_string(data.num_features()));
    }
    if (architecture_of(cv.models[t]) == Architecture::Mlp && !data.one_row_per_subject()) {
      mismatch("MLP run needs the cross-sectional (one row per subject) dataset");
    }
  }
  for (std::size_t c : columns_) {
    if (c >= data.num_features()) {
      throw Error(ErrorCode::InvalidConfig, "column " + std::to_string(c) + " out of range");
    }
  }

  fold_subjects_.resize(k);
  fold_offsets_.resize(k);
  fold_standardized_.resize(k);
  fold_labels_.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    fold_subjects_[t] = cv.folds.test_subjects(t);
    if (fold_subjects_[t].empty()) mismatch("fold " + std::to_string(t) + " has no test subjects");
    SubjectPanel p = standardized_subset(data, fold_subjects_[t], cv.standardizers[t]);
    fold_offsets_[t] = std::move(p.offsets);
    fold_standardized_[t] = std::move(p.rows);
    fold_labels_[t] = std::move(p.labels);
  }

  auto it = cv.psi.find(metric);
  if (it != cv.psi.end() && it->second != psi_true()) {
    mismatch("frozen models do not reproduce the run's recorded " + std::string(to_string(metric)));
  }
}

CategoryScorer::Workspace CategoryScorer::make_workspace() const { return {fold_standardized_}; }

ConfusionMatrix CategoryScorer::fold_confusion(std::size_t fold, std::span<const std::size_t> donors,
                                               Workspace& ws) const {
  RowMatrix& rows = ws.fold_rows[fold];
  const std::vector<std::size_t>& offsets = fold_offsets_[fold];
  const Standardizer& s = cv_->standardizers[fold];
  if (!donors.empty()) {
    for (std::size_t j = 0; j < donors.size(); ++j) {
      const std::size_t donor = donors[j];
      const std::size_t lr = offsets[j + 1] - offsets[j];
      const std::size_t ld = data_->visits_of(donor);
      for (std::size_t t = 0; t < lr; ++t) {
        const auto r = static_cast<Eigen::Index>(offsets[j] + t);
        const auto d = static_cast<Eigen::Index>(data_->offsets[donor] + aligned_visit(t, ld, lr));
        for (std::size_t c : columns_) {
          const auto col = static_cast<Eigen::Index>(c);
          rows(r, col) = (data_->rows(d, col) - s.mean(col)) / s.scale(col);
        }
      }
    }
  }
  const Eigen::VectorXd z = predict_logits(cv_->models[fold], rows, offsets);
  Labels pred(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) pred[static_cast<std::size_t>(i)] = sigmoid(z(i)) >= 0.5 ? 1 : 0;
  return confusion(fold_labels_[fold], pred);
}

double CategoryScorer::psi_true() const {
  Workspace ws = make_workspace();
  ConfusionMatrix total;
  for (std::size_t t = 0; t < num_folds(); ++t) {
    const ConfusionMatrix cm = fold_confusion(t, {}, ws);
    total.tp += cm.tp;
    total.fp += cm.fp;
    total.tn += cm.tn;
    total.fn += cm.fn;
  }
  return evaluate(metric_, total);
}

double CategoryScorer::score_pooled(std::span<const std::size_t> perm, Workspace& ws) const {
  check_permutation(perm, num_subjects());
  const std::vector<std::size_t> donor_of = inverse(perm);
  ConfusionMatrix total;
  std::vector<std::size_t> donors;
  for (std::size_t t = 0; t < num_folds(); ++t) {
    donors.clear();
    for (std::size_t i : fold_subjects_[t]) donors.push_back(donor_of[i]);
    const ConfusionMatrix cm = fold_confusion(t, donors, ws);
    total.tp += cm.tp;
    total.fp += cm.fp;
    total.tn += cm.tn;
    total.fn += cm.fn;
  }
  return evaluate(metric_, total);
}

double CategoryScorer::score_fold(std::size_t fold, std::span<const std::size_t> perm,
                                  Workspace& ws) const {
  const std::vector<std::size_t>& subjects = fold_subjects_.at(fold);
  check_permutation(perm, subjects.size());
  const std::vector<std::size_t> donor_of = inverse(perm);
  std::vector<std::size_t> donors(subjects.size());
  for (std::size_t j = 0; j < subjects.size(); ++j) donors[j] = subjects[donor_of[j]];
  return evaluate(metric_, fold_confusion(fold, donors, ws));
}

// ---------------------------------------------------------------------------
// Null distribution

std::vector<std::size_t> resolve_columns(const PermutationPlan& plan, const CategorySchema& schema,
                                         std::size_t num_features) {
  std::vector<std::size_t> cols = plan.columns;
  if (cols.empty()) cols = schema.column_indices(plan.category);
  std::vector<std::size_t> sorted = cols;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::InvalidConfig, "plan lists a column twice");
  }
  if (!sorted.empty() && sorted.back() >= num_features) {
    throw Error(ErrorCode::InvalidConfig, "column " + std::to_string(sorted.back()) + " out of range");
  }
  return cols;
}

namespace {

NullDistribution empty_null(const PermutationPlan& plan, std::vector<std::size_t> columns,
                            const CategoryScorer& scorer) {
  NullDistribution null;
  null.category = label_for(plan, columns);
  null.columns = std::move(columns);
  null.mode = plan.mode;
  null.metric = plan.metric;
  null.seed = plan.seed;
  null.exhaustive = plan.exhaustive;
  null.n_trials = plan.n_trials;
  null.psi_true = scorer.psi_true();
  return null;
}

template <typename Score>
void fill_samples(NullDistribution& null, const CategoryScorer& scorer, std::size_t count,
                  std::size_t threads, Score&& score) {
  null.samples.assign(count, NullSample{});
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  std::vector<CategoryScorer::Workspace> spaces;
  spaces.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) spaces.push_back(scorer.make_workspace());
  parallel_for(
      count, workers,
      [&](std::size_t w, std::size_t i) { null.samples[i] = score(i, spaces[w]); }, 8);
}

}  // namespace

NullDistribution null_distribution(const CvRun& cv, const SubjectPanel& data,
                                   const PermutationPlan& plan, std::size_t threads) {
  plan.validate();
  std::vector<std::size_t> columns = resolve_columns(plan, data.schema, data.num_features());
  const CategoryScorer scorer(cv, data, columns, plan.metric);
  NullDistribution null = empty_null(plan, columns, scorer);
  const std::uint64_t key = column_set_key(plan.seed, columns);
  const std::size_t k = scorer.num_folds();

  if (plan.exhaustive) {
    if (plan.mode == PermutationMode::Pooled) {
      const std::size_t n = scorer.num_subjects();
      const std::uint64_t total = factorial_capped(n);
      if (total > kMaxExhaustiveSamples) {
        throw Error(ErrorCode::InfeasiblePlan, std::to_string(n) + "! permutations exceed the exhaustive limit");
      }
      fill_samples(null, scorer, total, threads, [&](std::size_t i, CategoryScorer::Workspace& ws) {
        return NullSample{i, -1, scorer.score_pooled(nth_permutation(n, i), ws)};
      });
    } else {
      std::vector<std::size_t> start(k + 1, 0);
      for (std::size_t t = 0; t < k; ++t) {
        const std::uint64_t f = factorial_capped(scorer.fold_subjects(t).size());
        if (f > kMaxExhaustiveSamples || start[t] + f > kMaxExhaustiveSamples) {
          throw Error(ErrorCode::InfeasiblePlan, "fold permutations exceed the exhaustive limit");
        }
        start[t + 1] = start[t] + f;
      }
      fill_samples(null, scorer, start[k], threads, [&](std::size_t i, CategoryScorer::Workspace& ws) {
        const auto t = static_cast<std::size_t>(std::upper_bound(start.begin(), start.end(), i) - start.begin() - 1);
        const std::size_t local = i - start[t];
        const auto perm = nth_permutation(scorer.fold_subjects(t).size(), local);
        return NullSample{local, static_cast<int>(t), scorer.score_fold(t, perm, ws)};
      });
    }
    null.n_trials = null.samples.size();
    return null;
  }

  if (plan.mode == PermutationMode::Pooled) {
    fill_samples(null, scorer, plan.n_trials, threads, [&](std::size_t r, CategoryScorer::Workspace& ws) {
      Stream rng(derive_key({key, kPooledTag, r}));
      return NullSample{r, -1, scorer.score_pooled(draw_permutation(rng, scorer.num_subjects()), ws)};
    });
  } else {
    fill_samples(null, scorer, k * plan.n_trials, threads, [&](std::size_t i, CategoryScorer::Workspace& ws) {
      const std::size_t t = i / plan.n_trials;
      const std::size_t r = i % plan.n_trials;
      Stream rng(derive_key({key, t, r}));
      const auto perm = draw_permutation(rng, scorer.fold_subjects(t).size());
      return NullSample{r, static_cast<int>(t), scorer.score_fold(t, perm, ws)};
    });
  }
  return null;
}

NullDistribution null_distribution_from(const CvRun& cv, const SubjectPanel& data,
                                        const PermutationPlan& plan,
                                        std::span<const std::vector<std::size_t>> perms,
                                        std::size_t threads) {
  std::vector<std::size_t> columns = resolve_columns(plan, data.schema, data.num_features());
  const CategoryScorer scorer(cv, data, columns, plan.metric);
  NullDistribution null = empty_null(plan, columns, scorer);
  null.mode = PermutationMode::Pooled;
  null.exhaustive = false;
  null.n_trials = perms.size();
  fill_samples(null, scorer, perms.size(), threads, [&](std::size_t r, CategoryScorer::Workspace& ws) {
    return NullSample{r, -1, scorer.score_pooled(perms[r], ws)};
  });
  return null;
}

CategoryTestResult p_value(const NullDistribution& null, double psi_true, const PValueOptions& options) {
  if (null.samples.empty()) throw Error(ErrorCode::EmptyNull, "null distribution has no samples");
  const std::size_t n = null.samples.size();
  CategoryTestResult r;
  r.category = null.category;
  r.psi_true = psi_true;
  r.null_size = n;
  r.n_trials = null.n_trials;
  r.mode = null.mode;
  r.metric = null.metric;
  r.seed = null.seed;

  // Shifted sums keep a constant null exact.
  const double base = null.samples.front().psi_hat;
  double sum = 0.0;
  for (const NullSample& s : null.samples) sum += s.psi_hat - base;
  r.null_mean = base + sum / static_cast<double>(n);
  double ss = 0.0;
  for (const NullSample& s : null.samples) ss += (s.psi_hat - r.null_mean) * (s.psi_hat - r.null_mean);
  r.null_std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;

  for (const NullSample& s : null.samples) {
    const bool hit = options.exceedance == Exceedance::AtLeast ? s.psi_hat >= psi_true : s.psi_hat > psi_true;
    if (hit) ++r.exceedances;
  }
  if (options.smoothing) {
    r.p_value = static_cast<double>(r.exceedances + 1) / static_cast<double>(n + 1);
  } else if (r.exceedances == 0) {
    r.p_is_bound = true;
    r.p_value = 1.0 / static_cast<double>(n);
  } else {
    r.p_value = static_cast<double>(r.exceedances) / static_cast<double>(n);
  }
  return r;
}

std::vector<CategoryTestResult> test_all_categories(const CvRun& cv, const SubjectPanel& data,
                                                    const PermutationPlan& base_plan,
                                                    std::size_t threads) {
  std::vector<CategoryTestResult> out;
  for (const Category& cat : data.schema.categories()) {
    PermutationPlan plan = base_plan;
    plan.category = cat.name;
    plan.columns.clear();
    const NullDistribution null = null_distribution(cv, data, plan, threads);
    out.push_back(p_value(null, null.psi_true, plan.p_options));
  }
  std::stable_sort(out.begin(), out.end(), [](const CategoryTestResult& a, const CategoryTestResult& b) {
    return a.p_value < b.p_value;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json result_to_json(const CategoryTestResult& r) {
  return {
      {"category", r.category},
      {"psi_true", r.psi_true},
      {"null_mean", r.null_mean},
      {"null_std", r.null_std},
      {"difference", r.difference()},
      {"p_value", r.p_value},
      {"p_rendered", r.rendered_p()},
      {"p_is_bound", r.p_is_bound},
      {"exceedances", r.exceedances},
      {"null_size", r.null_size},
      {"n_trials", r.n_trials},
      {"mode", std::string(to_string(r.mode))},
      {"metric", std::string(to_string(r.metric))},
      {"seed", r.seed},
  };
}

nlohmann::json report_to_json(std::span<const CategoryTestResult> results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const CategoryTestResult& r : results) rows.push_back(result_to_json(r));
  return {{"format", "permsig-report"}, {"version", kReportFormatVersion}, {"results", std::move(rows)}};
}

void write_report(std::span<const CategoryTestResult> results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << report_to_json(results).dump(2) << '\n';
}

void write_null_csv(std::span<const NullDistribution> nulls, std::ostream& out) {
  out << "category,trial,fold,psi_hat\n";
  for (const NullDistribution& null : nulls) {
    const std::string name = csv_quote(null.category);
    for (const NullSample& s : null.samples) {
      out << name << ',' << s.trial << ',';
      if (s.fold < 0) {
        out << "pooled";
      } else {
        out << s.fold;
      }
      out << ',' << format_double(s.psi_hat) << '\n';
    }
  }
}

void print_results_table(std::span<const CategoryTestResult> results, std::ostream& out) {
  std::size_t width = 8;
  for (const auto& r : results) width = std::max(width, r.category.size());
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s  %8s  %10s  %8s  %10s  %8s\n", static_cast<int>(width), "category",
                "psi", "null_mean", "null_std", "difference", "p");
  out << buf;
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%-*s  %8.4f  %10.4f  %8.4f  %10.4f  %8s\n", static_cast<int>(width),
                  r.category.c_str(), r.psi_true, r.null_mean, r.null_std, r.difference(),
                  r.rendered_p().c_str());
    out << buf;
  }
}

}  // namespace permsig
