#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace permsig {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-subject binary outcome: 0 = non-symptomatic, 1 = cohort of interest.
using Labels = std::vector<int>;

struct Category {
  std::string name;
  std::vector<std::string> columns;
};

// Named, ordered partition of the feature columns into blocks.
//
// Once a dataset is loaded its feature columns are laid out in schema order, so
// every category occupies a contiguous column range (see `block`).
class CategorySchema {
 public:
  CategorySchema() = default;
  // Throws InvalidSchema (empty/duplicate names, empty category) or
  // SchemaOverlap (a column listed twice).
  explicit CategorySchema(std::vector<Category> categories);

  const std::vector<Category>& categories() const noexcept { return categories_; }
  std::size_t size() const noexcept { return categories_.size(); }
  std::size_t num_columns() const noexcept { return total_columns_; }

  std::vector<std::string> ordered_columns() const;
  std::optional<std::size_t> find(std::string_view name) const;
  // Throws UnknownCategory.
  std::size_t index_of(std::string_view name) const;
  // [begin, end) of the category's columns in schema order.
  std::pair<std::size_t, std::size_t> block(std::size_t category_index) const;
  std::vector<std::size_t> column_indices(std::string_view name) const;

  static CategorySchema from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  friend bool operator==(const CategorySchema& a, const CategorySchema& b);

 private:
  std::vector<Category> categories_;
  std::vector<std::size_t> offsets_;  // size() + 1 entries
  std::size_t total_columns_ = 0;
};

bool operator==(const Category& a, const Category& b);

CategorySchema load_schema(const std::filesystem::path& path);
void save_schema(const CategorySchema& schema, const std::filesystem::path& path);

struct SubjectRecord {
  std::string subject_id;
  RowMatrix visits;               // visits x m, time ordered
  std::vector<int> visit_labels;  // one 0/1 flag per visit
};

struct LongitudinalDataset {
  std::vector<SubjectRecord> subjects;
  std::vector<std::string> feature_names;  // equals schema.ordered_columns()
  CategorySchema schema;

  std::size_t num_subjects() const noexcept { return subjects.size(); }
  std::size_t num_features() const noexcept { return feature_names.size(); }
  // Throws on any broken invariant (non-finite values, ragged visits, duplicate ids...).
  void validate() const;
};

// Parses the CSV described in the README: subject_id, visit_index, symptom, features...
// Feature columns are reordered to the schema's category order.
LongitudinalDataset load_dataset(const std::filesystem::path& data_path,
                                 const std::filesystem::path& schema_path);
LongitudinalDataset parse_dataset(std::istream& csv, const CategorySchema& schema);
void write_dataset_csv(const LongitudinalDataset& ds, std::ostream& out);
void save_dataset(const LongitudinalDataset& ds, const std::filesystem::path& data_path,
                  const std::filesystem::path& schema_path);

// y_i = 1 iff any visit of subject i is flagged.
Labels derive_labels(const LongitudinalDataset& ds);

struct CrossSectionalDataset {
  RowMatrix X;  // one row per subject: mean over visits
  Labels labels;
  CategorySchema schema;
  std::vector<std::string> subject_ids;
  std::vector<std::string> feature_names;
};

CrossSectionalDataset collapse_cross_sectional(const LongitudinalDataset& ds);

// Keeps only the named categories (in schema order).
LongitudinalDataset restrict_to_categories(const LongitudinalDataset& ds,
                                           std::span<const std::string> keep);
// Re-partitions the same columns under a different schema.
LongitudinalDataset with_schema(const LongitudinalDataset& ds, CategorySchema schema);

// Model-ready stacked layout shared by both architectures: all visits of all
// subjects as rows, subject i owning rows [offsets[i], offsets[i+1]). The
// cross-sectional view has exactly one row per subject.
struct SubjectPanel {
  RowMatrix rows;
  std::vector<std::size_t> offsets;
  Labels labels;
  std::vector<std::string> subject_ids;
  CategorySchema schema;

  std::size_t num_subjects() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return static_cast<std::size_t>(rows.cols()); }
  std::size_t visits_of(std::size_t subject) const noexcept {
    return offsets[subject + 1] - offsets[subject];
  }
  bool one_row_per_subject() const noexcept {
    return static_cast<std::size_t>(rows.rows()) == num_subjects();
  }
  // Row indices owned by the given subjects, in the given order.
  std::vector<std::size_t> rows_of(std::span<const std::size_t> subjects) const;
  // Panel holding only the given subjects, in the given order.
  SubjectPanel select(std::span<const std::size_t> subjects) const;
};

SubjectPanel to_panel(const LongitudinalDataset& ds);
SubjectPanel to_panel(const CrossSectionalDataset& ds);

// Per-column z-scoring with population std; constant columns get scale 1.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  std::size_t num_features() const noexcept { return static_cast<std::size_t>(mean.size()); }
  static Standardizer identity(std::size_t m);
};

// Throws EmptyRowSet.
Standardizer fit_standardizer(const RowMatrix& X, std::span<const std::size_t> rows);
// Throws DimensionMismatch.
RowMatrix apply_standardizer(const Standardizer& s, const RowMatrix& X);
RowMatrix invert_standardizer(const Standardizer& s, const RowMatrix& Z);

}  // namespace permsig
