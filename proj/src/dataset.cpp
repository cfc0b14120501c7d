#include "permsig/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "permsig/csv.hpp"
#include "permsig/error.hpp"

namespace permsig {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string row_ref(std::size_t data_row) {
  return "row " + std::to_string(data_row) + " (line " + std::to_string(data_row + 1) + ")";
}

double parse_double(std::string_view text, std::size_t data_row, std::string_view column) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty() || text == "NA") {
    throw Error(ErrorCode::NonFiniteValue,
                row_ref(data_row) + ", column '" + std::string(column) + "': missing value");
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    // from_chars reports out-of-range for overflowing literals; those are non-finite too.
    if (ec == std::errc::result_out_of_range) {
      throw Error(ErrorCode::NonFiniteValue,
                  row_ref(data_row) + ", column '" + std::string(column) + "': value overflows");
    }
    throw Error(ErrorCode::ParseError, row_ref(data_row) + ", column '" + std::string(column) +
                                           "': not a number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteValue, row_ref(data_row) + ", column '" + std::string(column) +
                                               "': non-finite value '" + std::string(text) + "'");
  }
  return value;
}

long long parse_integer(std::string_view text, std::size_t data_row, std::string_view column) {
  text = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::ParseError, row_ref(data_row) + ", column '" + std::string(column) +
                                           "': not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------
// CategorySchema

CategorySchema::CategorySchema(std::vector<Category> categories)
    : categories_(std::move(categories)) {
  std::set<std::string> names;
  std::map<std::string, std::string> owner;
  offsets_.assign(1, 0);
  for (const Category& c : categories_) {
    if (c.name.empty()) throw Error(ErrorCode::InvalidSchema, "category with empty name");
    if (!names.insert(c.name).second) {
      throw Error(ErrorCode::InvalidSchema, "duplicate category name '" + c.name + "'");
    }
    if (c.columns.empty()) {
      throw Error(ErrorCode::InvalidSchema, "category '" + c.name + "' has no columns");
    }
    for (const std::string& col : c.columns) {
      if (col.empty()) {
        throw Error(ErrorCode::InvalidSchema, "category '" + c.name + "' has an empty column name");
      }
      const auto [it, inserted] = owner.emplace(col, c.name);
      if (!inserted) {
        throw Error(ErrorCode::SchemaOverlap, "column '" + col + "' assigned to both '" +
                                                  it->second + "' and '" + c.name + "'");
      }
    }
    total_columns_ += c.columns.size();
    offsets_.push_back(total_columns_);
  }
}

std::vector<std::string> CategorySchema::ordered_columns() const {
  std::vector<std::string> out;
  out.reserve(total_columns_);
  for (const Category& c : categories_) out.insert(out.end(), c.columns.begin(), c.columns.end());
  return out;
}

std::optional<std::size_t> CategorySchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t CategorySchema::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw Error(ErrorCode::UnknownCategory, "no category named '" + std::string(name) + "'");
}

std::pair<std::size_t, std::size_t> CategorySchema::block(std::size_t category_index) const {
  return {offsets_.at(category_index), offsets_.at(category_index + 1)};
}

std::vector<std::size_t> CategorySchema::column_indices(std::string_view name) const {
  const auto [begin, end] = block(index_of(name));
  std::vector<std::size_t> out(end - begin);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = begin + i;
  return out;
}

CategorySchema CategorySchema::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_array()) {
    throw Error(ErrorCode::InvalidSchema, "expected an object with a 'categories' array");
  }
  std::vector<Category> cats;
  for (const auto& entry : doc["categories"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
        !entry.contains("columns") || !entry["columns"].is_array()) {
      throw Error(ErrorCode::InvalidSchema, "each category needs a 'name' and a 'columns' array");
    }
    Category c;
    c.name = entry["name"].get<std::string>();
    for (const auto& col : entry["columns"]) {
      if (!col.is_string()) throw Error(ErrorCode::InvalidSchema, "column names must be strings");
      c.columns.push_back(col.get<std::string>());
    }
    cats.push_back(std::move(c));
  }
  return CategorySchema(std::move(cats));
}

nlohmann::json CategorySchema::to_json() const {
  nlohmann::json cats = nlohmann::json::array();
  for (const Category& c : categories_) cats.push_back({{"name", c.name}, {"columns", c.columns}});
  return {{"categories", cats}};
}

bool operator==(const Category& a, const Category& b) {
  return a.name == b.name && a.columns == b.columns;
}

bool operator==(const CategorySchema& a, const CategorySchema& b) {
  return a.categories_ == b.categories_;
}

CategorySchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open schema file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "schema " + path.string() + ": " + e.what());
  }
  return CategorySchema::from_json(doc);
}

void save_schema(const CategorySchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << schema.to_json().dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// LongitudinalDataset

void LongitudinalDataset::validate() const {
  if (feature_names != schema.ordered_columns()) {
    throw Error(ErrorCode::SchemaIncomplete, "feature columns do not match the schema layout");
  }
  const auto m = static_cast<Eigen::Index>(feature_names.size());
  std::set<std::string> ids;
  for (const SubjectRecord& s : subjects) {
    if (!ids.insert(s.subject_id).second) {
      throw Error(ErrorCode::DuplicateVisit, "subject '" + s.subject_id + "' appears twice");
    }
    if (s.visits.rows() < 1) {
      throw Error(ErrorCode::EmptySequence, "subject '" + s.subject_id + "' has no visits");
    }
    if (s.visits.cols() != m) {
      throw Error(ErrorCode::DimensionMismatch, "subject '" + s.subject_id + "' has " +
                                                    std::to_string(s.visits.cols()) + " features");
    }
    if (static_cast<Eigen::Index>(s.visit_labels.size()) != s.visits.rows()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "subject '" + s.subject_id + "': visit labels and visits differ in length");
    }
    if (!s.visits.allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "subject '" + s.subject_id + "' has a non-finite value");
    }
    for (int f : s.visit_labels) {
      if (f != 0 && f != 1) {
        throw Error(ErrorCode::ParseError, "subject '" + s.subject_id + "': symptom flag not 0/1");
      }
    }
  }
}

LongitudinalDataset parse_dataset(std::istream& csv, const CategorySchema& schema) {
  std::string line;
  if (!std::getline(csv, line)) throw Error(ErrorCode::ParseError, "empty data file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  const std::vector<std::string> header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (!col_of.emplace(name, i).second) {
      throw Error(ErrorCode::ParseError, "duplicate header column '" + name + "'");
    }
  }
  for (const char* required : {"subject_id", "visit_index", "symptom"}) {
    if (!col_of.count(required)) {
      throw Error(ErrorCode::MissingColumn, std::string("required column '") + required + "' absent");
    }
  }

  const std::vector<std::string> features = schema.ordered_columns();
  std::vector<std::size_t> source_col(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    auto it = col_of.find(features[j]);
    if (it == col_of.end()) {
      throw Error(ErrorCode::MissingColumn, "schema column '" + features[j] + "' not in data file");
    }
    source_col[j] = it->second;
  }
  if (header.size() != features.size() + 3) {
    const std::set<std::string> known(features.begin(), features.end());
    for (const std::string& h : header) {
      const std::string name(trim(h));
      if (name != "subject_id" && name != "visit_index" && name != "symptom" && !known.count(name)) {
        throw Error(ErrorCode::SchemaIncomplete, "data column '" + name + "' is in no category");
      }
    }
  }

  const std::size_t id_col = col_of["subject_id"];
  const std::size_t visit_col = col_of["visit_index"];
  const std::size_t label_col = col_of["symptom"];

  struct Visit {
    std::vector<double> values;
    int label;
  };
  // Subject order: first appearance in the file. Visits keyed by visit_index.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::map<long long, Visit>> by_subject;

  std::size_t data_row = 0;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    ++data_row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, row_ref(data_row) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    const std::string id(trim(fields[id_col]));
    if (id.empty()) throw Error(ErrorCode::ParseError, row_ref(data_row) + ": empty subject_id");
    const long long visit = parse_integer(fields[visit_col], data_row, "visit_index");
    if (visit < 0) {
      throw Error(ErrorCode::ParseError, row_ref(data_row) + ": negative visit_index");
    }
    const long long label = parse_integer(fields[label_col], data_row, "symptom");
    if (label != 0 && label != 1) {
      throw Error(ErrorCode::ParseError, row_ref(data_row) + ": symptom must be 0 or 1");
    }
    Visit v;
    v.label = static_cast<int>(label);
    v.values.reserve(features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
      v.values.push_back(parse_double(fields[source_col[j]], data_row, features[j]));
    }
    auto [sit, fresh] = by_subject.try_emplace(id);
    if (fresh) order.push_back(id);
    if (!sit->second.emplace(visit, std::move(v)).second) {
      throw Error(ErrorCode::DuplicateVisit, row_ref(data_row) + ": subject '" + id +
                                                 "' visit " + std::to_string(visit) + " repeated");
    }
  }

  LongitudinalDataset ds;
  ds.schema = schema;
  ds.feature_names = features;
  ds.subjects.reserve(order.size());
  const auto m = static_cast<Eigen::Index>(features.size());
  for (const std::string& id : order) {
    const auto& visits = by_subject[id];
    SubjectRecord rec;
    rec.subject_id = id;
    rec.visits.resize(static_cast<Eigen::Index>(visits.size()), m);
    Eigen::Index r = 0;
    for (const auto& [idx, v] : visits) {
      for (Eigen::Index j = 0; j < m; ++j) rec.visits(r, j) = v.values[static_cast<std::size_t>(j)];
      rec.visit_labels.push_back(v.label);
      ++r;
    }
    ds.subjects.push_back(std::move(rec));
  }
  return ds;
}

LongitudinalDataset load_dataset(const std::filesystem::path& data_path,
                                 const std::filesystem::path& schema_path) {
  const CategorySchema schema = load_schema(schema_path);
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open data file " + data_path.string());
  return parse_dataset(in, schema);
}

void write_dataset_csv(const LongitudinalDataset& ds, std::ostream& out) {
  out << "subject_id,visit_index,symptom";
  for (const std::string& f : ds.feature_names) out << ',' << csv_quote(f);
  out << '\n';
  for (const SubjectRecord& s : ds.subjects) {
    const std::string id = csv_quote(s.subject_id);
    for (Eigen::Index v = 0; v < s.visits.rows(); ++v) {
      out << id << ',' << v << ',' << s.visit_labels[static_cast<std::size_t>(v)];
      for (Eigen::Index j = 0; j < s.visits.cols(); ++j) out << ',' << format_double(s.visits(v, j));
      out << '\n';
    }
  }
}

void save_dataset(const LongitudinalDataset& ds, const std::filesystem::path& data_path,
                  const std::filesystem::path& schema_path) {
  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + data_path.string());
  write_dataset_csv(ds, out);
  save_schema(ds.schema, schema_path);
}

Labels derive_labels(const LongitudinalDataset& ds) {
  Labels y;
  y.reserve(ds.subjects.size());
  for (const SubjectRecord& s : ds.subjects) {
    const bool any = std::any_of(s.visit_labels.begin(), s.visit_labels.end(),
                                 [](int f) { return f == 1; });
    y.push_back(any ? 1 : 0);
  }
  return y;
}

CrossSectionalDataset collapse_cross_sectional(const LongitudinalDataset& ds) {
  CrossSectionalDataset out;
  const auto n = static_cast<Eigen::Index>(ds.subjects.size());
  const auto m = static_cast<Eigen::Index>(ds.feature_names.size());
  out.X.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowMatrix& v = ds.subjects[static_cast<std::size_t>(i)].visits;
    // Mean around the first visit, so a constant trajectory collapses to its value exactly.
    const Eigen::RowVectorXd first = v.row(0);
    out.X.row(i) = first + (v.rowwise() - first).colwise().sum() / static_cast<double>(v.rows());
    out.subject_ids.push_back(ds.subjects[static_cast<std::size_t>(i)].subject_id);
  }
  out.labels = derive_labels(ds);
  out.schema = ds.schema;
  out.feature_names = ds.feature_names;
  return out;
}

LongitudinalDataset restrict_to_categories(const LongitudinalDataset& ds,
                                           std::span<const std::string> keep) {
  std::vector<Category> cats;
  std::vector<Eigen::Index> cols;
  for (const std::string& name : keep) ds.schema.index_of(name);  // reject unknown names
  for (std::size_t c = 0; c < ds.schema.size(); ++c) {
    const Category& cat = ds.schema.categories()[c];
    if (std::find(keep.begin(), keep.end(), cat.name) == keep.end()) continue;
    cats.push_back(cat);
    const auto [b, e] = ds.schema.block(c);
    for (std::size_t j = b; j < e; ++j) cols.push_back(static_cast<Eigen::Index>(j));
  }
  if (cats.empty()) throw Error(ErrorCode::DegenerateSubset, "no categories selected");

  LongitudinalDataset out;
  out.schema = CategorySchema(std::move(cats));
  out.feature_names = out.schema.ordered_columns();
  out.subjects.reserve(ds.subjects.size());
  for (const SubjectRecord& s : ds.subjects) {
    SubjectRecord r;
    r.subject_id = s.subject_id;
    r.visit_labels = s.visit_labels;
    r.visits = s.visits(Eigen::all, cols);
    out.subjects.push_back(std::move(r));
  }
  return out;
}

LongitudinalDataset with_schema(const LongitudinalDataset& ds, CategorySchema schema) {
  const std::vector<std::string> target = schema.ordered_columns();
  if (target.size() != ds.feature_names.size()) {
    throw Error(ErrorCode::SchemaIncomplete, "new schema covers " + std::to_string(target.size()) +
                                                 " of " + std::to_string(ds.feature_names.size()) +
                                                 " columns");
  }
  std::unordered_map<std::string, Eigen::Index> pos;
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
    pos.emplace(ds.feature_names[j], static_cast<Eigen::Index>(j));
  }
  std::vector<Eigen::Index> cols;
  for (const std::string& c : target) {
    auto it = pos.find(c);
    if (it == pos.end()) throw Error(ErrorCode::MissingColumn, "column '" + c + "' not in dataset");
    cols.push_back(it->second);
  }
  LongitudinalDataset out;
  out.schema = std::move(schema);
  out.feature_names = target;
  for (const SubjectRecord& s : ds.subjects) {
    SubjectRecord r{s.subject_id, s.visits(Eigen::all, cols), s.visit_labels};
    out.subjects.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SubjectPanel

std::vector<std::size_t> SubjectPanel::rows_of(std::span<const std::size_t> subjects) const {
  std::vector<std::size_t> out;
  for (std::size_t s : subjects) {
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) out.push_back(r);
  }
  return out;
}

SubjectPanel SubjectPanel::select(std::span<const std::size_t> subjects) const {
  SubjectPanel out;
  out.schema = schema;
  const std::vector<std::size_t> row_idx = rows_of(subjects);
  out.rows.resize(static_cast<Eigen::Index>(row_idx.size()), rows.cols());
  for (std::size_t r = 0; r < row_idx.size(); ++r) {
    out.rows.row(static_cast<Eigen::Index>(r)) = rows.row(static_cast<Eigen::Index>(row_idx[r]));
  }
  out.offsets.assign(1, 0);
  for (std::size_t s : subjects) {
    out.offsets.push_back(out.offsets.back() + visits_of(s));
    out.labels.push_back(labels[s]);
    out.subject_ids.push_back(subject_ids[s]);
  }
  return out;
}

SubjectPanel to_panel(const LongitudinalDataset& ds) {
  SubjectPanel p;
  p.schema = ds.schema;
  p.labels = derive_labels(ds);
  std::size_t total = 0;
  p.offsets.assign(1, 0);
  for (const SubjectRecord& s : ds.subjects) {
    total += static_cast<std::size_t>(s.visits.rows());
    p.offsets.push_back(total);
    p.subject_ids.push_back(s.subject_id);
  }
  p.rows.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(ds.num_features()));
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    p.rows.middleRows(static_cast<Eigen::Index>(p.offsets[i]), ds.subjects[i].visits.rows()) =
        ds.subjects[i].visits;
  }
  return p;
}

SubjectPanel to_panel(const CrossSectionalDataset& ds) {
  SubjectPanel p;
  p.schema = ds.schema;
  p.labels = ds.labels;
  p.subject_ids = ds.subject_ids;
  p.rows = ds.X;
  p.offsets.resize(ds.labels.size() + 1);
  for (std::size_t i = 0; i < p.offsets.size(); ++i) p.offsets[i] = i;
  return p;
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::identity(std::size_t m) {
  const auto n = static_cast<Eigen::Index>(m);
  return {Eigen::RowVectorXd::Zero(n), Eigen::RowVectorXd::Ones(n)};
}

Standardizer fit_standardizer(const RowMatrix& X, std::span<const std::size_t> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyRowSet, "cannot fit a standardizer on zero rows");
  const Eigen::Index m = X.cols();
  const auto n = static_cast<double>(rows.size());
  Standardizer s{Eigen::RowVectorXd(m), Eigen::RowVectorXd(m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    // Shifted by the first value so constant columns come out exactly constant.
    const double pivot = X(static_cast<Eigen::Index>(rows[0]), j);
    double shift_sum = 0.0;
    for (std::size_t r : rows) shift_sum += X(static_cast<Eigen::Index>(r), j) - pivot;
    const double mean = pivot + shift_sum / n;
    double ss = 0.0;
    for (std::size_t r : rows) {
      const double d = X(static_cast<Eigen::Index>(r), j) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    s.mean(j) = mean;
    s.scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

RowMatrix apply_standardizer(const Standardizer& s, const RowMatrix& X) {
  if (X.cols() != s.mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "standardizer expects " +
                                                  std::to_string(s.mean.size()) + " columns, got " +
                                                  std::to_string(X.cols()));
  }
  RowMatrix out(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    out.row(r) = (X.row(r) - s.mean).cwiseQuotient(s.scale);
  }
  return out;
}

RowMatrix invert_standardizer(const Standardizer& s, const RowMatrix& Z) {
  if (Z.cols() != s.mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "standardizer column count mismatch");
  }
  RowMatrix out(Z.rows(), Z.cols());
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    out.row(r) = Z.row(r).cwiseProduct(s.scale) + s.mean;
  }
  return out;
}

}  // namespace permsig
