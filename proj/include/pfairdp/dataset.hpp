#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfairdp/rng.hpp"

namespace pfairdp {

// Dense row-major matrix; all feature handling runs through this.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ColumnKind { continuous, one_hot };

struct ColumnSpec {
  std::string name;    // e.g. "age" or "workclass=Private"
  ColumnKind kind = ColumnKind::continuous;
  std::string source;  // original attribute the column came from
};

// Model-ready data: encoded features plus binary label and protected-group
// vectors (1 = favorable label, 1 = privileged group).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> protected_group;
  std::vector<ColumnSpec> schema;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  void validate() const {
    if (labels.size() != size() || protected_group.size() != size())
      throw std::invalid_argument("Dataset: label/protected lengths must match feature rows");
    if (schema.size() != dim())
      throw std::invalid_argument("Dataset: schema length must match feature columns");
    bool has[2] = {false, false};
    for (std::size_t i = 0; i < size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1)
        throw std::invalid_argument("Dataset: labels must be 0/1");
      if (protected_group[i] != 0 && protected_group[i] != 1)
        throw std::invalid_argument("Dataset: protected group must be 0/1");
      has[protected_group[i]] = true;
      for (double v : features.row(i))
        if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature value");
    }
    if (size() > 0 && !(has[0] && has[1]))
      throw std::invalid_argument("Dataset: both protected groups must be present");
  }
};

struct Splits {
  Dataset train, dev, test;
};

struct SplitSpec {
  double train_fraction = 0.72;
  double dev_fraction = 0.08;
  double test_fraction = 0.20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0 && dev_fraction > 0 && test_fraction > 0))
      throw std::invalid_argument("SplitSpec: all fractions must be positive");
    if (std::abs(train_fraction + dev_fraction + test_fraction - 1.0) > 1e-9)
      throw std::invalid_argument("SplitSpec: fractions must sum to 1");
  }
};

// Raw tabular data before encoding: string cells plus per-column metadata.
struct RawColumn {
  std::string name;
  bool continuous = false;
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::vector<std::vector<std::string>> rows;
  std::string label_column;
  std::string favorable_value;
  std::size_t dropped_missing = 0;  // rows removed for "?" cells at load time

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (columns[j].name == name) return j;
    throw std::invalid_argument("RawTable: no column named '" + name + "'");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline double parse_number(const std::string& s, std::size_t row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ": cannot parse '" + s +
                             "' as number in column " + col);
  }
}

// Partition sizes: round the first two, give the remainder to the third.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto c1 = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto c2 = static_cast<std::size_t>(std::llround(spec.dev_fraction * static_cast<double>(n)));
  if (c1 + c2 >= n || c1 == 0 || c2 == 0)
    throw std::invalid_argument("SplitSpec: a split would be empty for n = " + std::to_string(n));
  return {c1, c2, n - c1 - c2};
}

}  // namespace detail

// The fourteen Adult attributes plus the income label, in file order.
inline std::vector<RawColumn> adult_columns() {
  return {{"age", true},           {"workclass", false},     {"fnlwgt", true},
          {"education", false},    {"education-num", true},  {"marital-status", false},
          {"occupation", false},   {"relationship", false},  {"race", false},
          {"sex", false},          {"capital-gain", true},   {"capital-loss", true},
          {"hours-per-week", true},{"native-country", false},{"income", false}};
}

// Loads UCI Adult from a directory holding adult.data (and optionally
// adult.test, which is merged in) or from a single .data/.csv file. Comment
// lines starting with '|' and blank lines are skipped, the trailing '.' that
// adult.test puts on labels is stripped, and any row containing a '?' cell is
// dropped and counted. A leading header row (first cell "age") is tolerated so
// cached exports re-load cleanly.
inline RawTable load_adult(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "adult.data")) files.push_back(path / "adult.data");
    if (fs::exists(path / "adult.test")) files.push_back(path / "adult.test");
    if (files.empty())
      throw std::runtime_error("load_adult: no adult.data under " + path.string());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw std::runtime_error("load_adult: path does not exist: " + path.string());
  }

  RawTable table;
  table.columns = adult_columns();
  table.label_column = "income";
  table.favorable_value = ">50K";

  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("load_adult: cannot open " + file.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = detail::trim(line);
      if (stripped.empty() || stripped[0] == '|') continue;
      auto cells = detail::split_csv_line(stripped);
      if (lineno == 1 && !cells.empty() && cells[0] == "age") continue;  // cached header
      if (cells.size() != table.columns.size())
        throw std::runtime_error("load_adult: " + file.string() + " row " +
                                 std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                 " fields, expected " + std::to_string(table.columns.size()));
      if (!cells.back().empty() && cells.back().back() == '.')
        cells.back().pop_back();  // adult.test label style ">50K."
      bool missing = false;
      for (const auto& c : cells)
        if (c == "?") { missing = true; break; }
      if (missing) {
        ++table.dropped_missing;
        continue;
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (table.rows.empty()) throw std::runtime_error("load_adult: no usable rows");
  return table;
}

inline void write_raw_csv(const RawTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_raw_csv: cannot open " + path.string());
  for (std::size_t j = 0; j < table.columns.size(); ++j)
    out << (j ? "," : "") << table.columns[j].name;
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

// Shuffle rows with the split seed, then cut train/dev/test. No scaling here.
inline Splits split_dataset(const Dataset& data, const SplitSpec& spec) {
  data.validate();
  const auto counts = detail::split_counts(data.size(), spec);
  Rng rng(spec.seed);
  const auto perm = rng.permutation(data.size());

  Splits out;
  Dataset* parts[3] = {&out.train, &out.dev, &out.test};
  std::size_t offset = 0;
  for (int p = 0; p < 3; ++p) {
    Dataset& d = *parts[p];
    d.schema = data.schema;
    d.features = Matrix(counts[p], data.dim());
    d.labels.resize(counts[p]);
    d.protected_group.resize(counts[p]);
    for (std::size_t i = 0; i < counts[p]; ++i) {
      const std::size_t src = perm[offset + i];
      std::copy(data.features.row(src).begin(), data.features.row(src).end(),
                d.features.row(i).begin());
      d.labels[i] = data.labels[src];
      d.protected_group[i] = data.protected_group[src];
    }
    offset += counts[p];
    d.validate();  // both groups must survive into every split
  }
  return out;
}

// Standardize continuous columns of all three splits with train-split
// statistics only (population moments). One-hot columns are left alone.
inline void standardize_with_train_stats(Splits& splits) {
  const Dataset& tr = splits.train;
  for (std::size_t c = 0; c < tr.dim(); ++c) {
    if (tr.schema[c].kind != ColumnKind::continuous) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) mean += tr.features.at(i, c);
    mean /= static_cast<double>(tr.size());
    double var = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double d = tr.features.at(i, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(tr.size());
    const double sd = std::sqrt(var);
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (Dataset* d : {&splits.train, &splits.dev, &splits.test})
      for (std::size_t i = 0; i < d->size(); ++i)
        d->features.at(i, c) = (d->features.at(i, c) - mean) * scale;
  }
}

// Encode a raw table and split it. Categorical attributes one-hot over the
// whole-table value universe in sorted order; continuous attributes are
// standardized with train statistics. The protected column must be binary;
// privileged_value picks which side codes as 1 (default: lexicographically
// larger value, which gives Male for Adult's sex column).
inline Splits preprocess(const RawTable& raw, const std::string& protected_attr,
                         const SplitSpec& spec, std::string privileged_value = "") {
  spec.validate();
  const std::size_t n = raw.rows.size();
  if (n == 0) throw std::invalid_argument("preprocess: empty table");
  const std::size_t prot_idx = raw.column_index(protected_attr);
  const std::size_t label_idx = raw.column_index(raw.label_column);
  if (prot_idx == label_idx) throw std::invalid_argument("preprocess: protected column is the label");

  std::set<std::string> prot_values;
  for (const auto& row : raw.rows) prot_values.insert(row[prot_idx]);
  if (prot_values.size() != 2)
    throw std::invalid_argument("preprocess: protected column must take exactly two values, got " +
                                std::to_string(prot_values.size()));
  if (privileged_value.empty()) privileged_value = *prot_values.rbegin();
  if (!prot_values.count(privileged_value))
    throw std::invalid_argument("preprocess: privileged value '" + privileged_value +
                                "' not present in column " + protected_attr);

  // Category universes come from the whole table so every split shares one encoding.
  std::map<std::size_t, std::vector<std::string>> universes;
  for (std::size_t j = 0; j < raw.columns.size(); ++j) {
    if (j == prot_idx || j == label_idx || raw.columns[j].continuous) continue;
    std::set<std::string> vals;
    for (const auto& row : raw.rows) vals.insert(row[j]);
    universes[j] = {vals.begin(), vals.end()};
  }

  std::vector<ColumnSpec> schema;
  for (std::size_t j = 0; j < raw.columns.size(); ++j) {
    if (j == prot_idx || j == label_idx) continue;
    if (raw.columns[j].continuous) {
      schema.push_back({raw.columns[j].name, ColumnKind::continuous, raw.columns[j].name});
    } else {
      for (const auto& v : universes[j])
        schema.push_back({raw.columns[j].name + "=" + v, ColumnKind::one_hot, raw.columns[j].name});
    }
  }

  Dataset all;
  all.schema = schema;
  all.features = Matrix(n, schema.size());
  all.labels.resize(n);
  all.protected_group.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = raw.rows[i];
    std::size_t c = 0;
    for (std::size_t j = 0; j < raw.columns.size(); ++j) {
      if (j == prot_idx || j == label_idx) continue;
      if (raw.columns[j].continuous) {
        all.features.at(i, c++) = detail::parse_number(row[j], i, raw.columns[j].name);
      } else {
        for (const auto& v : universes[j]) all.features.at(i, c++) = (row[j] == v) ? 1.0 : 0.0;
      }
    }
    all.labels[i] = (row[label_idx] == raw.favorable_value) ? 1 : 0;
    all.protected_group[i] = (row[prot_idx] == privileged_value) ? 1 : 0;
  }

  Splits splits = split_dataset(all, spec);
  standardize_with_train_stats(splits);
  return splits;
}

// Synthetic binary-classification generator with a tunable group bias. Labels
// follow per-group Bernoulli rates base +- bias_strength/2; features are unit
// Gaussians whose means shift with the label (fixed total separation) and with
// the group (proportional to bias_strength), so the group signal leaks into
// the features and a repair step has something to remove. The first four rows
// are pinned to the four (group, label) cells so tiny fixtures always contain
// both groups and both labels. Columns are standardized over the generated set.
struct SyntheticSpec {
  std::size_t n_records = 1000;
  std::size_t n_continuous = 6;
  double group_fraction = 0.5;   // fraction of privileged records
  double bias_strength = 0.13;   // label-rate gap between groups
  std::uint64_t seed = 0;

  void validate() const {
    if (n_records < 4) throw std::invalid_argument("SyntheticSpec: need at least 4 records");
    if (n_continuous == 0) throw std::invalid_argument("SyntheticSpec: need at least one feature");
    if (!(group_fraction > 0.0 && group_fraction < 1.0))
      throw std::invalid_argument("SyntheticSpec: group_fraction must be in (0,1)");
    if (bias_strength < 0.0) throw std::invalid_argument("SyntheticSpec: bias_strength must be >= 0");
  }
};

inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_records;
  const std::size_t d = spec.n_continuous;
  const double base_rate = 0.19;
  const auto clamp01 = [](double p) { return std::min(0.99, std::max(0.01, p)); };
  const double rate[2] = {clamp01(base_rate - spec.bias_strength / 2.0),
                          clamp01(base_rate + spec.bias_strength / 2.0)};
  const double label_shift = 1.6 / std::sqrt(static_cast<double>(d));
  const double group_shift = 1.2 * spec.bias_strength;

  Rng rng(spec.seed);
  Dataset data;
  data.features = Matrix(n, d);
  data.labels.resize(n);
  data.protected_group.resize(n);
  for (std::size_t j = 0; j < d; ++j)
    data.schema.push_back({"f" + std::to_string(j), ColumnKind::continuous, "f" + std::to_string(j)});

  for (std::size_t i = 0; i < n; ++i) {
    int g, y;
    if (i < 4) {  // pinned cells: (0,0), (0,1), (1,0), (1,1)
      g = static_cast<int>(i / 2);
      y = static_cast<int>(i % 2);
      rng.uniform01();  // keep the draw count aligned with the general path
      rng.uniform01();
    } else {
      g = rng.uniform01() < spec.group_fraction ? 1 : 0;
      y = rng.uniform01() < rate[g] ? 1 : 0;
    }
    data.protected_group[i] = g;
    data.labels[i] = y;
    for (std::size_t j = 0; j < d; ++j) {
      const double mean = label_shift * (y - 0.5) + group_shift * (g - 0.5);
      data.features.at(i, j) = rng.gaussian(mean, 1.0);
    }
  }

  for (std::size_t j = 0; j < d; ++j) {  // standardize in place
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.features.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = data.features.at(i, j) - mean;
      var += diff * diff;
    }
    var /= static_cast<double>(n);
    const double scale = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      data.features.at(i, j) = (data.features.at(i, j) - mean) * scale;
  }
  data.validate();
  return data;
}

}  // namespace pfairdp
